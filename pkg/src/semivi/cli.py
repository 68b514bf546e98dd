"""Command-line front end: run / sweep-hmc / eval.

Every RunConfig field has a flag; `--config FILE` loads a JSON config whose
entries override the flags. Relative output directories are resolved
against the SEMIVI_OUTPUT_ROOT environment variable when it is set. Errors
exit nonzero with a one-line JSON diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, SemiviError
from .evaluation import elbo_terms, is_log_marginal
from .experiments import (
    METHODS,
    RunConfig,
    build_target,
    config_from_dict,
    config_to_dict,
    resolve_out_dir,
    run_experiment,
    sweep_hmc_iterations,
)
from .family import load_checkpoint
from .hmc import HmcConfig
from .sivi import SiviConfig
from .targets import TOY_TARGETS, mlr_predictive_loglik


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    d = RunConfig()
    p.add_argument("--config", help="JSON config file; entries override flags")
    p.add_argument("--method", choices=METHODS, default=d.method)
    p.add_argument("--target", default=d.target,
                   help=f"one of {', '.join(TOY_TARGETS)}, blobs, or csv")
    p.add_argument("--dataset-path", default=d.dataset_path)
    p.add_argument("--divide-255", action="store_true")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--test-fraction", type=float, default=d.test_fraction)
    p.add_argument("--blobs-n", type=int, default=d.blobs_n)
    p.add_argument("--blobs-test-n", type=int, default=d.blobs_test_n)
    p.add_argument("--blobs-features", type=int, default=d.blobs_features)
    p.add_argument("--blobs-classes", type=int, default=d.blobs_classes)
    p.add_argument("--blobs-center-scale", type=float, default=d.blobs_center_scale)
    p.add_argument("--blobs-noise", type=float, default=d.blobs_noise)
    p.add_argument("--data-seed", type=int, default=d.data_seed)
    p.add_argument("--eps-dim", type=int, default=d.eps_dim)
    p.add_argument("--hidden", type=int, nargs="*", default=list(d.hidden))
    p.add_argument("--init-scale", type=float, default=d.init_scale)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--minibatch", type=int, default=d.minibatch)
    p.add_argument("--grad-samples", type=int, default=d.S, dest="S",
                   help="draws per gradient estimate")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--eta-net", type=float, default=d.eta_net)
    p.add_argument("--eta-scale", type=float, default=d.eta_scale)
    p.add_argument("--decay-every", type=int, default=d.decay_every)
    p.add_argument("--decay-factor", type=float, default=d.decay_factor)
    hmc = HmcConfig()
    p.add_argument("--hmc-burn", type=int, default=hmc.n_burn)
    p.add_argument("--hmc-keep", type=int, default=hmc.n_keep)
    p.add_argument("--hmc-leapfrog", type=int, default=hmc.leapfrog_steps)
    p.add_argument("--hmc-step-size", type=float, default=None)
    p.add_argument("--hmc-no-adapt", action="store_true")
    p.add_argument("--hmc-target-accept", type=float, default=hmc.target_accept)
    p.add_argument("--sivi-l-final", type=int, default=SiviConfig().L_final)
    p.add_argument("--elbo-every", type=int, default=d.elbo_every)
    p.add_argument("--loglik-every", type=int, default=d.loglik_every)
    p.add_argument("--eval-n-outer", type=int, default=d.eval_n_outer)
    p.add_argument("--eval-m", type=int, default=d.eval_M)
    p.add_argument("--test-samples", type=int, default=d.test_samples)
    p.add_argument("--posterior-samples", type=int, default=d.n_posterior_samples)
    p.add_argument("--out-dir", default=d.out_dir)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        method=args.method,
        target=args.target,
        dataset_path=args.dataset_path,
        divide_255=args.divide_255,
        standardize=args.standardize,
        test_fraction=args.test_fraction,
        blobs_n=args.blobs_n,
        blobs_test_n=args.blobs_test_n,
        blobs_features=args.blobs_features,
        blobs_classes=args.blobs_classes,
        blobs_center_scale=args.blobs_center_scale,
        blobs_noise=args.blobs_noise,
        data_seed=args.data_seed,
        eps_dim=args.eps_dim,
        hidden=tuple(args.hidden),
        init_scale=args.init_scale,
        iterations=args.iterations,
        minibatch=args.minibatch,
        S=args.S,
        seed=args.seed,
        eta_net=args.eta_net,
        eta_scale=args.eta_scale,
        decay_every=args.decay_every,
        decay_factor=args.decay_factor,
        hmc=HmcConfig(
            n_burn=args.hmc_burn,
            n_keep=args.hmc_keep,
            leapfrog_steps=args.hmc_leapfrog,
            step_size=args.hmc_step_size,
            adapt_during_burn=not args.hmc_no_adapt,
            target_accept=args.hmc_target_accept,
        ),
        sivi=SiviConfig(L_final=args.sivi_l_final),
        elbo_every=args.elbo_every,
        loglik_every=args.loglik_every,
        eval_n_outer=args.eval_n_outer,
        eval_M=args.eval_m,
        test_samples=args.test_samples,
        n_posterior_samples=args.posterior_samples,
        out_dir=args.out_dir,
    )
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            overrides = json.load(fh)
        doc = config_to_dict(cfg)
        doc.update(overrides)
        cfg = config_from_dict(doc)
    return cfg


def _parse_setting(text: str):
    try:
        burn, keep = text.split(",")
        return int(burn), int(keep)
    except ValueError:
        raise ConfigError(
            f"sweep setting {text!r} must look like BURN,KEEP (e.g. 5,5)"
        ) from None


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = run_experiment(cfg)
    print(json.dumps({"run_dir": str(result.run_dir),
                      "iterations": cfg.iterations}))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    settings = [_parse_setting(s) for s in args.settings]
    summary = sweep_hmc_iterations(cfg, settings)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    run_dir = resolve_out_dir(args.run_dir)
    config_path = run_dir / "config.json"
    checkpoint_path = run_dir / "checkpoint.json"
    for path in (config_path, checkpoint_path):
        if not path.exists():
            raise ConfigError(f"missing {path}")
    with open(config_path) as fh:
        cfg = config_from_dict(json.load(fh))
    q = load_checkpoint(checkpoint_path)
    target, _, test = build_target(cfg)
    rng = np.random.default_rng(args.seed)

    terms = elbo_terms(target, q, args.n_outer, args.marginal_samples, rng)
    report = {
        "elbo": float(np.mean(terms)),
        "elbo_se": float(np.std(terms, ddof=1) / np.sqrt(len(terms)))
        if len(terms) > 1 else 0.0,
        "n_outer": args.n_outer,
        "marginal_samples": args.marginal_samples,
    }
    if test is not None:
        report["test_loglik"] = mlr_predictive_loglik(
            target, q, test, args.test_samples, rng
        )
    if args.evidence:
        report["log_marginal"] = is_log_marginal(
            target, q, args.evidence_samples, args.marginal_samples, rng
        )
    with open(run_dir / "eval.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semivi",
        description="Semi-implicit variational inference runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configuration")
    _add_run_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser(
        "sweep-hmc", help="train once per HMC (burn,keep) setting"
    )
    _add_run_flags(p_sweep)
    p_sweep.add_argument(
        "--settings", nargs="+", required=True, metavar="BURN,KEEP",
        help="e.g. --settings 1,1 5,5 25,25",
    )
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_eval = sub.add_parser("eval", help="evaluate a finished run directory")
    p_eval.add_argument("--run-dir", required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--n-outer", type=int, default=100)
    p_eval.add_argument("--marginal-samples", type=int, default=10000)
    p_eval.add_argument("--test-samples", type=int, default=8000)
    p_eval.add_argument("--evidence", action="store_true",
                        help="also report the importance-sampling log-evidence")
    p_eval.add_argument("--evidence-samples", type=int, default=1000)
    p_eval.set_defaults(fn=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DataError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except SemiviError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: configs, the training loop, metrics, sweeps.

A run directory contains:

    config.json     resolved configuration (self-describing runs)
    metrics.jsonl   deterministic line-delimited records, append-only
    timings.jsonl   wall-clock sidecar (excluded from metrics so that equal
                    config+seed runs produce byte-identical metrics files)
    checkpoint.json final variational parameters
    samples.csv     posterior-sample dump (skipped for zero-iteration runs)

Single-threaded runs are bit-reproducible given (config, seed): all
randomness flows through one numpy Generator in a fixed order.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import LabeledDataset, load_csv, make_blobs, train_test_split
from .errors import ConfigError, NonFiniteError, SemiviError
from .evaluation import elbo_estimate
from .family import (
    SemiImplicitQ,
    family_arrays,
    family_groups,
    make_constant_family,
    make_family,
    sample_many,
    save_checkpoint,
)
from .gradients import elbo_gradient
from .hmc import HmcConfig
from .optim import rmsprop_init, rmsprop_step
from .family import set_family_arrays
from .sivi import SiviConfig, sivi_surrogate_gradient
from .targets import (
    MultinomialLogisticRegression,
    TOY_TARGETS,
    TargetModel,
    mlr_predictive_loglik,
)

METHODS = ("uivi", "sivi", "explicit")
OUTPUT_ROOT_ENV = "SEMIVI_OUTPUT_ROOT"


@dataclass
class RunConfig:
    method: str = "uivi"
    target: str = "banana"  # toy name, "blobs", or "csv"

    # dataset options (ignored for toy targets)
    dataset_path: Optional[str] = None
    divide_255: bool = False
    standardize: bool = False
    test_fraction: float = 0.2
    blobs_n: int = 2000
    blobs_test_n: int = 1000
    blobs_features: int = 20
    blobs_classes: int = 4
    blobs_center_scale: float = 0.5
    blobs_noise: float = 1.0
    data_seed: int = 0

    # variational family
    eps_dim: int = 3
    hidden: tuple = (50, 50)
    init_scale: float = 1.0

    # training
    iterations: int = 20000
    minibatch: int = 0  # 0 = full batch
    S: int = 1
    seed: int = 0

    # optimizer
    eta_net: float = 0.01
    eta_scale: float = 0.002
    decay_every: int = 3000
    decay_factor: float = 0.9

    hmc: HmcConfig = field(default_factory=HmcConfig)
    sivi: SiviConfig = field(default_factory=SiviConfig)

    # evaluation cadence during training
    elbo_every: int = 100
    loglik_every: int = 1000
    eval_n_outer: int = 20
    eval_M: int = 1000
    test_samples: int = 2000

    n_posterior_samples: int = 300
    out_dir: str = "runs/run"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.target not in (*TOY_TARGETS, "blobs", "csv"):
            raise ConfigError(f"unknown target {self.target!r}")
        if self.target == "csv" and not self.dataset_path:
            raise ConfigError("target 'csv' requires dataset_path")
        if self.target == "csv" and not Path(self.dataset_path).exists():
            raise ConfigError(f"dataset file not found: {self.dataset_path}")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.eps_dim < 1:
            raise ConfigError("eps_dim must be >= 1")
        if self.minibatch < 0:
            raise ConfigError("minibatch must be >= 0")


@dataclass
class MetricsRecord:
    iteration: int
    elbo_estimate: Optional[float] = None
    test_loglik: Optional[float] = None
    hmc_acceptance: Optional[float] = None
    step_size: Optional[float] = None
    sivi_L: Optional[int] = None

    def to_json(self) -> str:
        doc = {k: v for k, v in dataclasses.asdict(self).items() if v is not None}
        return json.dumps(doc, sort_keys=True)


@dataclass
class RunResult:
    run_dir: Path
    q: SemiImplicitQ
    target: TargetModel
    train: Optional[LabeledDataset]
    test: Optional[LabeledDataset]
    metrics: list


def config_to_dict(cfg: RunConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["hidden"] = list(cfg.hidden)
    doc["hmc"] = dataclasses.asdict(cfg.hmc)
    doc["sivi"] = {"L_final": cfg.sivi.L_final}
    return doc


def config_from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "hmc" in doc and isinstance(doc["hmc"], dict):
        doc["hmc"] = HmcConfig(**doc["hmc"])
    if "sivi" in doc and isinstance(doc["sivi"], dict):
        doc["sivi"] = SiviConfig(**doc["sivi"])
    if "hidden" in doc:
        doc["hidden"] = tuple(doc["hidden"])
    return RunConfig(**doc)


def resolve_out_dir(out_dir) -> Path:
    """Apply the output-root environment variable to relative out_dirs."""
    out = Path(out_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def build_target(cfg: RunConfig):
    """Target model plus (train, test) datasets (None for synthetic targets)."""
    if cfg.target in TOY_TARGETS:
        return TOY_TARGETS[cfg.target](), None, None
    data_rng = np.random.default_rng(cfg.data_seed)
    if cfg.target == "blobs":
        full = make_blobs(
            cfg.blobs_n + cfg.blobs_test_n,
            cfg.blobs_features,
            cfg.blobs_classes,
            data_rng,
            center_scale=cfg.blobs_center_scale,
            noise=cfg.blobs_noise,
        )
        test = full.subset(slice(cfg.blobs_n, None))
        train = full.subset(slice(0, cfg.blobs_n))
    else:  # csv
        full = load_csv(cfg.dataset_path, divide_255=cfg.divide_255,
                        standardize=cfg.standardize)
        train, test = train_test_split(full, cfg.test_fraction, data_rng)
    return MultinomialLogisticRegression(train), train, test


def build_family(cfg: RunConfig, z_dim: int, rng: np.random.Generator) -> SemiImplicitQ:
    if cfg.method == "explicit":
        return make_constant_family(cfg.eps_dim, z_dim, init_scale=cfg.init_scale)
    return make_family(cfg.eps_dim, z_dim, cfg.hidden, rng, init_scale=cfg.init_scale)


class _JsonlWriter:
    """Line-buffered JSONL writer: every record is flushed, so a crashed run
    leaves a parseable prefix."""

    def __init__(self, path):
        self._fh = open(path, "w", buffering=1)

    def write(self, doc) -> None:
        self._fh.write(doc if isinstance(doc, str) else json.dumps(doc, sort_keys=True))
        self._fh.write("\n")

    def close(self) -> None:
        self._fh.close()


def run_experiment(cfg: RunConfig) -> RunResult:
    """Execute one training run and populate the run directory."""
    cfg.validate()
    run_dir = resolve_out_dir(cfg.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    with open(run_dir / "config.json", "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")

    rng = np.random.default_rng(cfg.seed)
    target, train, test = build_target(cfg)
    q = build_family(cfg, target.z_dim, rng)

    params = family_arrays(q)
    opt = rmsprop_init(
        params,
        family_groups(q),
        eta_net=cfg.eta_net,
        eta_scale=cfg.eta_scale,
        decay_every=cfg.decay_every,
        decay_factor=cfg.decay_factor,
    )

    metrics_out = _JsonlWriter(run_dir / "metrics.jsonl")
    timings_out = _JsonlWriter(run_dir / "timings.jsonl")
    metrics: list[MetricsRecord] = []
    t_start = time.perf_counter()
    hmc_step = None
    accept_sum, accept_n = 0.0, 0

    def batch_for_iter():
        if train is None or cfg.minibatch in (0, train.n) or cfg.minibatch > train.n:
            return None
        idx = rng.choice(train.n, size=cfg.minibatch, replace=False)
        return train.subset(idx)

    try:
        for t in range(1, cfg.iterations + 1):
            batch = batch_for_iter()
            sivi_L = None
            if cfg.method == "sivi":
                t_max = max(cfg.iterations - 1, 0)
                sivi_L = cfg.sivi.L_at(t - 1, t_max)
                _, grads = sivi_surrogate_gradient(target, q, sivi_L, rng, batch)
            else:
                est = elbo_gradient(
                    target, q, cfg.S, cfg.hmc, rng, batch, step_size=hmc_step
                )
                hmc_step = est.hmc_step_size
                accept_sum += est.hmc_acceptance
                accept_n += 1
                grads = est.grads
                if cfg.method == "explicit":
                    # keep the mean constant in eps: the eps->z weights stay 0
                    grads.net.layers[0].weight[...] = 0.0

            new_params = rmsprop_step(opt, family_arrays(q), grads.arrays())
            set_family_arrays(q, new_params)

            record = None
            if cfg.elbo_every and t % cfg.elbo_every == 0:
                record = MetricsRecord(iteration=t)
                record.elbo_estimate = elbo_estimate(
                    target, q, cfg.eval_n_outer, cfg.eval_M, rng
                )
                if sivi_L is not None:
                    record.sivi_L = sivi_L
                if accept_n:
                    record.hmc_acceptance = accept_sum / accept_n
                    record.step_size = hmc_step
                    accept_sum, accept_n = 0.0, 0
            if (
                cfg.loglik_every
                and test is not None
                and t % cfg.loglik_every == 0
            ):
                record = record or MetricsRecord(iteration=t)
                record.test_loglik = mlr_predictive_loglik(
                    target, q, test, cfg.test_samples, rng
                )
            if record is not None:
                metrics.append(record)
                metrics_out.write(record.to_json())
                timings_out.write(
                    {"iteration": t,
                     "wall_clock_seconds": time.perf_counter() - t_start}
                )
    except NonFiniteError as exc:
        metrics_out.write({"iteration": t, "error": str(exc)})
        raise
    finally:
        metrics_out.close()
        timings_out.close()

    save_checkpoint(q, run_dir / "checkpoint.json")
    if cfg.iterations > 0 and cfg.n_posterior_samples > 0:
        _, _, zs = sample_many(q, cfg.n_posterior_samples, rng)
        header = ",".join(f"z{i}" for i in range(q.z_dim))
        np.savetxt(run_dir / "samples.csv", zs, delimiter=",",
                   header=header, comments="")
    return RunResult(run_dir=run_dir, q=q, target=target, train=train,
                     test=test, metrics=metrics)


def sweep_hmc_iterations(cfg: RunConfig, settings) -> dict:
    """One training run per (n_burn, n_keep) setting, shared seed and cadence.

    Writes aligned metrics under <out_dir>/burnX_keepY/ and a summary.json
    with each setting's final recorded ELBO and the max-min spread.
    """
    settings = list(settings)
    if not settings:
        raise ConfigError("sweep needs at least one (n_burn, n_keep) setting")
    if cfg.method == "sivi":
        raise ConfigError("the HMC sweep applies to reverse-conditional methods only")
    base_dir = resolve_out_dir(cfg.out_dir)
    rows = []
    for n_burn, n_keep in settings:
        sub = dataclasses.replace(
            cfg,
            hmc=dataclasses.replace(cfg.hmc, n_burn=int(n_burn), n_keep=int(n_keep)),
            out_dir=str(base_dir / f"burn{n_burn}_keep{n_keep}"),
        )
        result = run_experiment(sub)
        elbos = [m.elbo_estimate for m in result.metrics if m.elbo_estimate is not None]
        rows.append(
            {
                "n_burn": int(n_burn),
                "n_keep": int(n_keep),
                "run_dir": str(result.run_dir),
                "final_elbo": elbos[-1] if elbos else None,
                "iterations": [m.iteration for m in result.metrics
                               if m.elbo_estimate is not None],
            }
        )
    finals = [r["final_elbo"] for r in rows if r["final_elbo"] is not None]
    summary = {
        "settings": rows,
        "final_elbo_spread": (max(finals) - min(finals)) if finals else None,
    }
    base_dir.mkdir(parents=True, exist_ok=True)
    with open(base_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary

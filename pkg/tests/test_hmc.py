import numpy as np
import pytest
from scipy.stats import ks_2samp

from conftest import linear_gaussian_family
from semivi.errors import NonFiniteError
from semivi.family import make_family, sample
from semivi.gradients import reverse_conditional_moments
from semivi.hmc import HmcConfig, hmc_sample, leapfrog, reverse_log_target
from semivi.nn import finite_difference_check


class TestReverseLogTarget:
    def test_constant_net_reduces_to_prior(self, rng):
        from test_family import constant_family

        q = constant_family([1.0, 2.0], 0.9)
        z = np.array([0.5, 0.5])
        eps1, eps2 = rng.standard_normal(3), rng.standard_normal(3)
        v1, g1 = reverse_log_target(q, z, eps1)
        v2, g2 = reverse_log_target(q, z, eps2)
        # the z-term is constant in eps, so differences come from the prior alone
        assert np.isclose(
            v1 - v2, -0.5 * (eps1 @ eps1) + 0.5 * (eps2 @ eps2), atol=1e-12
        )
        np.testing.assert_allclose(g1, -eps1, atol=1e-12)
        np.testing.assert_allclose(g2, -eps2, atol=1e-12)

    def test_linear_gaussian_grad_vanishes_at_posterior_mode(self):
        q = linear_gaussian_family(2.0, 1.0)
        mean, cov = reverse_conditional_moments(q, np.array([1.0]))
        np.testing.assert_allclose(mean, [0.4], atol=1e-12)
        np.testing.assert_allclose(cov, [[0.2]], atol=1e-12)
        _, grad = reverse_log_target(q, np.array([1.0]), np.array([0.4]))
        np.testing.assert_allclose(grad, [0.0], atol=1e-12)

    def test_grad_matches_finite_differences(self, rng):
        q = make_family(3, 2, (6,), rng, init_scale=0.7)
        for _ in range(10):
            z = rng.standard_normal(2)
            eps = rng.standard_normal(3)
            _, grad = reverse_log_target(q, z, eps)
            err = finite_difference_check(
                lambda e: reverse_log_target(q, z, e)[0], eps, grad
            )
            assert err < 1e-5


class TestLeapfrog:
    def test_hand_computed_step_on_quadratic(self):
        # U = x^2/2, start (1, 0), h = 0.1: x' = 0.995, p' = -0.09975
        pos, mom = leapfrog((np.array([1.0]), np.array([0.0])),
                            lambda x: -x, 1, 0.1)
        np.testing.assert_allclose(pos, [0.995], atol=1e-15)
        np.testing.assert_allclose(mom, [-0.09975], atol=1e-15)

    def test_zero_gradient_is_pure_drift(self):
        start_p = np.array([0.7, -0.2])
        pos, mom = leapfrog((np.zeros(2), start_p),
                            lambda x: np.zeros(2), 7, 0.3)
        np.testing.assert_allclose(pos, 7 * 0.3 * start_p, atol=1e-12)
        np.testing.assert_array_equal(mom, start_p)

    def test_reversibility(self, rng):
        def grad(x):  # anharmonic potential
            return -(x + 0.3 * x**3)

        for _ in range(5):
            x0 = rng.standard_normal(3)
            p0 = rng.standard_normal(3)
            x1, p1 = leapfrog((x0, p0), grad, 25, 0.05)
            x2, p2 = leapfrog((x1, -p1), grad, 25, 0.05)
            np.testing.assert_allclose(x2, x0, atol=1e-9)
            np.testing.assert_allclose(-p2, p0, atol=1e-9)

    def test_energy_error_quarters_when_step_halves(self):
        # fixed trajectory length, max |dH| tracked along the whole trajectory
        def grad(x):
            return -x

        def max_denergy(h, length=3.2):
            steps = int(round(length / h))
            worst = 0.0
            for x0, p0 in [(1.0, 0.3), (0.5, -1.0), (2.0, 0.0)]:
                x, p = np.array([x0]), np.array([p0])
                h_start = 0.5 * (x0**2 + p0**2)
                for _ in range(steps):
                    x, p = leapfrog((x, p), grad, 1, h)
                    worst = max(worst, abs(0.5 * float(x @ x + p @ p) - h_start))
            return worst

        for big, small in [(0.4, 0.2), (0.2, 0.1), (0.1, 0.05)]:
            ratio = max_denergy(big) / max_denergy(small)
            assert 3.0 <= ratio <= 5.0

    def test_nonfinite_gradient_raises(self):
        with pytest.raises(NonFiniteError):
            leapfrog((np.array([1.0]), np.array([0.0])),
                     lambda x: np.array([np.nan]), 1, 0.1)


class TestHmcSample:
    def test_frozen_dynamics_at_tiny_step(self, rng):
        q = linear_gaussian_family(2.0, 1.0)
        eps0 = np.array([0.123])
        kept, info = hmc_sample(
            q, np.array([1.0]), eps0,
            HmcConfig(step_size=1e-12, adapt_during_burn=False), rng,
        )
        assert np.all(np.abs(kept - eps0) < 1e-6)

    def test_pooled_moments_match_conjugate(self):
        # chains start from exact reverse-conditional draws; kept samples must
        # stay marginally N(0.4, 0.2)
        rng = np.random.default_rng(8)
        q = linear_gaussian_family(2.0, 1.0)
        z = np.array([1.0])
        cfg = HmcConfig()
        n_chains = 3000
        chain_means = np.empty(n_chains)
        chain_m2 = np.empty(n_chains)  # per-chain mean of (eps - 0.4)^2
        for c in range(n_chains):
            eps0 = 0.4 + np.sqrt(0.2) * rng.standard_normal(1)
            kept, _ = hmc_sample(q, z, eps0, cfg, rng)
            chain_means[c] = kept.mean()
            chain_m2[c] = np.mean((kept - 0.4) ** 2)
        se_mean = chain_means.std(ddof=1) / np.sqrt(n_chains)
        assert abs(chain_means.mean() - 0.4) < 4 * se_mean
        se_m2 = chain_m2.std(ddof=1) / np.sqrt(n_chains)
        assert abs(chain_m2.mean() - 0.2) < 4 * se_m2

    def test_stationarity_ks_against_conjugate(self):
        rng = np.random.default_rng(9)
        q = linear_gaussian_family(2.0, 1.0)
        z = np.array([1.0])
        cfg = HmcConfig()
        n = 4000
        hmc_draws = np.empty(n)
        for c in range(n):
            eps0 = 0.4 + np.sqrt(0.2) * rng.standard_normal(1)
            kept, _ = hmc_sample(q, z, eps0, cfg, rng)
            hmc_draws[c] = kept[-1, 0]  # last kept draw: independent across chains
        exact = 0.4 + np.sqrt(0.2) * rng.standard_normal(n)
        assert ks_2samp(hmc_draws, exact).pvalue > 0.01

    def test_acceptance_reported_and_step_carried(self, rng):
        q = make_family(3, 2, (8,), rng, init_scale=0.8)
        rec = sample(q, rng)
        kept, info = hmc_sample(q, rec.z, rec.eps, HmcConfig(), rng)
        assert kept.shape == (5, 3)
        assert 0.0 <= info["acceptance_rate"] <= 1.0
        assert info["step_size"] > 0
        kept2, info2 = hmc_sample(
            q, rec.z, rec.eps, HmcConfig(), rng, step_size=info["step_size"]
        )
        assert info2["step_size"] > 0

    def test_nonfinite_initializer_rejected(self, rng):
        q = linear_gaussian_family()
        with pytest.raises(NonFiniteError):
            hmc_sample(q, np.array([1.0]), np.array([np.inf]), HmcConfig(), rng)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HmcConfig(n_keep=0)
        with pytest.raises(ValueError):
            HmcConfig(step_size=-0.1)
        with pytest.raises(ValueError):
            HmcConfig(target_accept=1.5)

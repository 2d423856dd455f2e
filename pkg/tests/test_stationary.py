"""Stationary density, MH sampler, normalizer estimates, long-run comparison."""

import math

import numpy as np
import pytest
from scipy.special import betaln, gammainc, gammaln
from scipy.stats import chi2

from cir_particles import (
    ModelParams,
    NotEvaluable,
    RegimeMismatch,
    Scheme,
    SimConfig,
    compare_long_run,
    estimate_log_normalizer,
    gamma_sum_law,
    ks_test,
    log_density_unnormalized,
    mh_sampler,
    rejection_sample_pair,
)
from cir_particles.stationary import StationaryDensity, log_density_rows

P2 = ModelParams(alpha=2.0, beta=0.5, gamma=1.0, n=2)


def logz_closed_form_n2(alpha: float, beta: float, gamma: float) -> float:
    """Exact normalizer for n = 2 via the (sum, gap) change of variables.

    With p = (alpha-2-beta)/2:
    Z = 4^{-p}/4 * Gamma(2p+beta+2) * gamma^{-(2p+beta+2)} * B((beta+1)/2, p+1).
    """
    p = (alpha - 2.0 - beta) / 2.0
    return (
        math.log(0.25)
        - p * math.log(4.0)
        + gammaln(2 * p + beta + 2.0)
        - (2 * p + beta + 2.0) * math.log(gamma)
        + betaln((beta + 1.0) / 2.0, p + 1.0)
    )


class TestLogDensity:
    def test_hand_value(self):
        # -0.25 ln 4 - gamma * (1 + 4) + 0.5 ln 3 for (alpha,beta,gamma)=(2,0.5,1)
        expected = -0.25 * math.log(4.0) - 5.0 + 0.5 * math.log(3.0)
        assert log_density_unnormalized(P2, [1.0, 4.0]) == pytest.approx(expected, rel=1e-14)

    def test_coincident_is_minus_infinity(self):
        assert log_density_unnormalized(P2, [2.0, 2.0]) == -math.inf

    def test_unordered_is_minus_infinity(self):
        assert log_density_unnormalized(P2, [4.0, 1.0]) == -math.inf

    def test_zero_boundary_is_minus_infinity(self):
        assert log_density_unnormalized(P2, [0.0, 1.0]) == -math.inf

    def test_not_evaluable_outside_regime(self):
        with pytest.raises(NotEvaluable):
            log_density_unnormalized(ModelParams(2.0, 0.5, 0.0, 2), [1.0, 2.0])
        with pytest.raises(NotEvaluable):
            log_density_unnormalized(ModelParams(0.4, 0.5, 1.0, 2), [1.0, 2.0])

    def test_vanishes_continuously_at_coincidence(self):
        gaps = [1e-1, 1e-3, 1e-6]
        vals = [log_density_rows(P2, np.array([[1.0, 1.0 + g]]))[0] for g in gaps]
        assert vals[0] > vals[1] > vals[2]

    def test_vanishes_at_zero_when_power_positive(self):
        # alpha - 2 - (n-1) beta > 0 makes the density vanish at lambda_1 = 0
        p = ModelParams(alpha=3.0, beta=0.5, gamma=1.0, n=2)
        vals = [
            log_density_rows(p, np.array([[x, 2.0]]))[0] for x in (1e-1, 1e-3, 1e-6)
        ]
        assert vals[0] > vals[1] > vals[2]

    def test_marginal_integrable_near_zero_for_positive_kappa(self):
        # integral over lambda_1 in (0, 0.1] at fixed lambda_2 converges
        lam2 = 2.0
        estimates = []
        for m in (2_000, 20_000):
            x = (np.arange(m) + 0.5) * (0.1 / m)
            vals = np.exp(log_density_rows(P2, np.column_stack([x, np.full(m, lam2)])))
            estimates.append(vals.sum() * 0.1 / m)
        assert estimates[1] == pytest.approx(estimates[0], rel=1e-2)

    def test_evaluable_flag(self):
        assert StationaryDensity(P2).evaluable
        assert not StationaryDensity(ModelParams(2.0, 0.5, -1.0, 2)).evaluable


class TestGammaSumLaw:
    def test_values(self):
        assert gamma_sum_law(P2) == (2.0, 1.0)

    def test_requires_evaluable(self):
        with pytest.raises(NotEvaluable):
            gamma_sum_law(ModelParams(2.0, 0.5, 0.0, 2))


class TestRejectionSampler:
    def test_exact_sum_law(self):
        rng = np.random.default_rng(100)
        lam = rejection_sample_pair(P2, 20_000, rng)
        shape, rate = gamma_sum_law(P2)
        _, p = ks_test(lam.sum(axis=1), lambda x: gammainc(shape, rate * np.asarray(x)))
        assert p >= 0.01

    def test_sorted_output(self):
        rng = np.random.default_rng(101)
        lam = rejection_sample_pair(P2, 2_000, rng)
        assert np.all(lam[:, 1] >= lam[:, 0])

    def test_n3_rejected(self):
        with pytest.raises(NotEvaluable):
            rejection_sample_pair(ModelParams(2.0, 0.4, 1.0, 3), 10, np.random.default_rng(0))


class TestMhSampler:
    def test_sum_statistic_matches_gamma_law(self):
        mh = mh_sampler(P2, 5_000, np.random.default_rng(7), thin=25)
        shape, rate = gamma_sum_law(P2)
        _, p = ks_test(mh.sums, lambda x: gammainc(shape, rate * np.asarray(x)))
        assert p >= 0.01

    def test_detailed_balance_against_rejection_sampler(self):
        # chi-square two-sample comparison on a coarse 2-D grid of the cone
        rng = np.random.default_rng(8)
        mh = mh_sampler(P2, 12_000, rng, thin=10).points
        ex = rejection_sample_pair(P2, 12_000, rng)
        edges = np.array([0.0, 0.5, 1.0, 1.5, 2.5, 4.0, np.inf])
        k = len(edges) - 1

        def cells(sample):
            i = np.searchsorted(edges, sample[:, 0], side="right") - 1
            j = np.searchsorted(edges, sample[:, 1], side="right") - 1
            return np.bincount(i * k + j, minlength=k * k)

        c1, c2 = cells(mh), cells(ex)
        keep = (c1 + c2) >= 10
        n1, n2 = c1.sum(), c2.sum()
        stat = float(
            (
                (math.sqrt(n2 / n1) * c1[keep] - math.sqrt(n1 / n2) * c2[keep]) ** 2
                / (c1[keep] + c2[keep])
            ).sum()
        )
        dof = int(keep.sum()) - 1
        assert chi2.sf(stat, df=dof) >= 0.01

    def test_gelman_rubin_from_distant_starts(self):
        chains = []
        for start, seed in ((np.array([0.05, 0.1]), 1), (np.array([5.0, 12.0]), 2)):
            mh = mh_sampler(
                P2, 4_000, np.random.default_rng(seed), initial=start, thin=5
            )
            chains.append(mh.sums)
        m = len(chains)
        n = len(chains[0])
        means = np.array([c.mean() for c in chains])
        variances = np.array([c.var(ddof=1) for c in chains])
        w = variances.mean()
        b = n * means.var(ddof=1)
        r_hat = math.sqrt(((n - 1) / n * w + b / n) / w)
        assert r_hat <= 1.05

    def test_not_evaluable(self):
        with pytest.raises(NotEvaluable):
            mh_sampler(ModelParams(2.0, 0.5, 0.0, 2), 100, np.random.default_rng(0))


class TestLogNormalizer:
    def test_quadrature_matches_closed_form_n2(self):
        q = estimate_log_normalizer(P2, "quadrature", degree=80)
        closed = logz_closed_form_n2(2.0, 0.5, 1.0)
        assert abs(q.estimate - closed) <= max(3 * q.stderr, 1e-4)

    def test_importance_matches_closed_form_n2(self):
        i = estimate_log_normalizer(
            P2, "importance", n_samples=100_000, rng=np.random.default_rng(12)
        )
        closed = logz_closed_form_n2(2.0, 0.5, 1.0)
        assert abs(i.estimate - closed) <= 3 * i.stderr

    def test_two_branches_agree_n2(self):
        q = estimate_log_normalizer(P2, "quadrature", degree=80)
        i = estimate_log_normalizer(
            P2, "importance", n_samples=100_000, rng=np.random.default_rng(13)
        )
        assert abs(q.estimate - i.estimate) <= 3 * math.hypot(q.stderr, i.stderr)

    def test_two_branches_agree_n3(self):
        p3 = ModelParams(alpha=2.0, beta=0.4, gamma=1.0, n=3)
        q = estimate_log_normalizer(p3, "quadrature", degree=60)
        i = estimate_log_normalizer(
            p3, "importance", n_samples=150_000, rng=np.random.default_rng(14)
        )
        assert abs(q.estimate - i.estimate) <= 3 * math.hypot(q.stderr, i.stderr)

    def test_offset_shifts_exactly(self):
        base = estimate_log_normalizer(P2, "quadrature", degree=40)
        shifted = estimate_log_normalizer(P2, "quadrature", degree=40, log_offset=2.5)
        assert shifted.estimate - base.estimate == 2.5

    def test_quadrature_needs_small_n(self):
        with pytest.raises(NotEvaluable):
            estimate_log_normalizer(
                ModelParams(4.0, 0.4, 1.0, 4), "quadrature", degree=20
            )


class TestCompareLongRun:
    def test_regime_mismatch(self):
        p = ModelParams(alpha=0.7, beta=0.5, gamma=1.0, n=2)  # kappa in (0, 1-beta)
        cfg = SimConfig(dt=1e-3, horizon=1.0, paths=16)
        with pytest.raises(RegimeMismatch):
            compare_long_run(p, cfg)

    def test_ks_distance_improves_from_coarse_to_fine_dt(self):
        # Endpoint sum vs the exact Gamma law on a common noise tree: the
        # Euler bias at dt=4e-3 is resolvable against dt=1e-3 at this scale
        # (intermediate levels sit below the KS noise floor).
        from cir_particles import ks_distance, simulate_batch

        distances = {}
        for dt, refine in ((4e-3, 4), (1e-3, 1)):
            cfg = SimConfig(dt=dt, horizon=5.0, seed=61, paths=10_000)
            res = simulate_batch(P2, cfg, noise_refine=refine)
            distances[dt] = ks_distance(
                res.final_lambda.sum(axis=1),
                lambda x: gammainc(2.0, np.asarray(x)),
            )
        assert distances[4e-3] > distances[1e-3]

    def test_small_scale_run_passes(self):
        cfg = SimConfig(
            scheme=Scheme.EXACT_CIR_SPLITTING, dt=2e-3, horizon=10.0, seed=23,
            paths=2_000,
        )
        report = compare_long_run(P2, cfg, mh_steps=2_000, mh_thin=10)
        assert report["sum_vs_exact_gamma"].ks_p >= 0.01
        assert report["sum_vs_mh"].ks_p >= 0.01
        assert {"marginal_1_vs_mh", "marginal_2_vs_mh"} <= set(report)

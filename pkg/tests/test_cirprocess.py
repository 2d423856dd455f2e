"""Exact CIR oracle checks: boundary law, moments, invariant law, transform."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammainc

from cir_particles import (
    CirBoundary,
    CirParams,
    CirState,
    ModelParams,
    NoInvariantLaw,
    boundary_classification,
    conditional_mean,
    exact_step,
    integrated_laplace,
    invariant_gamma,
    ks_test,
    partial_sum_bound_process,
    rng_streams,
    sum_process,
)


def transition_variance(cir: CirParams, r0: float, dt: float) -> float:
    """Independent oracle: closed-form conditional variance of the CIR step.

    Var = r0 sigma^2 (e^{-b dt} - e^{-2 b dt})/b + a sigma^2 (1-e^{-b dt})^2/(2 b^2),
    with the b -> 0 limit r0 sigma^2 dt + a sigma^2 dt^2 / 2.
    """
    a, b, s2 = cir.a, cir.b, cir.sigma**2
    if b == 0.0:
        return r0 * s2 * dt + a * s2 * dt**2 / 2.0
    e1 = math.exp(-b * dt)
    return r0 * s2 * (e1 - e1**2) / b + a * s2 * (1.0 - e1) ** 2 / (2.0 * b**2)


class TestBoundaryClassification:
    def test_three_regions(self):
        assert boundary_classification(CirParams(2, 0, 2)) is CirBoundary.NEVER_HITS_ZERO
        assert boundary_classification(CirParams(1, 1, 2)) is CirBoundary.HITS_ZERO_AS
        assert (
            boundary_classification(CirParams(1, -1, 2))
            is CirBoundary.HITS_ZERO_PROB_IN_0_1
        )

    @given(a=st.floats(0.0, 5.0), b=st.floats(-2.0, 2.0), sigma=st.floats(0.2, 3.0))
    @settings(max_examples=300, deadline=None)
    def test_partition_of_parameter_plane(self, a, b, sigma):
        verdict = boundary_classification(CirParams(a, b, sigma))
        if a >= sigma**2 / 2:
            assert verdict is CirBoundary.NEVER_HITS_ZERO
        elif b >= 0:
            assert verdict is CirBoundary.HITS_ZERO_AS
        else:
            assert verdict is CirBoundary.HITS_ZERO_PROB_IN_0_1


class TestConditionalMean:
    def test_hand_value(self):
        assert conditional_mean(CirParams(2, 1, 2), 1.0, math.log(2)) == pytest.approx(1.5)

    def test_zero_reversion_limit(self):
        assert conditional_mean(CirParams(2, 0, 2), 1.0, 1.0) == pytest.approx(3.0)

    def test_pure_reversion_to_zero(self):
        assert conditional_mean(CirParams(0, 2, 2), 5.0, 1e3) == pytest.approx(0.0, abs=1e-12)

    @given(b=st.floats(1e-12, 1e-6))
    @settings(max_examples=50, deadline=None)
    def test_continuous_at_b_zero(self, b):
        near = conditional_mean(CirParams(2, b, 2), 1.0, 1.0)
        assert near == pytest.approx(conditional_mean(CirParams(2, 0, 2), 1.0, 1.0), rel=1e-5)


class TestExactStep:
    def test_mean_matches_conditional_mean(self):
        cir = CirParams(2, 1, 2)
        rng = rng_streams(12, 0)
        samples = exact_step(cir, np.full(100_000, 1.0), math.log(2), rng)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - 1.5) <= 4 * se

    def test_variance_matches_closed_form(self):
        cir = CirParams(2, 1, 2)
        rng = rng_streams(13, 0)
        samples = exact_step(cir, np.full(100_000, 1.0), math.log(2), rng)
        var = samples.var(ddof=1)
        target = transition_variance(cir, 1.0, math.log(2))
        # stderr of the sample variance via the fourth moment
        m4 = np.mean((samples - samples.mean()) ** 4)
        se_var = math.sqrt((m4 - var**2) / samples.size)
        assert abs(var - target) <= 5 * se_var

    def test_absorbed_at_zero_without_drift(self):
        cir = CirParams(0, 1, 2)
        rng = rng_streams(14, 0)
        assert exact_step(cir, 0.0, 0.5, rng) == 0.0
        assert np.all(exact_step(cir, np.zeros(100), 0.5, rng) == 0.0)

    def test_nonnegative_and_b_zero_mean(self):
        cir = CirParams(1.5, 0, 2)
        rng = rng_streams(15, 0)
        samples = exact_step(cir, np.full(50_000, 0.7), 0.3, rng)
        assert np.all(samples >= 0.0)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - (0.7 + 1.5 * 0.3)) <= 4 * se

    def test_huge_step_reaches_invariant_law_without_overflow(self):
        cir = CirParams(2, 2, 2)
        rng = rng_streams(17, 0)
        samples = exact_step(cir, np.full(20_000, 5.0), 1e3, rng)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - cir.a / cir.b) <= 4 * se

    def test_invariant_law_reached_from_arbitrary_start(self):
        cir = CirParams(4, 2, 2)  # invariant Gamma(2, 1)
        shape, rate = invariant_gamma(cir)
        rng = rng_streams(16, 0)
        r = np.full(10_000, 9.0)
        # burn-in so that b * t >= 10, then one decorrelated endpoint per path
        for _ in range(10):
            r = exact_step(cir, r, 0.5, rng)
        d, p = ks_test(r, lambda x: gammainc(shape, rate * np.asarray(x)))
        assert p >= 0.01


class TestInvariantGamma:
    def test_sum_process_law(self):
        assert invariant_gamma(CirParams(4, 2, 2)) == (2.0, 1.0)

    def test_exponential_case(self):
        assert invariant_gamma(CirParams(2, 2, 2)) == (1.0, 1.0)

    def test_no_law_without_reversion(self):
        with pytest.raises(NoInvariantLaw):
            invariant_gamma(CirParams(3, -1, 2))
        with pytest.raises(NoInvariantLaw):
            invariant_gamma(CirParams(3, 0, 2))


class TestCirState:
    def test_nonnegative_value(self):
        CirState(t=0.0, r=0.0)
        with pytest.raises(ValueError):
            CirState(t=0.0, r=-0.1)


class TestProcessMaps:
    def test_sum_process(self):
        cir = sum_process(ModelParams(alpha=2.0, beta=0.4, gamma=1.0, n=3))
        assert (cir.a, cir.b, cir.sigma) == (6.0, 2.0, 2.0)

    def test_partial_sum_bound(self):
        p = ModelParams(alpha=1.0, beta=0.4, gamma=0.5, n=3)
        cir = partial_sum_bound_process(p, 2)
        assert cir.a == pytest.approx(2 * (1.0 - 0.4))
        assert cir.b == pytest.approx(1.0)
        assert partial_sum_bound_process(p, p.n).a == sum_process(p).a


class TestIntegratedLaplace:
    def test_mu_zero_is_one(self):
        p = ModelParams(alpha=1.0, beta=0.5, gamma=1.0, n=2)
        q = integrated_laplace(p, 1.0, 0.0, 1.0)
        assert q.value == 1.0 and q.phi == 0.0 and q.psi == 0.0

    def test_psi_large_time_limit(self):
        p = ModelParams(alpha=1.0, beta=0.5, gamma=1.0, n=2)
        q = integrated_laplace(p, 1.0, 1.0, 1e3)
        assert abs(q.psi - 1.0 / (math.sqrt(3.0) + 1.0)) <= 1e-9

    def test_value_in_unit_interval_and_monotone(self):
        p = ModelParams(alpha=1.0, beta=0.5, gamma=1.0, n=2)
        mus = [0.25, 0.5, 1.0, 2.0]
        ts = [0.25, 0.5, 1.0, 4.0]
        vals_mu = [integrated_laplace(p, 1.0, mu, 1.0).value for mu in mus]
        vals_t = [integrated_laplace(p, 1.0, 0.5, t).value for t in ts]
        assert all(0.0 < v <= 1.0 for v in vals_mu + vals_t)
        assert all(a > b for a, b in zip(vals_mu, vals_mu[1:]))
        assert all(a > b for a, b in zip(vals_t, vals_t[1:]))

    def test_infinite_horizon_vanishes(self):
        p = ModelParams(alpha=1.0, beta=0.5, gamma=1.0, n=2)
        q = integrated_laplace(p, 1.0, 0.5, math.inf)
        assert q.value == 0.0 and math.isinf(q.phi)

    def _integral_samples(self, params, sum0, horizon, m=40_000, h=2.5e-3, key=11):
        cir = sum_process(params)
        rng = rng_streams(key, 0)
        r = np.full(m, sum0)
        integral = np.zeros(m)
        for _ in range(int(round(horizon / h))):
            r_new = exact_step(cir, r, h, rng)
            integral += 0.5 * (r + r_new) * h
            r = r_new
        return integral

    def test_matches_monte_carlo_at_reference_point(self):
        # n=2, alpha=1, gamma=1, sum0=1, mu=0.5, t=1
        p = ModelParams(alpha=1.0, beta=0.5, gamma=1.0, n=2)
        integral = self._integral_samples(p, 1.0, 1.0)
        vals = np.exp(-0.5 * integral)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        closed = integrated_laplace(p, 1.0, 0.5, 1.0).value
        assert abs(vals.mean() - closed) <= 4 * se

    def test_prefactor_scales_with_n_not_two(self):
        # The phi prefactor is n*alpha: at n=3 the 2*alpha variant is far off.
        p = ModelParams(alpha=1.0, beta=0.4, gamma=1.0, n=3)
        integral = self._integral_samples(p, 2.0, 1.0, key=12)
        vals = np.exp(-1.0 * integral)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        q = integrated_laplace(p, 2.0, 1.0, 1.0)
        assert abs(vals.mean() - q.value) <= 4 * se
        two_alpha_variant = math.exp(-2.0 * p.alpha * q.phi - 2.0 * q.psi)
        assert abs(vals.mean() - two_alpha_variant) > 10 * se

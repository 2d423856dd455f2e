"""Event detection, first-passage estimation, time change, diagnostics."""

import math

import numpy as np
import pytest

from cir_particles import (
    CirBoundary,
    EventKind,
    ModelParams,
    Scheme,
    SimConfig,
    Terminated,
    bessel_collision_dimension,
    boundary_classification,
    detect_events,
    first_passage_partial_sum,
    integrability_diagnostic,
    simulate_path,
    sum_process,
    time_change_A,
)
from cir_particles.errors import BadK
from cir_particles.integrators import PathRecord


def synthetic_path(times, lambdas, dt=1e-2, terminated=Terminated.HORIZON):
    times = np.asarray(times, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    cfg = SimConfig(dt=dt, horizon=float(times[-1]) if times[-1] > dt else 1.0)
    params = ModelParams(alpha=2.0, beta=0.5, gamma=0.0, n=lambdas.shape[1])
    return PathRecord(
        params=params, config=cfg, path_index=0, times=times, lambdas=lambdas,
        terminated=terminated, stop_time=float(times[-1]),
    )


class TestDetectEvents:
    def test_constant_separated_path_is_quiet(self):
        times = np.linspace(0.0, 1.0, 11)
        lam = np.tile([1.0, 2.0, 3.0], (11, 1))
        log = detect_events(synthetic_path(times, lam), 0.5)
        assert log.events == [] and log.multiple_collisions == []

    def test_linear_decay_crosses_partial_sum(self):
        times = np.linspace(0.0, 1.0, 101)
        lam = np.column_stack([np.maximum(1.0 - times, 0.0), np.full(101, 5.0)])
        log = detect_events(synthetic_path(times, lam), 0.05)
        ev = log.first(EventKind.ZERO_HIT_PARTIAL_SUM, 1)
        assert ev is not None
        # first grid time with lambda_1 <= 0.05
        assert ev.time == pytest.approx(0.95)

    def test_shrinking_delta_never_moves_events_earlier(self):
        rng = np.random.default_rng(2)
        times = np.linspace(0.0, 1.0, 200)
        walk = np.abs(np.cumsum(rng.normal(0, 0.05, 200))) + 0.01
        lam = np.column_stack([walk, walk + np.abs(np.cumsum(rng.normal(0, 0.03, 200))) + 0.005])
        path = synthetic_path(times, np.sort(lam, axis=1))
        for kind, idx in ((EventKind.PAIR_COLLISION, 1), (EventKind.ZERO_HIT_PARTIAL_SUM, 1)):
            previous = -math.inf
            for delta in (0.5, 0.2, 0.05, 0.01):
                ev = detect_events(path, delta).first(kind, idx)
                t = ev.time if ev else math.inf
                assert t >= previous
                previous = t

    def test_joint_event_and_multiple_collision_flags(self):
        times = np.array([0.0, 0.1, 0.2])
        lam = np.array([[0.5, 1.0, 2.0], [0.005, 0.008, 2.0], [0.5, 1.0, 2.0]])
        log = detect_events(synthetic_path(times, lam), 0.01)
        assert log.first(EventKind.JOINT_EVENT_ZETA) is not None
        # simultaneous distinct pair events
        lam2 = np.array([[0.5, 1.0, 2.0], [0.5, 0.505, 0.509], [0.5, 1.0, 2.0]])
        log2 = detect_events(synthetic_path(times, lam2), 0.01)
        assert (0.1, 1, 2) in log2.multiple_collisions

    def test_stop_events_reported(self):
        times = np.array([0.0, 0.1])
        lam = np.array([[1.0, 2.0], [0.5, 2.0]])
        path = synthetic_path(times, lam, terminated=Terminated.STOPPED_AT_S_EPS)
        log = detect_events(path, 1e-3)
        assert log.first(EventKind.STOP_S) is not None


class TestFirstPassage:
    def test_k_equals_n_matches_cir_boundary_oracle(self):
        # a = n*alpha < sigma^2/2 and b >= 0: the sum hits zero almost surely.
        p_hit = ModelParams(alpha=0.7, beta=0.5, gamma=0.5, n=2)
        assert boundary_classification(sum_process(p_hit)) is CirBoundary.HITS_ZERO_AS
        cfg = SimConfig(
            scheme=Scheme.EXACT_CIR_SPLITTING, dt=1e-3, horizon=40.0, seed=10, paths=200
        )
        ladder = first_passage_partial_sum(p_hit, cfg, 2, levels=(1e-2,))
        assert ladder[1e-2].estimate >= 0.95

        # a >= sigma^2/2: the sum never hits zero.
        p_never = ModelParams(alpha=2.6, beta=0.5, gamma=0.5, n=2)
        assert (
            boundary_classification(sum_process(p_never))
            is CirBoundary.NEVER_HITS_ZERO
        )
        ladder = first_passage_partial_sum(p_never, cfg, 2, levels=(1e-3,))
        assert ladder[1e-3].estimate <= 0.01

    def test_ladder_is_monotone_in_delta(self):
        p = ModelParams(alpha=1.0, beta=0.4, gamma=0.5, n=3)
        cfg = SimConfig(
            scheme=Scheme.EXACT_CIR_SPLITTING, dt=1e-3, horizon=30.0, seed=11, paths=150
        )
        ladder = first_passage_partial_sum(p, cfg, 2)
        assert ladder[1e-2].estimate >= ladder[1e-3].estimate >= ladder[1e-4].estimate

    def test_hit_fraction_monotone_in_k(self):
        # psum_k <= psum_{k+1} pointwise, so hits can only become rarer in k.
        from cir_particles import simulate_batch

        p = ModelParams(alpha=1.0, beta=0.4, gamma=0.5, n=3)
        cfg = SimConfig(
            scheme=Scheme.EXACT_CIR_SPLITTING, dt=1e-3, horizon=30.0, seed=12, paths=150
        )
        res = simulate_batch(p, cfg, event_levels=[1e-2])
        hits = ~np.isnan(res.monitors[1e-2]["psum"])
        fractions = hits.mean(axis=0)
        assert fractions[0] >= fractions[1] >= fractions[2]

    def test_bad_k(self):
        p = ModelParams(alpha=1.0, beta=0.4, gamma=0.5, n=3)
        cfg = SimConfig(dt=1e-3, horizon=1.0)
        with pytest.raises(BadK):
            first_passage_partial_sum(p, cfg, 4)


class TestTimeChange:
    def test_constant_pair_value(self):
        times = np.linspace(0.0, 1.0, 11)
        lam = np.tile([1.0, 2.0], (11, 1))
        tc = time_change_A(synthetic_path(times, lam), 2)
        assert tc.values[-1] == pytest.approx(12.0)
        assert tc.values[0] == 0.0

    def test_zero_path(self):
        times = np.linspace(0.0, 1.0, 11)
        lam = np.zeros((11, 2))
        tc = time_change_A(synthetic_path(times, lam), 2)
        assert np.all(tc.values == 0.0)

    def test_nondecreasing_and_growing_with_horizon(self):
        p = ModelParams(alpha=2.0, beta=0.5, gamma=1.0, n=2)
        values = []
        for horizon in (1.0, 2.0):
            cfg = SimConfig(dt=1e-3, horizon=horizon, seed=3)
            rec, _ = simulate_path(p, cfg, 0)
            tc = time_change_A(rec, 2)
            assert np.all(np.diff(tc.values) >= 0.0)
            values.append(tc.values[-1])
        assert values[1] > values[0]

    def test_index_validation(self):
        times = np.linspace(0.0, 1.0, 3)
        lam = np.tile([1.0, 2.0], (3, 1))
        with pytest.raises(BadK):
            time_change_A(synthetic_path(times, lam), 1)


class TestBesselDimension:
    @pytest.mark.parametrize(
        "beta,expected",
        [(0.5, (1.5, True)), (1.0, (2.0, True)), (1.5, (2.5, False))],
    )
    def test_dimension_and_hit_verdict(self, beta, expected):
        dim, hits = bessel_collision_dimension(beta)
        assert dim == pytest.approx(expected[0])
        assert hits is expected[1]

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            bessel_collision_dimension(0.0)


class TestIntegrabilityDiagnostic:
    def test_constant_path_value(self):
        times = np.linspace(0.0, 1.0, 101)
        lam = np.tile([1.0, 3.0], (101, 1))
        diag = integrability_diagnostic(synthetic_path(times, lam, dt=1e-2))
        assert diag[0] == pytest.approx(1.5)

    def test_stable_under_refinement_without_collisions(self):
        # dt halving on a shared noise tree: the same Brownian path, so the
        # diagnostic is a property of the trajectory, not the grid.
        from cir_particles import simulate_batch
        from cir_particles.integrators import PathRecord

        p = ModelParams(alpha=3.0, beta=1.2, gamma=1.0, n=2)
        values = []
        for dt, refine in ((2e-3, 2), (1e-3, 1)):
            cfg = SimConfig(dt=dt, horizon=2.0, seed=19)
            res = simulate_batch(
                p, cfg, n_paths=1, initial=np.array([1.0, 3.0]),
                record=True, noise_refine=refine,
            )
            rec = PathRecord(
                params=p, config=cfg, path_index=0, times=res.times,
                lambdas=res.trajectories[0], terminated=res.terminated(0),
                stop_time=float(res.stop_time[0]),
            )
            values.append(integrability_diagnostic(rec)[0])
        assert abs(values[0] - values[1]) / values[1] <= 0.05

    def test_log_growth_near_synthetic_collision(self):
        # gap = (t0 - t): integral of lambda_2/gap = ln(t0/res) + (t0 - res),
        # so the diagnostic grows like -log of the residual gap.
        t0 = 1.0
        diags = []
        residuals = (1e-2, 1e-4)
        for residual in residuals:
            times = np.linspace(0.0, t0 - residual, 4001)
            gap = t0 - times
            lam = np.column_stack([np.ones_like(times), 1.0 + gap])
            diags.append(
                integrability_diagnostic(synthetic_path(times, lam, dt=1e-4))[0]
            )
        closed0 = math.log(t0 / residuals[0]) + (t0 - residuals[0])
        assert diags[0] == pytest.approx(closed0, rel=0.02)
        increment = diags[1] - diags[0]
        assert increment == pytest.approx(math.log(residuals[0] / residuals[1]), rel=0.15)

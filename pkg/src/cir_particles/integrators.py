"""Time-stepping schemes for the interacting CIR particle system.

Five schemes share one vectorized kernel:

``truncated_euler``
    Full-truncation Euler in lambda coordinates: drift and diffusion are
    evaluated at the current nonnegative state, the updated state is clamped
    at zero and re-sorted.  Interaction denominators are floored in magnitude
    (see :class:`_Guard`), preserving sign, which bounds the one-step
    displacement without biasing away from collisions.

``regularized_switching``
    Alternates the two epsilon-regularized drifts: system A removes the
    zero-boundary singularity via a clamp that saturates once lambda_1 >=
    eps/2 (where it coincides with the plain drift), system B removes the
    first-gap singularity and coincides with the plain drift on
    {lambda_1 <= eps, lambda_2 - lambda_1 >= eps}.  The mode switches
    A -> B when lambda_1 <= eps/2 and B -> A when lambda_1 >= eps, and the
    simulation stops at the joint event lambda_1 <= eps and
    lambda_2 - lambda_1 <= eps.

``root_coordinates``
    Euler in x = sqrt(lambda) coordinates with unit diffusion.

``c_epsilon``
    The kappa < 0 scheme in root coordinates, with the Lipschitz floor
    1/(x v eps) on the inward drift; stops when x_1 <= sqrt(eps)
    (i.e. lambda_1 <= eps).

``exact_cir_splitting``
    Strang splitting: half a step of the guarded interaction drift, one
    exact CIR transition per coordinate (constant drift alpha, reversion
    2*gamma, diffusion scale 2), then the second interaction half-step.
    The CIR factor reproduces the zero-boundary behaviour exactly (no
    Euler overshoot through the origin), and because independent
    noncentral chi-squares with a common scale add, the coordinate sum is
    advanced by the exact sum-CIR transition up to the interaction terms,
    which cancel in the sum.  This scheme draws no Gaussian increments, so
    shared-noise coupling and noise_refine do not apply to it, and its
    determinism is per batch layout rather than per path.

Noise is keyed by (seed, step, path, coordinate) through
:mod:`cir_particles.randomness`, so a path is bit-identical whether it is run
alone, inside any batch, or under any parallel schedule, and two systems run
with the same seed are driven by the same Brownian increments (the coupling
used by the contraction and comparison experiments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .cirprocess import CirParams, exact_step
from .errors import CoincidentCoordinates, ConfigError
from .model import EigenState, ModelParams, RootState
from .randomness import exact_step_stream, step_normals

__all__ = [
    "BatchResult",
    "NoiseIncrement",
    "PathRecord",
    "Scheme",
    "SimConfig",
    "SwitchingMode",
    "Terminated",
    "contraction_curve",
    "drift_A_eps",
    "drift_B_eps",
    "simulate_batch",
    "simulate_coupled",
    "simulate_coupled_cir",
    "simulate_path",
    "step_c_epsilon",
    "step_switching",
    "step_truncated_euler",
]


class Scheme(str, Enum):
    TRUNCATED_EULER = "truncated_euler"
    REGULARIZED_SWITCHING = "regularized_switching"
    ROOT_COORDINATES = "root_coordinates"
    C_EPSILON = "c_epsilon"
    EXACT_CIR_SPLITTING = "exact_cir_splitting"


class Terminated(str, Enum):
    HORIZON = "horizon"
    STOPPED_AT_S_EPS = "stopped_at_S_eps"
    STOPPED_AT_ZETA_EPS = "stopped_at_zeta_eps"
    NUMERICAL_FAILURE = "numerical_failure"


# Internal integer codes for the batch kernel; EVENT marks paths frozen early
# by a stop_on rule (an efficiency device for first-passage estimators).
_T_HORIZON, _T_S_EPS, _T_ZETA, _T_FAIL, _T_EVENT = 0, 1, 2, 3, 4
_CODE_TO_TERMINATED = {
    _T_HORIZON: Terminated.HORIZON,
    _T_S_EPS: Terminated.STOPPED_AT_S_EPS,
    _T_ZETA: Terminated.STOPPED_AT_ZETA_EPS,
    _T_FAIL: Terminated.NUMERICAL_FAILURE,
}


@dataclass(frozen=True)
class SimConfig:
    """Scheme choice plus step size, horizon, regularization and seeding.

    ``epsilon`` defaults to 10*sqrt(dt) when not given; ``collision_tol`` is
    the event-detection level delta, distinct from the scheme's epsilon.
    """

    scheme: Scheme = Scheme.TRUNCATED_EULER
    dt: float = 1e-3
    horizon: float = 1.0
    epsilon: float | None = None
    collision_tol: float = 1e-3
    seed: int = 0
    paths: int = 1
    record_stride: int = 1
    kick_cap: float = 1.0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.horizon <= self.dt:
            raise ConfigError(f"horizon must exceed dt, got {self.horizon}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 10.0 * math.sqrt(self.dt))
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.collision_tol <= 0:
            raise ConfigError(f"collision_tol must be > 0, got {self.collision_tol}")
        if self.paths < 1:
            raise ConfigError(f"paths must be >= 1, got {self.paths}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.kick_cap <= 0:
            raise ConfigError(f"kick_cap must be > 0, got {self.kick_cap}")
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def n_steps(self) -> int:
        return max(int(round(self.horizon / self.dt)), 1)

    @property
    def guard(self) -> float:
        """Static magnitude floor for interaction denominators."""
        return max(self.collision_tol**2, self.dt)

    def make_guard(self, beta: float) -> "_Guard":
        return _Guard(beta, self.dt, self.collision_tol, self.kick_cap)


@dataclass(frozen=True)
class NoiseIncrement:
    """Gaussian increments with variance dt per coordinate."""

    dW: np.ndarray


@dataclass
class SwitchingMode:
    """Current regularized system (A or B) and the log of switches."""

    mode: str = "A"
    switch_times: list[tuple[float, str]] = field(default_factory=list)


@dataclass
class PathRecord:
    """One sampled trajectory in lambda coordinates."""

    params: ModelParams
    config: SimConfig
    path_index: int
    times: np.ndarray
    lambdas: np.ndarray
    terminated: Terminated
    stop_time: float
    switches: list[tuple[float, str]] = field(default_factory=list)

    @property
    def states(self) -> list[EigenState]:
        return [EigenState(float(t), row) for t, row in zip(self.times, self.lambdas)]


@dataclass
class BatchResult:
    """Vectorized simulation output for a contiguous block of paths.

    ``monitors`` maps each detection level to first-hit times (nan = never):
    ``gap`` (P, n-1) adjacent-gap events, ``psum`` (P, n) partial-sum events,
    ``zeta`` (P,) the joint event, ``double`` (P,) same-step double events.
    """

    params: ModelParams
    config: SimConfig
    path_offset: int
    n_paths: int
    final_lambda: np.ndarray
    stop_time: np.ndarray
    terminated_code: np.ndarray
    monitors: dict[float, dict[str, np.ndarray]]
    times: np.ndarray | None = None
    trajectories: np.ndarray | None = None
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)
    switch_log: list[list[tuple[float, str]]] | None = None

    def terminated(self, i: int) -> Terminated:
        return _CODE_TO_TERMINATED.get(int(self.terminated_code[i]), Terminated.HORIZON)


# ---------------------------------------------------------------------------
# Guarded pairwise interactions (batch kernels)
# ---------------------------------------------------------------------------


class _Guard:
    """Denominator floor for the singular pairwise terms.

    Two floors combine: the static level max(collision_tol^2, dt), and a
    displacement floor beta*sqrt((l_i+l_j)*dt)/(2*kick_cap) that bounds the
    one-step drift displacement of a colliding pair by ``kick_cap`` times the
    pair's one-step diffusion scale 2*sqrt((l_i+l_j)*dt).  Without the second
    floor an Euler step across a collision hurls the pair apart by
    ~beta*(l_i+l_j) regardless of dt, a kick that does not vanish under
    refinement and visibly distorts near-boundary statistics.  Both floors
    are symmetric in (i, j), so capped terms stay exactly antisymmetric and
    the drift-sum identity survives capping.
    """

    def __init__(self, beta: float, dt: float, collision_tol: float, kick_cap: float):
        self.static = max(collision_tol**2, dt)
        self.disp_coeff = beta * math.sqrt(dt) / (2.0 * kick_cap)

    def floor(self, pair_sum: np.ndarray) -> np.ndarray:
        return np.maximum(self.static, self.disp_coeff * np.sqrt(pair_sum))


# Zero-floor guard: exact division, used by the pure (raising) drift surfaces.
_EXACT_GUARD = _Guard(beta=0.0, dt=0.0, collision_tol=0.0, kick_cap=1.0)


def _guarded_pair_sum(lam: np.ndarray, beta: float, guard: _Guard) -> np.ndarray:
    """beta * sum_{j != i} (l_i + l_j)/(l_i - l_j) with floored denominators.

    Rows are sorted, so ties take the sign of the index order; the floor
    preserves exact antisymmetry in (i, j).
    """
    p, n = lam.shape
    out = np.zeros_like(lam)
    for i in range(n):
        for j in range(i + 1, n):
            s = lam[:, i] + lam[:, j]
            d = lam[:, i] - lam[:, j]
            den = np.where(d != 0.0, np.sign(d), -1.0) * np.maximum(
                np.abs(d), guard.floor(s)
            )
            t = s / den
            out[:, i] += t
            out[:, j] -= t
    return beta * out


def _guarded_inv_sum(lam: np.ndarray, guard: _Guard) -> np.ndarray:
    """sum_{j != i} 1/(l_i - l_j) with the same floored denominators."""
    p, n = lam.shape
    out = np.zeros_like(lam)
    for i in range(n):
        for j in range(i + 1, n):
            d = lam[:, i] - lam[:, j]
            den = np.where(d != 0.0, np.sign(d), -1.0) * np.maximum(
                np.abs(d), guard.floor(lam[:, i] + lam[:, j])
            )
            t = 1.0 / den
            out[:, i] += t
            out[:, j] -= t
    return out


def _drift_trunc_batch(params: ModelParams, lam: np.ndarray, guard: _Guard) -> np.ndarray:
    return (
        params.alpha
        - 2.0 * params.gamma * lam
        + _guarded_pair_sum(lam, params.beta, guard)
    )


def _clamp_a(lam: np.ndarray, eps: float) -> np.ndarray:
    # 0 at lambda <= eps/8, 1 at lambda >= eps/2.
    root_eps = math.sqrt(eps)
    return np.clip(
        (2.0 * math.sqrt(2.0) / root_eps)
        * (np.sqrt(lam) - root_eps / (2.0 * math.sqrt(2.0))),
        0.0,
        1.0,
    )


def _clamp_b(lam: np.ndarray, eps: float) -> np.ndarray:
    # 0 at lambda <= eps/4, 1 at lambda >= eps.
    root_eps = math.sqrt(eps)
    return np.clip((2.0 / root_eps) * (np.sqrt(lam) - root_eps / 2.0), 0.0, 1.0)


def _drift_a_batch(
    params: ModelParams, eps: float, lam: np.ndarray, guard: _Guard
) -> np.ndarray:
    return (
        params.kappa
        + 1.0
        - _clamp_a(lam, eps)
        - 2.0 * params.gamma * lam
        + 2.0 * params.beta * lam * _guarded_inv_sum(lam, guard)
    )


def _drift_b_batch(
    params: ModelParams, eps: float, lam: np.ndarray, guard: _Guard
) -> np.ndarray:
    out = np.empty_like(lam)
    lam1 = lam[:, 0]
    m = np.minimum(lam1, eps)
    upper = lam[:, 1:]
    den = np.maximum(upper - m[:, None], eps)
    out[:, 0] = (
        params.kappa
        - 2.0 * params.gamma * lam1
        - 2.0 * params.beta * np.sum(m[:, None] / den, axis=1)
    )
    out[:, 1:] = (
        params.kappa
        + 1.0
        - _clamp_b(upper, eps)
        - 2.0 * params.gamma * upper
        + 2.0 * params.beta * upper * _guarded_inv_sum(upper, guard)
        + 2.0 * params.beta * upper / den
    )
    return out


def _drift_root_batch(params: ModelParams, x: np.ndarray, guard: _Guard) -> np.ndarray:
    lam = x * x
    inv = _guarded_inv_sum(lam, guard)
    x_floor = np.maximum(x, math.sqrt(guard.static))
    return (params.kappa - 1.0) / (2.0 * x_floor) - params.gamma * x + params.beta * x * inv


def _drift_c_eps_batch(
    params: ModelParams, eps: float, x: np.ndarray, guard: _Guard
) -> np.ndarray:
    lam = x * x
    inv = _guarded_inv_sum(lam, guard)
    return (
        (params.kappa - 1.0) / 2.0 / np.maximum(x, eps)
        - params.gamma * x
        + params.beta * x * inv
    )


# ---------------------------------------------------------------------------
# Pure single-state operations (exact, raising on singular input)
# ---------------------------------------------------------------------------


def _require_strictly_increasing(lam: np.ndarray, start: int = 0) -> None:
    if np.any(np.diff(lam[start:]) <= 0.0):
        raise CoincidentCoordinates(
            f"coordinates from index {start} must be strictly increasing: {lam}"
        )


def drift_A_eps(params: ModelParams, epsilon: float, lam) -> np.ndarray:
    """Drift of the zero-boundary-regularized system.

    kappa + 1 - [0 v (2 sqrt2/sqrt eps)(sqrt(l_i) - sqrt(eps)/(2 sqrt2)) ^ 1]
    - 2 gamma l_i + 2 beta l_i sum_{j != i} 1/(l_i - l_j).

    Coincides with :func:`cir_particles.model.drift_lambda_dual` once every
    coordinate is at least eps/2 (the clamp saturates at 1).
    """
    lam = np.asarray(lam, dtype=float)
    _require_strictly_increasing(lam)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    inv = 1.0 / diff
    np.fill_diagonal(inv, 0.0)
    return (
        params.kappa
        + 1.0
        - _clamp_a(lam, epsilon)
        - 2.0 * params.gamma * lam
        + 2.0 * params.beta * lam * inv.sum(axis=1)
    )


def drift_B_eps(params: ModelParams, epsilon: float, lam) -> np.ndarray:
    """Drift of the first-gap-regularized system.

    The first coordinate keeps the bare constant drift kappa and feels the
    others only through the bounded term
    -2 beta (l_1 ^ eps)/((l_j - l_1 ^ eps) v eps); coordinates 2..n interact
    among themselves with the plain dual form.  Only indices >= 2 are
    required to be strictly ordered.
    """
    lam = np.asarray(lam, dtype=float)
    _require_strictly_increasing(lam, start=1)
    return _drift_b_batch(params, epsilon, lam[None, :], _EXACT_GUARD)[0]


def step_truncated_euler(
    params: ModelParams,
    state: EigenState,
    dt: float,
    noise: NoiseIncrement,
    collision_tol: float = 1e-3,
    kick_cap: float = 1.0,
) -> EigenState:
    """One full-truncation Euler step; clamps at zero and re-sorts."""
    guard = _Guard(params.beta, dt, collision_tol, kick_cap)
    lam = np.maximum(state.lam[None, :], 0.0)
    b = _drift_trunc_batch(params, lam, guard)
    new = lam + b * dt + 2.0 * np.sqrt(lam) * noise.dW[None, :]
    return EigenState(state.t + dt, np.sort(np.maximum(new, 0.0), axis=1)[0])


def step_switching(
    params: ModelParams,
    config: SimConfig,
    state: EigenState,
    mode: SwitchingMode,
    dt: float,
    noise: NoiseIncrement,
) -> tuple[EigenState, SwitchingMode]:
    """One Euler step of the regularized switching scheme.

    Uses drift A in mode 'A', drift B in mode 'B'; after the step the mode
    flips A -> B when lambda_1 <= eps/2 and B -> A when lambda_1 >= eps, with
    the switch logged at the post-step time.
    """
    eps = config.epsilon
    lam = np.maximum(state.lam[None, :], 0.0)
    guard = config.make_guard(params.beta)
    if mode.mode == "A":
        b = _drift_a_batch(params, eps, lam, guard)
    else:
        b = _drift_b_batch(params, eps, lam, guard)
    new = np.sort(np.maximum(lam + b * dt + 2.0 * np.sqrt(lam) * noise.dW[None, :], 0.0), axis=1)[0]
    t_next = state.t + dt
    new_mode = mode.mode
    if mode.mode == "A" and new[0] <= eps / 2.0:
        new_mode = "B"
    elif mode.mode == "B" and new[0] >= eps:
        new_mode = "A"
    switches = list(mode.switch_times)
    if new_mode != mode.mode:
        switches.append((t_next, new_mode))
    return EigenState(t_next, new), SwitchingMode(new_mode, switches)


def step_c_epsilon(
    params: ModelParams,
    config: SimConfig,
    root_state: RootState,
    dt: float,
    noise: NoiseIncrement,
) -> RootState:
    """One Euler step of the kappa < 0 root-coordinate scheme."""
    x = np.maximum(root_state.x[None, :], 0.0)
    b = _drift_c_eps_batch(params, config.epsilon, x, config.make_guard(params.beta))
    new = np.sort(np.maximum(x + b * dt + noise.dW[None, :], 0.0), axis=1)[0]
    return RootState(root_state.t + dt, new)


# ---------------------------------------------------------------------------
# Batch simulation
# ---------------------------------------------------------------------------


def _default_initial(params: ModelParams) -> np.ndarray:
    return np.arange(1.0, params.n + 1.0)


def _new_monitor(levels: Sequence[float], p: int, n: int) -> dict:
    mon = {}
    for lev in levels:
        mon[float(lev)] = {
            "gap": np.full((p, n - 1), np.nan),
            "psum": np.full((p, n), np.nan),
            "zeta": np.full(p, np.nan),
            "double": np.full(p, np.nan),
        }
    return mon


def _update_monitors(
    mon: dict, lam: np.ndarray, active: np.ndarray, t: float
) -> None:
    gaps = lam[:, 1:] - lam[:, :-1]
    psum = np.cumsum(lam, axis=1)
    for lev, m in mon.items():
        small_gap = gaps <= lev
        hit = active[:, None] & small_gap & np.isnan(m["gap"])
        m["gap"][hit] = t
        hit = active[:, None] & (psum <= lev) & np.isnan(m["psum"])
        m["psum"][hit] = t
        zeta_cond = (lam[:, 0] <= lev) & small_gap[:, 0]
        hit = active & zeta_cond & np.isnan(m["zeta"])
        m["zeta"][hit] = t
        double = small_gap.sum(axis=1) >= 2
        if lam.shape[1] > 2:
            double |= small_gap[:, 1:].any(axis=1) & zeta_cond
        hit = active & double & np.isnan(m["double"])
        m["double"][hit] = t


def _stop_condition(stop_on, lam: np.ndarray) -> np.ndarray:
    kind = stop_on[0]
    if kind == "gap_any":
        level = stop_on[1]
        return (lam[:, 1:] - lam[:, :-1] <= level).any(axis=1)
    if kind == "psum":
        _, k, level = stop_on
        return lam[:, :k].sum(axis=1) <= level
    raise ConfigError(f"unknown stop_on rule {stop_on!r}")


def simulate_batch(
    params: ModelParams,
    config: SimConfig,
    *,
    n_paths: int | None = None,
    path_offset: int = 0,
    initial=None,
    event_levels: Sequence[float] = (),
    record: bool = False,
    snapshot_times: Sequence[float] = (),
    stop_on: tuple | None = None,
    track_switches: bool = False,
    noise_refine: int = 1,
) -> BatchResult:
    """Simulate a contiguous block of paths with one vectorized kernel.

    Paths ``path_offset .. path_offset + n_paths - 1`` are advanced together;
    per-path noise is identical to what any other batch decomposition would
    produce.  ``event_levels`` enables online first-hit monitoring at each
    detection level (every step, independent of ``record_stride``);
    ``stop_on`` optionally freezes a path at its first monitored event.

    ``noise_refine = m`` makes each increment the normalized sum of m
    fine-grid increments, so a run at step size m*dt_fine shares a noise tree
    with the run at dt_fine: refinement studies then compare schemes on the
    same Brownian paths.
    """
    n = params.n
    p = config.paths if n_paths is None else n_paths
    scheme = config.scheme
    if scheme == Scheme.C_EPSILON and params.kappa >= 0.0:
        raise ConfigError("c_epsilon scheme requires kappa < 0")
    split_gen = None
    split_cir = None
    if scheme == Scheme.EXACT_CIR_SPLITTING:
        split_gen = exact_step_stream(config.seed, path_offset)
        split_cir = CirParams(a=params.alpha, b=2.0 * params.gamma, sigma=2.0)

    init = np.asarray(
        _default_initial(params) if initial is None else initial, dtype=float
    )
    if init.ndim == 1:
        init = np.tile(init, (p, 1))
    if init.shape != (p, n):
        raise ConfigError(f"initial must broadcast to ({p}, {n})")
    if np.any(init < 0) or np.any(np.diff(init, axis=1) < 0):
        raise ConfigError("initial states must be sorted and nonnegative")

    in_root = scheme in (Scheme.ROOT_COORDINATES, Scheme.C_EPSILON)
    state = np.sqrt(init) if in_root else init.copy()
    lam_view = state**2 if in_root else state

    dt = config.dt
    eps = config.epsilon
    guard = config.make_guard(params.beta)
    n_steps = config.n_steps
    sqrt_dt = math.sqrt(dt)

    active = np.ones(p, dtype=bool)
    stop_time = np.full(p, n_steps * dt)
    term = np.full(p, _T_HORIZON, dtype=np.int8)
    mode_is_b = state[:, 0] ** 2 < eps if in_root else state[:, 0] < eps
    if scheme != Scheme.REGULARIZED_SWITCHING:
        mode_is_b[:] = False
    switch_log: list[list[tuple[float, str]]] | None = None
    if track_switches:
        switch_log = [[] for _ in range(p)]

    levels = list(dict.fromkeys(float(l) for l in event_levels))
    if stop_on is not None and float(stop_on[-1]) not in levels:
        levels.append(float(stop_on[-1]))
    mon = _new_monitor(levels, p, n)
    _update_monitors(mon, lam_view, active, 0.0)
    if stop_on is not None:
        cond = _stop_condition(stop_on, lam_view)
        stopped = active & cond
        term[stopped] = _T_EVENT
        stop_time[stopped] = 0.0
        active &= ~stopped

    rec_steps = None
    times = None
    traj = None
    if record:
        rec_steps = sorted(set(range(0, n_steps + 1, config.record_stride)) | {n_steps})
        times = np.asarray(rec_steps, dtype=float) * dt
        traj = np.empty((p, len(rec_steps), n))
        traj[:, 0, :] = lam_view
        rec_pos = {s: i for i, s in enumerate(rec_steps)}

    snap_steps = {
        min(max(int(round(t / dt)), 0), n_steps): float(t) for t in snapshot_times
    }
    snapshots: dict[float, np.ndarray] = {}
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = lam_view.copy()

    for step in range(n_steps):
        if not active.any():
            if record:
                for s in rec_steps:
                    if s > step:
                        traj[:, rec_pos[s], :] = lam_view
            for s, t_probe in snap_steps.items():
                if s > step and t_probe not in snapshots:
                    snapshots[t_probe] = lam_view.copy()
            break
        if scheme != Scheme.EXACT_CIR_SPLITTING:
            if noise_refine == 1:
                z = step_normals(config.seed, step, path_offset, p, n)
            else:
                z = step_normals(config.seed, step * noise_refine, path_offset, p, n)
                for u in range(1, noise_refine):
                    z += step_normals(
                        config.seed, step * noise_refine + u, path_offset, p, n
                    )
                z /= math.sqrt(noise_refine)
            dw = sqrt_dt * z
        t_next = (step + 1) * dt

        # Non-finite states are tolerated here and recorded as failures below.
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if scheme == Scheme.TRUNCATED_EULER:
                b = _drift_trunc_batch(params, state, guard)
                new = state + b * dt + 2.0 * np.sqrt(state) * dw
            elif scheme == Scheme.REGULARIZED_SWITCHING:
                b_a = _drift_a_batch(params, eps, state, guard)
                b_b = _drift_b_batch(params, eps, state, guard)
                b = np.where(mode_is_b[:, None], b_b, b_a)
                new = state + b * dt + 2.0 * np.sqrt(state) * dw
            elif scheme == Scheme.ROOT_COORDINATES:
                b = _drift_root_batch(params, state, guard)
                new = state + b * dt + dw
            elif scheme == Scheme.C_EPSILON:
                b = _drift_c_eps_batch(params, eps, state, guard)
                new = state + b * dt + dw
            else:  # EXACT_CIR_SPLITTING
                half = 0.5 * dt
                mid = np.maximum(
                    state + half * _guarded_pair_sum(state, params.beta, guard), 0.0
                )
                mid = np.sort(mid, axis=1)
                moved = np.sort(exact_step(split_cir, mid, dt, split_gen), axis=1)
                new = moved + half * _guarded_pair_sum(moved, params.beta, guard)
            new = np.sort(np.maximum(new, 0.0), axis=1)

        bad = active & ~np.isfinite(new).all(axis=1)
        adopt = active & ~bad
        state[adopt] = new[adopt]
        if bad.any():
            term[bad] = _T_FAIL
            stop_time[bad] = t_next
            active[bad] = False

        lam_view = state**2 if in_root else state
        _update_monitors(mon, lam_view, active, t_next)

        if scheme == Scheme.REGULARIZED_SWITCHING:
            lam1 = state[:, 0]
            zeta = adopt & (lam1 <= eps) & (state[:, 1] - lam1 <= eps)
            if zeta.any():
                term[zeta] = _T_ZETA
                stop_time[zeta] = t_next
                active[zeta] = False
                adopt &= ~zeta
            to_b = adopt & ~mode_is_b & (lam1 <= eps / 2.0)
            to_a = adopt & mode_is_b & (lam1 >= eps)
            if track_switches:
                for i in np.flatnonzero(to_b):
                    switch_log[i].append((t_next, "B"))
                for i in np.flatnonzero(to_a):
                    switch_log[i].append((t_next, "A"))
            mode_is_b[to_b] = True
            mode_is_b[to_a] = False
        elif scheme == Scheme.C_EPSILON:
            s_eps = adopt & (state[:, 0] <= math.sqrt(eps))
            if s_eps.any():
                term[s_eps] = _T_S_EPS
                stop_time[s_eps] = t_next
                active[s_eps] = False

        if stop_on is not None:
            cond = _stop_condition(stop_on, lam_view)
            stopped = active & cond
            if stopped.any():
                term[stopped] = _T_EVENT
                stop_time[stopped] = t_next
                active[stopped] = False

        if record and (step + 1) in rec_pos:
            traj[:, rec_pos[step + 1], :] = lam_view
        if (step + 1) in snap_steps:
            snapshots[snap_steps[step + 1]] = lam_view.copy()

    return BatchResult(
        params=params,
        config=config,
        path_offset=path_offset,
        n_paths=p,
        final_lambda=lam_view.copy(),
        stop_time=stop_time,
        terminated_code=term,
        monitors=mon,
        times=times,
        trajectories=traj,
        snapshots=snapshots,
        switch_log=switch_log,
    )


def simulate_path(
    params: ModelParams,
    config: SimConfig,
    path_index: int,
    initial=None,
):
    """Simulate one path; returns (PathRecord, EventLog).

    Deterministic given (seed, path_index, config).  The trajectory is
    recorded every ``record_stride`` steps and truncated at the scheme's stop
    time when a stopping rule fires; event detection at ``collision_tol`` is
    delegated to the collision detector.
    """
    from .events import detect_events

    res = simulate_batch(
        params,
        config,
        n_paths=1,
        path_offset=path_index,
        initial=initial,
        record=True,
        track_switches=config.scheme == Scheme.REGULARIZED_SWITCHING,
    )
    times = res.times
    lams = res.trajectories[0]
    stop_t = float(res.stop_time[0])
    keep = times <= stop_t + 0.5 * config.dt
    record = PathRecord(
        params=params,
        config=config,
        path_index=path_index,
        times=times[keep],
        lambdas=lams[keep],
        terminated=res.terminated(0),
        stop_time=stop_t,
        switches=res.switch_log[0] if res.switch_log else [],
    )
    return record, detect_events(record, config.collision_tol)


def simulate_coupled(
    params_a: ModelParams,
    params_b: ModelParams,
    config: SimConfig,
    initial_a=None,
    initial_b=None,
    path_index: int = 0,
):
    """Two paths driven by the identical Brownian increments.

    Noise depends only on (seed, step, path, coordinate), so running two
    systems with the same config shares the noise stream exactly.
    """
    if params_a.n != params_b.n:
        raise ConfigError("coupled systems must share n")
    rec_a, _ = simulate_path(params_a, config, path_index, initial_a)
    rec_b, _ = simulate_path(params_b, config, path_index, initial_b)
    return rec_a, rec_b


def contraction_curve(
    params: ModelParams,
    config: SimConfig,
    initial_a,
    initial_b,
    probe_times: Sequence[float],
    n_paths: int | None = None,
):
    """Mean L1 gap E sum_i |lambda_i - lambda~_i| at probe times, with stderr.

    Both systems use the same parameters and shared noise; only the starting
    points differ.  Returns {probe_time: StatSummary}.
    """
    from .stats import moment_summary

    res_a = simulate_batch(
        params, config, n_paths=n_paths, initial=initial_a, snapshot_times=probe_times
    )
    res_b = simulate_batch(
        params, config, n_paths=n_paths, initial=initial_b, snapshot_times=probe_times
    )
    out = {}
    for t in probe_times:
        gap = np.abs(res_a.snapshots[t] - res_b.snapshots[t]).sum(axis=1)
        out[t] = moment_summary(gap, name=f"mean_l1_gap(t={t:g})")
    return out


def simulate_coupled_cir(
    cir_a,
    cir_b,
    r0_a: float,
    r0_b: float,
    dt: float,
    horizon: float,
    seed: int,
    n_paths: int,
    path_offset: int = 0,
) -> dict:
    """Coupled scalar CIR runs sharing one Brownian motion (n = 1 kernel).

    Full-truncation Euler for dr = (a - b r) dt + sigma sqrt(r) dW on both
    processes with the identical dW.  Tracks how often the ordering
    r_a >= r_b is violated at any step, for the pathwise-comparison check
    (larger constant drift should stay on top).
    """
    n_steps = max(int(round(horizon / dt)), 1)
    sqrt_dt = math.sqrt(dt)
    ra = np.full(n_paths, float(r0_a))
    rb = np.full(n_paths, float(r0_b))
    violations = 0
    min_margin = math.inf
    for step in range(n_steps):
        z = step_normals(seed, step, path_offset, n_paths, 1)[:, 0]
        dw = sqrt_dt * z
        ra = np.maximum(
            ra + (cir_a.a - cir_a.b * ra) * dt + cir_a.sigma * np.sqrt(ra) * dw, 0.0
        )
        rb = np.maximum(
            rb + (cir_b.a - cir_b.b * rb) * dt + cir_b.sigma * np.sqrt(rb) * dw, 0.0
        )
        margin = ra - rb
        violations += int(np.count_nonzero(margin < 0.0))
        min_margin = min(min_margin, float(margin.min()))
    return {
        "final_a": ra,
        "final_b": rb,
        "ordering_violations": violations,
        "min_margin": min_margin,
        "n_steps": n_steps,
    }

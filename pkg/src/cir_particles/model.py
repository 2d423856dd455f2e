"""Model parameters, states, drifts, potential, and the regime classifier.

The particle system lives on the ordered cone 0 <= lambda_1 <= ... <= lambda_n.
Each coordinate diffuses like a CIR process (diffusion 2*sqrt(lambda_i)) with
drift

    b_i(lambda) = alpha - 2*gamma*lambda_i
                  + beta * sum_{j != i} (lambda_i + lambda_j)/(lambda_i - lambda_j),

equivalently, with kappa = alpha - (n-1)*beta,

    b_i(lambda) = kappa - 2*gamma*lambda_i
                  + 2*beta*lambda_i * sum_{j != i} 1/(lambda_i - lambda_j).

In root coordinates x_i = sqrt(lambda_i) the system is the gradient diffusion
dx_i = dB_i - dV/dx_i dt for the log-potential implemented by
:func:`potential_value`.

Everything here is a pure function of its inputs.  Operations that would be
singular (coincident coordinates, zero root coordinate) raise instead of
returning infinities; regularization policy belongs to the integrators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BadK, CoincidentCoordinates, DomainError, ZeroCoordinate

__all__ = [
    "CollisionVerdict",
    "EigenState",
    "GlobalSolution",
    "ModelParams",
    "PairCollisions",
    "RegimeReport",
    "RootState",
    "ZeroHitLambda1",
    "classify_regime",
    "drift_lambda",
    "drift_lambda_dual",
    "drift_root",
    "grad_potential",
    "multiple_collision_threshold",
    "potential_value",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameter tuple (alpha, beta, gamma, n) of the particle system.

    kappa = alpha - (n-1)*beta is recomputed on access, never stored, so it
    can not go stale under parameter sweeps.
    """

    alpha: float
    beta: float
    gamma: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def kappa(self) -> float:
        return self.alpha - (self.n - 1) * self.beta


def _as_vector(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class EigenState:
    """Ordered nonnegative coordinate vector at a time point."""

    t: float
    lam: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.lam, dtype=float)
        object.__setattr__(self, "lam", arr)
        if self.t < 0:
            raise ValueError(f"time must be >= 0, got {self.t}")
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("state needs at least two coordinates")
        if np.any(arr < 0):
            raise ValueError("coordinates must be nonnegative")
        if np.any(np.diff(arr) < 0):
            raise ValueError("coordinates must be nondecreasing")

    @property
    def n(self) -> int:
        return self.lam.size


@dataclass(frozen=True)
class RootState:
    """Square-root coordinates x_i = sqrt(lambda_i), same ordering contract."""

    t: float
    x: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", arr)
        if self.t < 0:
            raise ValueError(f"time must be >= 0, got {self.t}")
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("state needs at least two coordinates")
        if np.any(arr < 0):
            raise ValueError("coordinates must be nonnegative")
        if np.any(np.diff(arr) < 0):
            raise ValueError("coordinates must be nondecreasing")

    @property
    def n(self) -> int:
        return self.x.size

    def to_eigen(self) -> EigenState:
        return EigenState(self.t, self.x**2)


class GlobalSolution(Enum):
    NONE = "none"
    UNTIL_JOINT_EVENT = "until_joint_event"
    GLOBAL = "global"


class PairCollisions(Enum):
    IMPOSSIBLE = "impossible"
    ALMOST_SURE = "almost_sure"


class ZeroHitLambda1(Enum):
    NEVER = "never"
    POSSIBLE = "possible"


class CollisionVerdict(Enum):
    ALMOST_SURE_ZERO_HIT = "almost_sure_zero_hit"
    NEVER = "never"
    PROB_IN_0_1 = "prob_in_0_1"


@dataclass(frozen=True)
class RegimeReport:
    """Analytic classification of a parameter point.

    ``multiple_collision_k`` maps k in 1..n to the verdict for the partial sum
    lambda_1 + ... + lambda_k hitting zero, decided by comparing
    k*(alpha - (n-k)*beta) to 2 with a gamma-sign disambiguation below the
    threshold.
    """

    kappa: float
    global_solution: GlobalSolution
    pair_collisions: PairCollisions
    zero_hit_lambda1: ZeroHitLambda1
    multiple_collision_k: dict[int, CollisionVerdict] = field(repr=False)


def _require_distinct(lam: np.ndarray) -> None:
    # Exact float equality is the coincidence notion in the pure layer.
    if np.unique(lam).size != lam.size:
        raise CoincidentCoordinates(f"coincident coordinates in {lam}")


def drift_lambda(params: ModelParams, lam) -> np.ndarray:
    """Primal drift b_i = alpha - 2*gamma*lambda_i + beta*sum (li+lj)/(li-lj).

    The interaction is exactly antisymmetric in (i, j), so the output summed
    over i equals n*alpha - 2*gamma*sum(lambda) up to rounding.
    """
    lam = _as_vector(lam, params.n, "lambda")
    _require_distinct(lam)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    ratio = (lam[:, None] + lam[None, :]) / diff
    np.fill_diagonal(ratio, 0.0)
    return params.alpha - 2.0 * params.gamma * lam + params.beta * ratio.sum(axis=1)


def drift_lambda_dual(params: ModelParams, lam) -> np.ndarray:
    """Equivalent drift kappa - 2*gamma*lambda_i + 2*beta*lambda_i*sum 1/(li-lj)."""
    lam = _as_vector(lam, params.n, "lambda")
    _require_distinct(lam)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    inv = 1.0 / diff
    np.fill_diagonal(inv, 0.0)
    return (
        params.kappa
        - 2.0 * params.gamma * lam
        + 2.0 * params.beta * lam * inv.sum(axis=1)
    )


def drift_root(params: ModelParams, x) -> np.ndarray:
    """Drift of the root-coordinate system.

    (alpha-1)/(2 x_i) - gamma*x_i
        + beta/(2 x_i) * sum_{j != i} (x_i^2 + x_j^2)/(x_i^2 - x_j^2).
    """
    x = _as_vector(x, params.n, "x")
    if np.any(x == 0.0):
        raise ZeroCoordinate("root coordinates must be nonzero")
    lam = x**2
    _require_distinct(lam)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    ratio = (lam[:, None] + lam[None, :]) / diff
    np.fill_diagonal(ratio, 0.0)
    return (
        (params.alpha - 1.0) / (2.0 * x)
        - params.gamma * x
        + params.beta / (2.0 * x) * ratio.sum(axis=1)
    )


def _require_root_cone(x: np.ndarray) -> None:
    if np.any(x <= 0.0) or np.any(np.diff(x) <= 0.0):
        raise DomainError(f"x must satisfy 0 < x1 < ... < xn, got {x}")


def potential_value(params: ModelParams, x) -> float:
    """Log-potential V of the gradient form dx_i = dB_i - dV/dx_i dt.

    V(x) = -sum_i [ (kappa-1)/2 * ln x_i - gamma/2 * x_i^2 ]
           - beta/2 * sum_{i<j} [ ln(x_j - x_i) + ln(x_j + x_i) ].
    """
    x = _as_vector(x, params.n, "x")
    _require_root_cone(x)
    single = (params.kappa - 1.0) / 2.0 * np.log(x) - params.gamma / 2.0 * x**2
    i, j = np.triu_indices(params.n, k=1)
    pair = np.log(x[j] - x[i]) + np.log(x[j] + x[i])
    return float(-(single.sum() + params.beta / 2.0 * pair.sum()))


def grad_potential(params: ModelParams, x) -> np.ndarray:
    """Gradient of :func:`potential_value`; equals -drift_root entrywise.

    Computed from the dual form
    dV/dx_i = -[(kappa-1)/(2 x_i) - gamma*x_i + beta*x_i*sum 1/(x_i^2-x_j^2)],
    which is an independent expression from the primal form in
    :func:`drift_root`; agreement of the two is a checked identity.
    """
    x = _as_vector(x, params.n, "x")
    _require_root_cone(x)
    lam = x**2
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    inv = 1.0 / diff
    np.fill_diagonal(inv, 0.0)
    return -(
        (params.kappa - 1.0) / (2.0 * x)
        - params.gamma * x
        + params.beta * x * inv.sum(axis=1)
    )


def multiple_collision_threshold(
    params: ModelParams, k: int
) -> tuple[float, CollisionVerdict]:
    """Threshold k*(alpha - (n-k)*beta) and the zero-hit verdict for sum_{i<=k}.

    >= 2 means the partial sum never reaches zero; below 2 the hit is almost
    sure for gamma >= 0 and has probability strictly inside (0, 1) for
    gamma < 0.
    """
    if not 1 <= k <= params.n:
        raise BadK(f"k must be in 1..{params.n}, got {k}")
    value = k * (params.alpha - (params.n - k) * params.beta)
    if value >= 2.0:
        verdict = CollisionVerdict.NEVER
    elif params.gamma >= 0.0:
        verdict = CollisionVerdict.ALMOST_SURE_ZERO_HIT
    else:
        verdict = CollisionVerdict.PROB_IN_0_1
    return value, verdict


def classify_regime(params: ModelParams) -> RegimeReport:
    """Deterministic phase-diagram classification of a parameter point.

    kappa < 0: no global solution (stop when lambda_1 reaches zero);
    0 <= kappa < 1-beta: solution up to the joint event lambda_1 and the
    first gap both small, which happens in finite time; kappa >= 1-beta:
    global solution.  Pair collisions occur almost surely iff beta < 1, and
    lambda_1 never touches zero iff kappa >= 2.
    """
    kappa = params.kappa
    if kappa < 0.0:
        global_solution = GlobalSolution.NONE
    elif kappa >= 1.0 - params.beta:
        global_solution = GlobalSolution.GLOBAL
    else:
        global_solution = GlobalSolution.UNTIL_JOINT_EVENT
    pair = (
        PairCollisions.IMPOSSIBLE if params.beta >= 1.0 else PairCollisions.ALMOST_SURE
    )
    zero_hit = ZeroHitLambda1.NEVER if kappa >= 2.0 else ZeroHitLambda1.POSSIBLE
    verdicts = {
        k: multiple_collision_threshold(params, k)[1] for k in range(1, params.n + 1)
    }
    return RegimeReport(
        kappa=kappa,
        global_solution=global_solution,
        pair_collisions=pair,
        zero_hit_lambda1=zero_hit,
        multiple_collision_k=verdicts,
    )

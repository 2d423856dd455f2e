"""Collision and first-passage machinery.

Event times are grid times: an event is reported at the first recorded step
where its defining inequality holds at level delta.  "Simultaneous" means
same recorded step, the only decidable notion on a grid; the delta-ladder and
dt-refinement quantify the induced bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import BadK
from .model import ModelParams
from .stats import StatSummary, binomial_summary

if TYPE_CHECKING:  # pragma: no cover
    from .integrators import PathRecord, SimConfig

__all__ = [
    "Event",
    "EventKind",
    "EventLog",
    "TimeChange",
    "bessel_collision_dimension",
    "detect_events",
    "first_passage_partial_sum",
    "integrability_diagnostic",
    "time_change_A",
]


class EventKind(str, Enum):
    PAIR_COLLISION = "pair_collision"
    ZERO_HIT_PARTIAL_SUM = "zero_hit_partial_sum"
    JOINT_EVENT_ZETA = "joint_event_zeta"
    STOP_S = "stop_S"


@dataclass(frozen=True)
class Event:
    """One detected event: time, kind, 1-based index (pair i or sum k), level."""

    time: float
    kind: EventKind
    index: int | None
    level: float


@dataclass
class EventLog:
    """Detected events plus flagged same-step double observations.

    ``multiple_collisions`` lists (time, i, j) for recorded steps where two
    distinct adjacent gaps were both at or below the detection level; the
    boundary case (a pair event at i >= 2 while lambda_1 and the first gap
    are both small) is included with i = 0.
    """

    events: list[Event] = field(default_factory=list)
    multiple_collisions: list[tuple[float, int, int]] = field(default_factory=list)

    def first(self, kind: EventKind, index: int | None = None) -> Event | None:
        for ev in self.events:
            if ev.kind == kind and (index is None or ev.index == index):
                return ev
        return None


def detect_events(path: "PathRecord", delta: float) -> EventLog:
    """Scan a recorded trajectory for first crossings at level delta.

    Logs, per adjacent pair i, the first time lambda_{i+1} - lambda_i <=
    delta; per k, the first time lambda_1 + ... + lambda_k <= delta; the
    first joint time (lambda_1 <= delta and lambda_2 - lambda_1 <= delta);
    and the scheme stop event if the path terminated at S_eps or zeta_eps.
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    times = np.asarray(path.times, dtype=float)
    lam = np.asarray(path.lambdas, dtype=float)
    n = lam.shape[1]
    log = EventLog()

    gaps = lam[:, 1:] - lam[:, :-1]
    psums = np.cumsum(lam, axis=1)
    for i in range(n - 1):
        hits = np.flatnonzero(gaps[:, i] <= delta)
        if hits.size:
            log.events.append(
                Event(float(times[hits[0]]), EventKind.PAIR_COLLISION, i + 1, delta)
            )
    for k in range(n):
        hits = np.flatnonzero(psums[:, k] <= delta)
        if hits.size:
            log.events.append(
                Event(
                    float(times[hits[0]]),
                    EventKind.ZERO_HIT_PARTIAL_SUM,
                    k + 1,
                    delta,
                )
            )
    joint = (lam[:, 0] <= delta) & (gaps[:, 0] <= delta)
    hits = np.flatnonzero(joint)
    if hits.size:
        log.events.append(
            Event(float(times[hits[0]]), EventKind.JOINT_EVENT_ZETA, None, delta)
        )

    small = gaps <= delta
    for step in np.flatnonzero(small.sum(axis=1) >= 2):
        idx = np.flatnonzero(small[step]) + 1
        for a in range(idx.size):
            for b in range(a + 1, idx.size):
                log.multiple_collisions.append(
                    (float(times[step]), int(idx[a]), int(idx[b]))
                )
    if n > 2:
        boundary = joint & small[:, 1:].any(axis=1)
        for step in np.flatnonzero(boundary):
            for j in np.flatnonzero(small[step, 1:]) + 2:
                log.multiple_collisions.append((float(times[step]), 0, int(j)))

    from .integrators import Terminated

    if path.terminated == Terminated.STOPPED_AT_S_EPS:
        log.events.append(
            Event(path.stop_time, EventKind.STOP_S, None, path.config.epsilon)
        )
    elif path.terminated == Terminated.STOPPED_AT_ZETA_EPS:
        log.events.append(
            Event(
                path.stop_time, EventKind.JOINT_EVENT_ZETA, None, path.config.epsilon
            )
        )

    log.events.sort(key=lambda e: e.time)
    return log


def first_passage_partial_sum(
    params: ModelParams,
    config: "SimConfig",
    k: int,
    levels: tuple[float, ...] = (1e-2, 1e-3, 1e-4),
    n_paths: int | None = None,
) -> dict[float, StatSummary]:
    """Monte Carlo probability that lambda_1 + ... + lambda_k drops to delta.

    Runs the configured scheme over ``paths`` trajectories, monitoring the
    partial sum online at every level of the delta ladder, and returns the
    hit fraction by the horizon with a binomial 95% interval per level.
    """
    from .integrators import simulate_batch

    if not 1 <= k <= params.n:
        raise BadK(f"k must be in 1..{params.n}, got {k}")
    res = simulate_batch(
        params,
        config,
        n_paths=n_paths,
        event_levels=levels,
        stop_on=("psum", k, min(levels)),
    )
    out = {}
    for lev in levels:
        hits = int(np.count_nonzero(~np.isnan(res.monitors[float(lev)]["psum"][:, k - 1])))
        out[float(lev)] = binomial_summary(
            hits, res.n_paths, name=f"psum{k}_hit(delta={lev:g})"
        )
    return out


@dataclass(frozen=True)
class TimeChange:
    """Cumulative clock A_t = 4 * integral_0^t (lambda_i + lambda_{i-1}) ds."""

    i: int
    grid: np.ndarray  # (T, 2) columns (t, A_t)

    @property
    def values(self) -> np.ndarray:
        return self.grid[:, 1]


def time_change_A(path: "PathRecord", i: int) -> TimeChange:
    """Trapezoidal cumulative time change for the neighbour pair (i-1, i).

    ``i`` is 1-based and must be >= 2; A is nondecreasing with A(0) = 0.
    """
    lam = np.asarray(path.lambdas, dtype=float)
    n = lam.shape[1]
    if not 2 <= i <= n:
        raise BadK(f"i must be in 2..{n}, got {i}")
    times = np.asarray(path.times, dtype=float)
    integrand = 4.0 * (lam[:, i - 1] + lam[:, i - 2])
    steps = np.diff(times)
    increments = 0.5 * (integrand[1:] + integrand[:-1]) * steps
    a = np.concatenate([[0.0], np.cumsum(increments)])
    return TimeChange(i, np.column_stack([times, a]))


def bessel_collision_dimension(beta: float) -> tuple[float, bool]:
    """Bessel dimension of the neighbour-gap comparison process.

    The gap, run in its natural clock, is dominated by a Bessel process with
    drift beta/(2 r), i.e. dimension beta + 1; it reaches zero in finite time
    for beta <= 1 (dimension <= 2, boundary included).
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return beta + 1.0, beta <= 1.0


def integrability_diagnostic(path: "PathRecord") -> np.ndarray:
    """Cumulative integrals of lambda_{i+1}/(lambda_{i+1} - lambda_i).

    One value per adjacent pair, trapezoidal on the recorded grid with the
    static denominator floor max(collision_tol^2, dt).  Finite, dt-stable
    values diagnose an integrable interaction; growth under refinement near a
    collision time flags the singular set.
    """
    lam = np.asarray(path.lambdas, dtype=float)
    times = np.asarray(path.times, dtype=float)
    g = path.config.guard
    gaps = np.maximum(lam[:, 1:] - lam[:, :-1], g)
    integrand = lam[:, 1:] / gaps
    steps = np.diff(times)[:, None]
    return (0.5 * (integrand[1:] + integrand[:-1]) * steps).sum(axis=0)

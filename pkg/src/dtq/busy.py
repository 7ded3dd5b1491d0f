"""Busy periods, busy cycles, and their closed-form mean identities.

Cycle boundaries are read off the number-in-system path: a cycle starts
at the first slot index showing a nonempty system after an empty one,
and the system clears at the first empty index after a busy run.  Only
complete cycles (those with a following start) enter the averages.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .engine import DiscreteDist, Trace

__all__ = [
    "CycleStats",
    "StateRates",
    "cycles_from_path",
    "detect_cycles",
    "state_rates",
    "cycle_means_from_rates",
    "sigma_solve",
    "ggeo1_busy",
    "finite_pop_busy",
    "CycleMeans",
    "cycles_to_csv_rows",
]


class CycleMeans(NamedTuple):
    idle: float
    cycle: float
    busy: float
    customers: float


@dataclass(frozen=True)
class CycleStats:
    """Per-cycle quantities: start U, clear V, lengths C/B/I, customers E."""

    U: np.ndarray
    V: np.ndarray
    C: np.ndarray
    B: np.ndarray
    I: np.ndarray
    E: np.ndarray | None

    @property
    def n_cycles(self) -> int:
        return len(self.C)

    @property
    def mean_idle(self) -> float:
        return float(self.I.mean())

    @property
    def mean_cycle(self) -> float:
        return float(self.C.mean())

    @property
    def mean_busy(self) -> float:
        return float(self.B.mean())

    @property
    def mean_customers(self) -> float:
        if self.E is None:
            raise ValueError("customer counts not available for path-only cycles")
        return float(self.E.mean())

    def means(self) -> CycleMeans:
        return CycleMeans(self.mean_idle, self.mean_cycle, self.mean_busy, self.mean_customers)


def cycles_from_path(path: np.ndarray, arrivals: np.ndarray | None = None) -> CycleStats:
    """Detect complete cycles on a number-in-system path.

    ``path[j]`` is the state at slot index j (entry 0 must be 0, i.e.
    the system starts empty).  When the arrival slots are supplied, E_k
    counts arrivals in (U_k, U_{k+1}].
    """
    path = np.asarray(path)
    if len(path) == 0 or path[0] != 0:
        raise ValueError("path must start with an empty system")
    occ = path >= 1
    flips = np.flatnonzero(occ[1:] != occ[:-1]) + 1
    starts = flips[~occ[flips - 1]]  # empty -> busy
    clears = flips[occ[flips - 1]]   # busy -> empty
    m = len(starts) - 1
    if m < 1:
        empty = np.empty(0, dtype=np.int64)
        return CycleStats(empty, empty, empty, empty, empty, empty if arrivals is not None else None)
    U = starts[: m + 1].astype(np.int64)
    V = clears[:m].astype(np.int64)
    C = U[1:] - U[:-1]
    B = V - U[:-1]
    I = U[1:] - V
    E = None
    if arrivals is not None:
        counts = np.searchsorted(arrivals, U, side="right")
        E = (counts[1:] - counts[:-1]).astype(np.int64)
    return CycleStats(U[:-1], V, C, B, I, E)


def detect_cycles(trace: Trace) -> CycleStats:
    """Cycle statistics on the actual path of a trace."""
    if trace.n and trace.arrivals[0] < 1:
        raise ValueError("cycle detection needs the system empty at slot 0")
    return cycles_from_path(trace.queue_path(), trace.arrivals)


@dataclass(frozen=True)
class StateRates:
    """Occupancy fractions and state-conditional arrival rates.

    ``pi[n]`` is the fraction of slots spent in state n, ``alpha_n[n]``
    the arrivals-finding-state-n per slot-in-state-n rate (states never
    visited are absent), and ``pi_arrival[n]`` the fraction of arrivals
    that found state n.
    """

    pi: np.ndarray
    alpha_n: dict[int, float]
    pi_arrival: np.ndarray
    arrival_rate: float


def state_rates(trace: Trace) -> StateRates:
    path = trace.queue_path()
    states = path[1:]  # slots 1..T
    T = len(states)
    pi = np.bincount(states) / T
    found = path[trace.arrivals[trace.arrivals <= trace.horizon]]
    width = max(len(pi), (found.max() + 1) if len(found) else 1)
    arr_counts = np.bincount(found, minlength=width)
    occ_slots = np.bincount(states, minlength=width)
    alpha_n = {
        int(n): float(arr_counts[n] / occ_slots[n])
        for n in range(width)
        if occ_slots[n] > 0
    }
    pi_arr = arr_counts / max(len(found), 1)
    return StateRates(pi, alpha_n, pi_arr, len(found) / T)


def cycle_means_from_rates(pi0: float, alpha0: float, alpha: float) -> CycleMeans:
    """Mean idle/cycle/busy lengths and customers per cycle from the
    empty-state occupancy pi0, the empty-state arrival rate alpha0, and
    the overall arrival rate alpha."""
    if not 0.0 < pi0 < 1.0:
        raise ValueError(f"pi0 must be in (0, 1), got {pi0}")
    if alpha0 <= 0.0:
        raise ValueError(f"alpha0 must be positive, got {alpha0}")
    idle = 1.0 / alpha0
    cycle = 1.0 / (alpha0 * pi0)
    busy = (1.0 - pi0) / (alpha0 * pi0)
    customers = alpha / (alpha0 * pi0)
    return CycleMeans(idle, cycle, busy, customers)


def sigma_solve(interarrival: DiscreteDist, beta: float, tol: float = 1e-12) -> tuple[float, float]:
    """Root sigma in (0, 1) of sigma = F(sigma*beta + 1 - beta) where F is
    the inter-arrival pgf, plus sigma* = sigma / (sigma*beta + 1 - beta).

    Bisection; a missing sign change means the queue is unstable or the
    input degenerate.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")

    def g(s: float) -> float:
        return interarrival.pgf(s * beta + 1.0 - beta) - s

    lo, hi = 0.0, 1.0 - 1e-9
    if g(lo) <= 0.0 or g(hi) >= 0.0:
        raise ValueError("no interior fixed point; check stability (alpha < beta)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    sigma_star = sigma / (sigma * beta + 1.0 - beta)
    return sigma, sigma_star


def ggeo1_busy(alpha: float, sigma_star: float, rho: float) -> CycleMeans:
    """Cycle means for renewal input and geometric services from the
    pre-arrival empty probability 1 - sigma*."""
    if not 0.0 < sigma_star < 1.0:
        raise ValueError(f"sigma_star must be in (0, 1), got {sigma_star}")
    denom = alpha * (1.0 - sigma_star)
    return CycleMeans(
        idle=(1.0 - rho) / denom,
        cycle=1.0 / denom,
        busy=rho / denom,
        customers=1.0 / (1.0 - sigma_star),
    )


def finite_pop_busy(n_sources: int, alpha: float, pi0: float, mean_l: float) -> CycleMeans:
    """Cycle means for the finite-population single-server model."""
    if n_sources < 1:
        raise ValueError("need at least one source")
    if not 0.0 < pi0 < 1.0:
        raise ValueError(f"pi0 must be in (0, 1), got {pi0}")
    n_alpha = n_sources * alpha
    if n_alpha <= 0.0:
        raise ValueError("arrival rate must be positive")
    return CycleMeans(
        idle=1.0 / n_alpha,
        cycle=1.0 / (n_alpha * pi0),
        busy=(1.0 - pi0) / (n_alpha * pi0),
        customers=(n_sources - mean_l) / (n_sources * pi0),
    )


def cycles_to_csv_rows(stats: CycleStats) -> list[list[int]]:
    """Rows k,U,V,C,B,I,E for the per-cycle export."""
    rows = []
    for k in range(stats.n_cycles):
        e = int(stats.E[k]) if stats.E is not None else ""
        rows.append(
            [k + 1, int(stats.U[k]), int(stats.V[k]), int(stats.C[k]),
             int(stats.B[k]), int(stats.I[k]), e]
        )
    return rows

"""Interference-limited power floors and the optimal power pair of one
shared subchannel.

For a D2D transmitter i reusing the subchannel of cellular user j the
cellular constraints depend on the powers only through eta = p_i / p_j:
R^c(k2 eta) >= R_min and eps_bar(k2 eta) <= p_eps, both monotone in eta.
The D2D rate R^d(k1 / eta) increases with eta, so the best ratio is the
largest admissible one, and the cheapest point on that ray inside the
power box is the answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .channel import FadingSpec
from .metrics import PiecewiseApprox, avg_decoding_error, capacity_cellular
from .numerics import RootBracket, solve_monotone
from .outage import OutagePair

LOG_BRACKET = (math.log(1e-12), math.log(1e12))
ZETA_XTOL = 1e-10


@dataclass(frozen=True)
class PowerBounds:
    p_floor: float
    p_cap: float

    def __post_init__(self):
        if not self.p_floor > 0:
            raise ValueError(f"power floor must be positive, got {self.p_floor}")
        if not self.p_cap > 0:
            raise ValueError(f"power cap must be positive, got {self.p_cap}")

    @property
    def nonempty(self) -> bool:
        return self.p_floor <= self.p_cap


@dataclass(frozen=True)
class CellularContext:
    """Fading seen by the cellular receiver: Nakagami(m_cell) desired link
    and the interferer's LoS/NLoS fading."""

    interferer: FadingSpec
    m_cell: int


@dataclass(frozen=True)
class QosTargets:
    rate_min: float
    p_eps: float
    approx: PiecewiseApprox

    def __post_init__(self):
        if not self.rate_min > 0:
            raise ValueError("minimum cellular rate must be positive")
        if not 0.0 < self.p_eps < 0.5:
            raise ValueError("p_eps must lie in (0, 0.5)")


@dataclass(frozen=True)
class PairProblem:
    """One (transmitter i, cellular user j) subchannel-sharing problem.

    k1 = E[h_hat_{i,j}] / E[h_i] (cellular interference at i's receiver),
    k2 = E[h_hat_{j,i}] / E[h_j] (i's interference at the BS).
    """

    k1: float
    k2: float
    cell: CellularContext
    d2d: OutagePair
    bounds_i: PowerBounds
    bounds_j: PowerBounds
    qos: QosTargets

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")


@dataclass(frozen=True)
class PowerPair:
    feasible: bool
    p_i: float = math.nan
    p_j: float = math.nan
    eta_star: float = math.nan
    binding: str = ""

    @classmethod
    def infeasible(cls, eta_star: float = math.nan, binding: str = "") -> "PowerPair":
        return cls(False, math.nan, math.nan, eta_star, binding)


def interference_floor(interference_plus_noise: float, mean_cross_gain: float,
                       k_tilde: float) -> float:
    """Smallest interferer power keeping the link interference limited."""
    for v in (interference_plus_noise, mean_cross_gain, k_tilde):
        if not v > 0 or math.isinf(v):
            raise ValueError("floor inputs must be positive and finite")
    return interference_plus_noise * k_tilde / mean_cross_gain


@lru_cache(maxsize=512)
def zeta_rate_threshold(cell: CellularContext, rate_min: float) -> float:
    """Largest zeta with R^c(zeta) >= rate_min (0 if none, inf if always)."""
    f = lambda s: capacity_cellular(math.exp(s), cell.interferer, cell.m_cell)
    lo, hi = LOG_BRACKET
    if f(lo) < rate_min:
        # capacity grows like log2(1/zeta); push further before giving up
        lo = math.log(1e-200)
        if f(lo) < rate_min:
            return 0.0
    s = solve_monotone(f, RootBracket(lo, hi, rate_min, increasing=False),
                       xtol=ZETA_XTOL, expand=True, max_doublings=6)
    return math.exp(s)


@lru_cache(maxsize=512)
def zeta_reliability_threshold(cell: CellularContext, p_eps: float,
                               approx: PiecewiseApprox) -> float:
    """Largest zeta with eps_bar(zeta) <= p_eps."""
    f = lambda s: avg_decoding_error(math.exp(s), cell.interferer, cell.m_cell, approx)
    lo, hi = LOG_BRACKET
    s = solve_monotone(f, RootBracket(lo, hi, p_eps, increasing=True),
                       xtol=ZETA_XTOL, expand=True, max_doublings=6)
    return math.exp(s)


def eta_star(problem: PairProblem) -> tuple[float, str]:
    """Largest admissible eta and the constraint that sets it.

    Ties resolve in the order rate, reliability, cap.
    """
    q = problem.qos
    z1 = zeta_rate_threshold(problem.cell, q.rate_min)
    z2 = zeta_reliability_threshold(problem.cell, q.p_eps, q.approx)
    candidates = [
        (z1 / problem.k2, "rate"),
        (z2 / problem.k2, "reliability"),
        (problem.bounds_i.p_cap / problem.bounds_j.p_floor, "cap"),
    ]
    best = min(c[0] for c in candidates)
    tag = next(t for v, t in candidates if v == best)
    return best, tag


def optimal_power_pair(problem: PairProblem) -> PowerPair:
    bi, bj = problem.bounds_i, problem.bounds_j
    if not (bi.nonempty and bj.nonempty):
        return PowerPair.infeasible(binding="box")
    eta, tag = eta_star(problem)
    if eta <= 0:
        return PowerPair.infeasible(eta, tag)
    if bi.p_floor / bj.p_floor <= eta:
        return PowerPair(True, eta * bj.p_floor, bj.p_floor, eta, tag)
    if bi.p_floor / bj.p_cap <= eta:
        return PowerPair(True, bi.p_floor, bi.p_floor / eta, eta, tag)
    return PowerPair.infeasible(eta, tag)


def implied_zetas(problem: PairProblem, pp: PowerPair) -> tuple[float, float]:
    """(zeta at i's receiver, zeta at the cellular receiver) for a solution."""
    return problem.k1 * pp.p_j / pp.p_i, problem.k2 * pp.p_i / pp.p_j


def check_solution(problem: PairProblem, pp: PowerPair, tol: float = 1e-6) -> list[str]:
    """Post-hoc constraint check; returns the violated constraint names."""
    if not pp.feasible:
        return []
    bad = []
    bi, bj = problem.bounds_i, problem.bounds_j
    if not bi.p_floor * (1 - tol) <= pp.p_i <= bi.p_cap * (1 + tol):
        bad.append("box_i")
    if not bj.p_floor * (1 - tol) <= pp.p_j <= bj.p_cap * (1 + tol):
        bad.append("box_j")
    _, zc = implied_zetas(problem, pp)
    cell = problem.cell
    if capacity_cellular(zc, cell.interferer, cell.m_cell) < problem.qos.rate_min - tol:
        bad.append("rate")
    eps = avg_decoding_error(zc, cell.interferer, cell.m_cell, problem.qos.approx)
    if eps > problem.qos.p_eps * (1 + tol):
        bad.append("reliability")
    return bad

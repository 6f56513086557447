"""Independent reference implementations shared by the test modules."""

import math
from dataclasses import dataclass

import numpy as np

from uavd2d.channel import FadingSpec
from uavd2d.metrics import avg_decoding_error, build_piecewise, capacity_cellular, capacity_d2d_direct
from uavd2d.outage import OutagePair
from uavd2d.power import CellularContext, PairProblem, PowerBounds, QosTargets

K12 = 10 ** 1.2
APPROX = build_piecewise(4)


def random_pair_problem(rng: np.random.Generator) -> PairProblem:
    """A PairProblem with parameters spread so every power-pair case shows
    up: p_j at its floor, p_i at its floor, and infeasible."""
    def fading():
        return FadingSpec.los(K12) if rng.random() < 0.5 else FadingSpec.nlos(2)

    cap_i, cap_j = 0.1, 0.1
    return PairProblem(
        k1=10 ** rng.uniform(-3, 1),
        k2=10 ** rng.uniform(-4, 0),
        cell=CellularContext(fading(), 2),
        d2d=OutagePair(fading(), fading()),
        bounds_i=PowerBounds(10 ** rng.uniform(-5, -0.7), cap_i),
        bounds_j=PowerBounds(10 ** rng.uniform(-5, -0.7), cap_j),
        qos=QosTargets(float(rng.choice([4.0, 8.0])), float(rng.choice([1e-5, 1e-4, 1e-3])), APPROX))


def cellular_ok(problem: PairProblem, eta: float) -> bool:
    z = problem.k2 * eta
    c = problem.cell
    return (capacity_cellular(z, c.interferer, c.m_cell) >= problem.qos.rate_min
            and avg_decoding_error(z, c.interferer, c.m_cell, problem.qos.approx) <= problem.qos.p_eps)


@dataclass(frozen=True)
class GridResult:
    feasible: bool
    p_i: float = math.nan
    p_j: float = math.nan
    rate: float = math.nan
    cell_ratio: float = math.nan   # multiplicative width of one grid cell in eta
    # cheapest p_i + p_j among grid points whose eta lies within one cell
    # below the best grid eta, i.e. whose rate ties the best at grid resolution
    min_power: float = math.nan


def grid_search(problem: PairProblem, size: int = 400) -> GridResult:
    """Lexicographic (max rate, then min power) optimum over a size x size log grid of the box.

    Cellular feasibility is monotone in eta = p_i / p_j, so the largest
    feasible grid eta is found by bisection over the sorted unique grid
    ratios, each probe calling the capacity and error functions directly.
    Among grid points at that ratio the cheapest total power wins.

    With ~size^2 distinct ratios a strict lexicographic order leaves one
    point per ratio, so ``min_power`` also reports the cheapest point whose
    ratio ties the best within one grid cell.
    """
    bi, bj = problem.bounds_i, problem.bounds_j
    if bi.p_floor > bi.p_cap or bj.p_floor > bj.p_cap:
        return GridResult(False)
    pi = np.geomspace(bi.p_floor, bi.p_cap, size)
    pj = np.geomspace(bj.p_floor, bj.p_cap, size)
    eta = np.unique(np.divide.outer(pi, pj))
    lo, hi = -1, eta.size          # eta[lo] feasible, eta[hi] infeasible
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cellular_ok(problem, float(eta[mid])):
            lo = mid
        else:
            hi = mid
    ratio = (bi.p_cap / bi.p_floor) ** (1 / (size - 1)) * (bj.p_cap / bj.p_floor) ** (1 / (size - 1))
    if lo < 0:
        return GridResult(False, cell_ratio=ratio)
    best_eta = float(eta[lo])
    ii, jj = np.nonzero(np.isclose(np.divide.outer(pi, pj), best_eta, rtol=1e-13, atol=0))
    k = int(np.argmin(pi[ii] + pj[jj]))
    p_i, p_j = float(pi[ii[k]]), float(pj[jj[k]])
    rate = capacity_d2d_direct(problem.k1 * p_j / p_i, problem.d2d)
    grid_eta = np.divide.outer(pi, pj)
    tied = (grid_eta <= best_eta) & (grid_eta >= best_eta / ratio)
    min_power = float(np.add.outer(pi, pj)[tied].min())
    return GridResult(True, p_i, p_j, rate, ratio, min_power)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import APPROX, K12, grid_search, random_pair_problem
from uavd2d.channel import FadingSpec
from uavd2d.metrics import capacity_d2d_direct
from uavd2d.outage import OutagePair
from uavd2d.power import (CellularContext, PairProblem, PowerBounds, QosTargets, check_solution,
                          eta_star, implied_zetas, interference_floor, optimal_power_pair,
                          zeta_rate_threshold, zeta_reliability_threshold)

CELL = CellularContext(FadingSpec.nlos(2), 2)
D2D = OutagePair(FadingSpec.los(K12), FadingSpec.nlos(2))
QOS = QosTargets(8.0, 1e-4, APPROX)


def problem(k2=1e-2, floor_i=1e-4, floor_j=1e-4, cap_i=0.1, cap_j=0.1, qos=QOS, k1=0.1):
    return PairProblem(k1, k2, CELL, D2D, PowerBounds(floor_i, cap_i),
                       PowerBounds(floor_j, cap_j), qos)


def test_interference_floor():
    g = 3e-13
    assert interference_floor(1.1e-12, g, 100) == pytest.approx(1.1e-10 / g)
    assert interference_floor(1.1e-12, g, 200) == pytest.approx(2 * interference_floor(1.1e-12, g, 100))
    assert interference_floor(1.1e-12, 2 * g, 100) == pytest.approx(interference_floor(1.1e-12, g, 100) / 2)
    with pytest.raises(ValueError):
        interference_floor(1.1e-12, 0.0, 100)


def test_thresholds_hit_their_targets():
    from uavd2d.metrics import avg_decoding_error, capacity_cellular
    for interferer in (FadingSpec.los(K12), FadingSpec.nlos(2)):
        z1 = zeta_rate_threshold(CellularContext(interferer, 2), 8.0)
        z2 = zeta_reliability_threshold(CellularContext(interferer, 2), 1e-4, APPROX)
        assert capacity_cellular(z1, interferer, 2) == pytest.approx(8.0, rel=1e-8)
        assert avg_decoding_error(z2, interferer, 2, APPROX) == pytest.approx(1e-4, rel=1e-7)


def test_eq33_case_one():
    eta, _ = eta_star(problem())
    pp = optimal_power_pair(problem(floor_i=1e-6, floor_j=1e-4))
    assert pp.feasible and pp.p_j == 1e-4 and pp.p_i == pytest.approx(eta * 1e-4)


def test_eq33_case_two():
    eta, _ = eta_star(problem())
    floor_i = 3 * eta * 1e-4          # p_i floor / p_j floor > eta
    pp = optimal_power_pair(problem(floor_i=floor_i, floor_j=1e-4))
    assert pp.feasible
    assert pp.p_i == floor_i and pp.p_j == pytest.approx(floor_i / eta)


def test_eq33_case_three():
    eta, _ = eta_star(problem())
    floor_i = 2 * eta * 0.1           # floor_i / cap_j > eta
    pp = optimal_power_pair(problem(floor_i=min(floor_i, 0.09), floor_j=1e-4, cap_i=1.0))
    if floor_i < 0.09:
        assert not pp.feasible


def test_empty_box_infeasible():
    pp = optimal_power_pair(problem(floor_i=0.2, cap_i=0.1))
    assert not pp.feasible and pp.binding == "box"


def test_cap_binds_when_qos_loose():
    loose = QosTargets(1e-3, 0.49, APPROX)
    pp = optimal_power_pair(problem(k2=1e-9, qos=loose, floor_j=1e-3))
    assert pp.binding == "cap"
    assert pp.eta_star == pytest.approx(0.1 / 1e-3)


def test_tighter_rate_lowers_eta():
    etas = [eta_star(problem(qos=QosTargets(r, 0.3, APPROX)))[0] for r in (2, 4, 6, 8, 10)]
    assert all(b <= a for a, b in zip(etas, etas[1:]))


def test_weak_cellular_link_is_infeasible():
    pp = optimal_power_pair(problem(qos=QosTargets(500.0, 1e-4, APPROX)))
    assert not pp.feasible


@given(st.floats(0.01, 100))
def test_common_scaling(c):
    base = problem(floor_i=2e-5, floor_j=3e-4)
    scaled = problem(floor_i=2e-5 * c, floor_j=3e-4 * c, cap_i=0.1 * c, cap_j=0.1 * c)
    a, b = optimal_power_pair(base), optimal_power_pair(scaled)
    assert a.feasible == b.feasible
    if a.feasible:
        assert b.p_i == pytest.approx(c * a.p_i, rel=1e-12)
        assert b.p_j == pytest.approx(c * a.p_j, rel=1e-12)


@given(st.integers(0, 10 ** 6))
def test_solutions_pass_checks(seed):
    prob = random_pair_problem(np.random.default_rng(seed))
    pp = optimal_power_pair(prob)
    if pp.feasible:
        assert pp.p_i == pytest.approx(pp.eta_star * pp.p_j, rel=1e-12)
        assert check_solution(prob, pp) == []


def test_case_selection_exclusive():
    prob = problem()
    eta, _ = eta_star(prob)
    for ratio in np.logspace(-3, 3, 25):
        pp = optimal_power_pair(problem(floor_i=1e-4 * ratio * eta, floor_j=1e-4))
        case1 = ratio <= 1
        case2 = not case1 and 1e-4 * ratio * eta / 0.1 <= eta
        assert pp.feasible == (case1 or case2)


def test_grid_oracle_small_sample():
    rng = np.random.default_rng(2024)
    for _ in range(4):
        prob = random_pair_problem(rng)
        pp = optimal_power_pair(prob)
        g = grid_search(prob, 120)
        assert pp.feasible == g.feasible
        if pp.feasible:
            assert g.p_i / g.p_j <= pp.eta_star * (1 + 1e-9)
            assert g.p_i / g.p_j >= pp.eta_star / g.cell_ratio
            r = capacity_d2d_direct(implied_zetas(prob, pp)[0], prob.d2d)
            assert r >= g.rate - 1e-9

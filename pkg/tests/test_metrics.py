import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavd2d.channel import FadingSpec
from uavd2d.mcoracle import mc_decoding_error, mc_ergodic_capacity
from uavd2d.metrics import (FblParams, avg_decoding_error, build_piecewise, capacity_batch,
                            capacity_cellular, capacity_d2d_direct, capacity_d2d_relayed,
                            capacity_relayed_batch, epsilon_inverse, epsilon_n, ergodic_capacity,
                            h_l, h_n, rate_normal_approx)
from uavd2d.numerics import integrate
from uavd2d.outage import OutagePair, outage_nl, outage_nn

K12 = 10 ** 1.2
L, N = FadingSpec.los, FadingSpec.nlos
RR = OutagePair(N(1), N(1))
LN2 = math.log(2)
APPROX = build_piecewise(4)


def test_capacity_step_curve():
    assert ergodic_capacity(lambda a: (np.asarray(a) >= 3.0).astype(float), 1.0) \
        == pytest.approx(2.0, rel=1e-7)
    assert ergodic_capacity(lambda a: np.ones_like(np.asarray(a, dtype=float)), 1.0) == 0.0


def test_capacity_rayleigh_closed_forms():
    assert capacity_d2d_direct(1.0, RR) == pytest.approx(1 / LN2, rel=1e-9)
    assert capacity_cellular(1.0, N(1), 1) == pytest.approx(1 / LN2, rel=1e-9)
    assert capacity_d2d_direct(1.0, OutagePair(L(0.0), L(0.0))) == pytest.approx(1 / LN2, rel=1e-9)
    assert capacity_d2d_relayed(1.0, 1.0, RR, RR) == pytest.approx(1 / (2 * LN2), rel=1e-9)


def test_capacity_limits_and_monotone():
    pair = OutagePair(L(K12), N(2))
    zs = np.logspace(-3, 3, 13)
    c = [capacity_d2d_direct(z, pair) for z in zs]
    assert np.all(np.diff(c) < 0) and c[-1] < 0.01
    assert capacity_cellular(1e9, L(K12), 2) < 1e-6
    relayed = capacity_d2d_relayed(0.2, 1e-12, pair, RR)
    assert relayed == pytest.approx(capacity_d2d_direct(0.2, pair), rel=1e-6)
    assert capacity_d2d_relayed(0.2, 0.2, pair, pair) <= capacity_d2d_direct(0.2, pair)


@pytest.mark.parametrize("pair", [OutagePair(L(K12), N(2)), OutagePair(N(2), L(K12)),
                                  OutagePair(L(K12), L(K12)), OutagePair(N(2), N(2))])
def test_batch_capacity_matches_adaptive(pair):
    zs = np.logspace(-4, 2, 9)
    fast = capacity_batch(zs, pair)
    for z, f in zip(zs, fast):
        assert f == pytest.approx(capacity_d2d_direct(z, pair), rel=1e-5, abs=1e-7)
    rel = capacity_relayed_batch(zs[:3], zs[-3:], pair, RR)
    for a, zu in enumerate(zs[:3]):
        for b, zd in enumerate(zs[-3:]):
            assert rel[a, b] == pytest.approx(capacity_d2d_relayed(zu, zd, pair, RR), rel=1e-5, abs=1e-7)


def test_capacity_golden_monte_carlo():
    pair = OutagePair(L(K12), N(2))
    est = mc_ergodic_capacity(0.1, pair, 10 ** 6, seed=3)
    assert est.within(capacity_d2d_direct(0.1, pair), 3)


def _u_reference(g, n, xi):
    g = mp.mpf(g)
    return (1 - xi) * mp.sqrt(n) / mp.log(2) * mp.log(1 + g) / mp.sqrt(1 - (1 + g) ** -2)


def test_epsilon_n_values():
    fbl = FblParams(50, 0.8)
    want = float(mp.ncdf(-_u_reference(10, 50, mp.mpf("0.8"))))
    assert epsilon_n(10.0, fbl) == pytest.approx(want, rel=1e-12)
    assert epsilon_n(0.0, fbl) == 0.5
    assert epsilon_n(1e-13, fbl) == 0.5
    assert epsilon_n(1e-6, fbl) == pytest.approx(0.5, abs=1e-2)
    assert epsilon_n(1e9, fbl) < 1e-300 or epsilon_n(1e9, fbl) == 0.0
    g = np.logspace(-8, 4, 200)
    assert np.all(np.diff(epsilon_n(g, fbl)) < 0)


@given(st.floats(-6, math.log10(0.49)))
def test_epsilon_roundtrip(log_eps):
    eps = 10 ** log_eps
    assert epsilon_n(epsilon_inverse(eps)) == pytest.approx(eps, rel=1e-9)


def test_epsilon_inverse_golden():
    g = float(mp.findroot(lambda x: mp.ncdf(-_u_reference(x, 50, mp.mpf("0.8"))) - mp.mpf("1e-4"),
                          (mp.mpf(1), mp.mpf(1e4)), solver="bisect", tol=1e-30))
    assert epsilon_inverse(1e-4) == pytest.approx(g, rel=1e-10)
    with pytest.raises(ValueError):
        epsilon_inverse(0.5)


def test_rate_normal_approx_consistent():
    # u(g) carries a 1/ln2 on top of the dispersion scaling, so inverting
    # eps_n lands at R* = C (1 - (1 - xi) / ln2) rather than xi C
    fbl = FblParams(50, 0.8)
    for g in (0.5, 7.0, 300.0):
        r = rate_normal_approx(g, 50, float(epsilon_n(g, fbl)))
        assert r == pytest.approx(math.log2(1 + g) * (1 - (1 - fbl.xi) / LN2), rel=1e-9)


def test_piecewise_structure():
    a2 = build_piecewise(2)
    assert len(a2.breakpoints) == 3 and a2.breakpoints[0] == 0.0
    a4 = build_piecewise(4, 0.5 / 400)
    assert len(a4.breakpoints) == 5
    assert all(x > y for x, y in zip(a4.slopes, a4.slopes[1:]))
    for i, g in enumerate(a4.breakpoints[1:-1], start=1):
        assert epsilon_n(g) == pytest.approx(0.5 * (1 - i / 4), rel=1e-10)
    with pytest.raises(ValueError):
        build_piecewise(1)
    with pytest.raises(ValueError):
        build_piecewise(4, 0.2)


def _h_quad(kernel, alpha, gamma):
    return integrate(lambda t: np.array([kernel(alpha * x) for x in np.atleast_1d(t)]), 0.0, gamma)


def test_h_n_closed_forms():
    assert h_n(1.0, 0.0, 2, 2) == 0.0
    assert h_n(1.0, 1.0, 1, 1) == pytest.approx(1 - math.log(2), rel=1e-13)
    for a, g in [(0.3, 2.0), (2.0, 0.7)]:
        assert h_n(a, g, 1, 1) == pytest.approx(g - math.log1p(a * g) / a, rel=1e-12)
    q = _h_quad(lambda x: outage_nn(x, 2, 2), 1.0, 5.0)
    assert h_n(1.0, 5.0, 2, 2) == pytest.approx(q, rel=1e-8)


def test_h_l_closed_forms():
    assert h_l(1.0, 0.0, 2, K12) == 0.0
    assert h_l(0.6, 3.0, 1, 0.0) == pytest.approx(h_n(0.6, 3.0, 1, 1), rel=1e-11)
    q = _h_quad(lambda x: outage_nl(x, 2, K12), 1.0, 5.0)
    assert h_l(1.0, 5.0, 2, K12) == pytest.approx(q, rel=1e-6)


@given(st.floats(1e-3, 1e2), st.floats(1e-3, 1e3))
def test_h_bounds(alpha, gamma):
    for h in (h_n(alpha, gamma, 2, 2), h_l(alpha, gamma, 2, K12)):
        assert 0.0 <= h <= gamma * (1 + 1e-12)


@pytest.mark.parametrize("interferer", [L(K12), N(2)])
def test_avg_decoding_error_shape(interferer):
    zs = np.logspace(-6, 4, 50)
    e = np.array([avg_decoding_error(z, interferer, 2, APPROX) for z in zs])
    assert np.all(np.diff(e) > 0)
    assert e[0] < 1e-4 and 0.45 < e[-1] <= 0.5
    assert avg_decoding_error(math.inf, interferer, 2, APPROX) == 0.5


@pytest.mark.parametrize("interferer", [L(K12), N(2)])
def test_avg_decoding_error_converges_in_levels(interferer):
    by_level = {lv: build_piecewise(lv) for lv in (2, 4, 8)}
    fbl = by_level[2].fbl
    for z in np.logspace(-3, 0, 7):
        mc = mc_decoding_error(z, interferer, 2, fbl, 2 * 10 ** 5, seed=1).mean
        if mc < 1e-4:
            continue
        err = {lv: abs(avg_decoding_error(z, interferer, 2, ap) - mc) for lv, ap in by_level.items()}
        assert err[8] <= err[2]

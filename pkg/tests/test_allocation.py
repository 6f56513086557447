import csv
import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavd2d import allocation as A
from uavd2d.metrics import capacity_d2d_direct
from uavd2d.power import optimal_power_pair
from uavd2d.scenario import ScenarioConfig, generate

GOLDEN = Path(__file__).parent / "golden" / "exhaustive_3x6.csv"
SMALL = ScenarioConfig(num_cellular=6, num_d2d=3, uav_positions=((450.0, 0.0),))


def _net(seed, **kw):
    return generate(SMALL.with_overrides(**kw) if kw else SMALL, seed)


def test_hungarian_examples():
    assert A.hungarian_max([[1, 2], [3, 1]]) == [(0, 1), (1, 0)]
    assert A.hungarian_max(np.diag([4.0, 1.0, 2.0])) == [(0, 0), (1, 1), (2, 2)]
    assert A.hungarian_max(np.zeros((3, 2))) == []
    assert A.hungarian_max(np.zeros((0, 0))) == []
    with pytest.raises(ValueError):
        A.hungarian_max([[-1.0]])


def _total(w, match):
    return sum(w[i][j] for i, j in match)


@given(st.lists(st.floats(0, 10), min_size=36, max_size=36))
def test_hungarian_matches_permutations(flat):
    w = np.array(flat).reshape(6, 6)
    best = max(sum(w[i, p[i]] for i in range(6)) for p in itertools.permutations(range(6)))
    assert _total(w, A.hungarian_max(w)) == pytest.approx(best, abs=1e-9)


@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 10 ** 6), st.floats(0.01, 100))
def test_hungarian_rectangular_and_scaling(rows, cols, seed, c):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 1, (rows, cols)) * (rng.random((rows, cols)) < 0.7)
    best = 0.0
    for k in range(min(rows, cols) + 1):
        for rs in itertools.permutations(range(rows), k):
            for cs in itertools.permutations(range(cols), k):
                if all(w[r, q] > 0 for r, q in zip(rs, cs)):
                    best = max(best, sum(w[r, q] for r, q in zip(rs, cs)))
    m = A.hungarian_max(w)
    assert all(w[i, j] > 0 for i, j in m)
    assert _total(w, m) == pytest.approx(best, abs=1e-12)
    assert A.hungarian_max(c * w) == m


def test_weight_table_matches_recomputation():
    net = generate(ScenarioConfig(), 0)
    table = A.WeightTable(net)
    assert len(table.direct) > 0
    for i in range(net.num_d2d):
        for j in range(net.num_cellular):
            prob = A.direct_problem(net, i, j)
            pp = optimal_power_pair(prob)
            if not pp.feasible:
                assert (i, j) not in table.direct and table.direct_w[i, j] == 0
                continue
            want = capacity_d2d_direct(A.d2d_zeta(prob, pp), prob.d2d)
            assert table.direct[(i, j)].power == pp
            assert table.direct_w[i, j] == pytest.approx(want, rel=1e-5, abs=1e-7)


def test_relay_entries_backed_by_two_power_pairs():
    net = _net(1)
    table = A.WeightTable(net)
    for i, ju, jd in zip(*np.nonzero(table.relay_w)):
        e = table.relay(int(i), int(ju), int(jd))
        assert e.up.feasible and e.down.feasible and e.rate > 0 and ju != jd


def test_all_infeasible_gives_empty_matching():
    net = _net(0, k_tilde=1e3)
    table = A.WeightTable(net)
    assert not table.direct and not np.any(table.relay_w)
    for st_ in (A.allocate_direct(net, table), A.allocate_with_relays(net, table),
                A.allocate_greedy(net, "greedy1", table), A.allocate_exhaustive(net, table)):
        assert st_.assignments == () and st_.sum_rate == 0
        assert st_.unmatched_d2d == tuple(range(3))
        assert st_.total_power == pytest.approx(sum(A.standalone_floor(net, j) for j in range(6)))


def test_single_pair_single_user():
    net = generate(ScenarioConfig(num_cellular=1, num_d2d=1, k_tilde=1e-7), 5)
    d, ex = A.allocate_direct(net), A.allocate_exhaustive(net)
    assert d.sum_rate == ex.sum_rate
    if d.assignments:
        a = d.assignments[0]
        assert a.kind == A.DIRECT and a.channels == (0,)
        assert d.total_power == pytest.approx(a.p_tx[0] + a.p_cell[0])


def test_zero_uavs_reduces_to_direct():
    net = _net(2, uav_positions=())
    assert A.allocate_with_relays(net).assignments == A.allocate_direct(net).assignments
    assert A.allocate_greedy(net, "greedy2").assignments == A.allocate_direct(net).assignments


@pytest.mark.parametrize("seed", range(6))
def test_allocators_ordering_and_constraints(seed):
    net = generate(ScenarioConfig(num_cellular=10, num_d2d=6), seed)
    table = A.WeightTable(net)
    d = A.allocate_direct(net, table)
    r = A.allocate_with_relays(net, table)
    assert r.sum_rate >= d.sum_rate
    assert all(b >= a for a, b in zip(r.history, r.history[1:]))
    assert d.sum_rate == pytest.approx(sum(table.direct_w[a.pair, a.channels[0]] for a in d.assignments))
    for st_ in (d, r, A.allocate_greedy(net, "greedy1", table), A.allocate_greedy(net, "greedy2", table)):
        assert A.check_state(net, st_) == []
        rho_d = st_.rho_d
        for i, chans in st_.rho_c.items():
            assert all(rho_d[j] == i for j in chans)
            assert len(chans) == (2 if st_.mu_r[i] else 1)


def test_greedy_upgrades_improve_own_rate_and_follow_order():
    for seed in range(4):
        net = generate(ScenarioConfig(num_cellular=10, num_d2d=6), seed)
        table = A.WeightTable(net)
        d = A.allocate_direct(net, table)
        direct_rate = {a.pair: a.rate for a in d.assignments}
        g2 = A.allocate_greedy(net, "greedy2", table)
        got = {a.pair: a for a in g2.assignments}
        for i in g2.upgrades:
            assert got[i].rate > direct_rate.get(i, 0.0)
        keys = [(direct_rate.get(i, 0.0), i) for i in g2.upgrades]
        assert keys == sorted(keys)
        g1 = A.allocate_greedy(net, "greedy1", table)
        assert list(g1.upgrades) == sorted(g1.upgrades)
    with pytest.raises(ValueError):
        A.allocate_greedy(net, "greedy3", table)


def _brute_force(net, table, direct_only=False):
    md, mc = net.num_d2d, net.num_cellular
    opts = []
    for i in range(md):
        o = [((), 0.0)]
        o += [((j,), table.direct_w[i, j]) for j in range(mc) if table.direct_w[i, j] > 0]
        if not direct_only:
            o += [((a, b), table.relay_w[i, a, b]) for a in range(mc) for b in range(mc)
                  if table.relay_w[i, a, b] > 0]
        opts.append(o)
    best = 0.0
    for combo in itertools.product(*opts):
        used = [j for ch, _ in combo for j in ch]
        if len(used) == len(set(used)):
            best = max(best, sum(w for _, w in combo))
    return best


@pytest.mark.parametrize("seed", range(3))
def test_exhaustive_matches_brute_force(seed):
    net = generate(SMALL.with_overrides(num_cellular=4, num_d2d=2), seed)
    table = A.WeightTable(net)
    ex = A.allocate_exhaustive(net, table)
    assert ex.sum_rate == pytest.approx(_brute_force(net, table), rel=1e-12)
    exd = A.allocate_exhaustive(net, table, direct_only=True)
    assert exd.sum_rate == pytest.approx(_brute_force(net, table, True), rel=1e-12)
    for other in (A.allocate_direct(net, table), A.allocate_with_relays(net, table),
                  A.allocate_greedy(net, "greedy1", table)):
        assert ex.sum_rate >= other.sum_rate - 1e-12


def test_exhaustive_guard():
    with pytest.raises(ValueError, match="exhaustive"):
        A.allocate_exhaustive(generate(ScenarioConfig(num_cellular=8, num_d2d=2), 0))


def test_exhaustive_golden():
    with open(GOLDEN) as fh:
        rows = list(csv.DictReader(fh))
    assert rows
    for row in rows:
        ex = A.allocate_exhaustive(_net(int(row["seed"])))
        assert ex.sum_rate == pytest.approx(float(row["sum_rate"]), rel=1e-9)
        assert ex.total_power == pytest.approx(float(row["total_power"]), rel=1e-9)
        assert "|".join(f"{a.pair}:{a.kind}:{a.channels}" for a in ex.assignments) == row["assignment"]


def test_total_power_counts_both_relay_legs():
    for seed in range(10):
        net = generate(ScenarioConfig(num_cellular=10, num_d2d=6), seed)
        st_ = A.allocate_with_relays(net)
        relays = [a for a in st_.assignments if a.kind == A.RELAY]
        if relays:
            a = relays[0]
            assert len(a.p_tx) == 2 and len(a.p_cell) == 2
            used = st_.rho_d
            want = sum(sum(x.p_tx) + sum(x.p_cell) for x in st_.assignments)
            want += sum(A.standalone_floor(net, j) for j in range(10) if j not in used)
            assert st_.total_power == pytest.approx(want, rel=1e-12)
            return
    pytest.fail("no relayed pair in ten seeds")


def test_text_record():
    net = generate(ScenarioConfig(num_cellular=10, num_d2d=6), 0)
    text = A.allocate_with_relays(net).to_text()
    lines = text.splitlines()
    assert lines[0] == "# pair,type,channels,uav,p_tx,p_cell,rate"
    assert lines[-1].startswith("# sum_rate=")
    for line in lines[1:-1]:
        pair, kind, chans, uav, ptx, pc, rate = line.split(",")
        assert kind in (A.DIRECT, A.RELAY)
        assert len(chans.split(";")) == len(ptx.split(";")) == len(pc.split(";"))
        assert (uav == "-") == (kind == A.DIRECT)


def test_operation_count_scaling():
    # Delta-w evaluations per run against (M^d M^c)^2, averaged over seeds
    sizes = (10, 20, 30, 40)
    counts = []
    for mc in sizes:
        evs = [A.allocate_with_relays(generate(ScenarioConfig(num_cellular=mc, num_d2d=8), s)).evaluations
               for s in range(3)]
        counts.append(np.mean(evs))
    ratios = [c / (8 * mc) ** 2 for c, mc in zip(counts, sizes)]
    assert max(ratios) <= 1.0
    slope = math.log(counts[-1] / counts[1]) / math.log(sizes[-1] / sizes[1])
    assert slope <= 2.25

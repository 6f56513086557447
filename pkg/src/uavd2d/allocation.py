"""Subchannel, link-type and power allocation.

Every D2D pair either stays unserved, reuses one cellular subchannel
directly, or is relayed through a UAV over two subchannels (uplink leg on
j_u, downlink leg on j_d). A cellular subchannel is shared with at most one
D2D pair. Per-subchannel powers come from :func:`power.optimal_power_pair`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .metrics import capacity_batch, capacity_relayed_batch
from .outage import OutagePair
from .power import (CellularContext, PairProblem, PowerBounds, PowerPair, QosTargets,
                    check_solution, optimal_power_pair)
from .scenario import NetworkRealization

DIRECT, RELAY = "direct", "relay"
EXHAUSTIVE_MAX_D2D = 4
EXHAUSTIVE_MAX_CELL = 7


# ------------------------------------------------------------ problems

def _qos(net: NetworkRealization) -> QosTargets:
    cfg = net.config
    return QosTargets(cfg.rate_min, cfg.p_eps, cfg.approx)


def direct_problem(net: NetworkRealization, i: int, j: int) -> PairProblem:
    cfg = net.config
    desired, cross_in = net.d2d[i], net.c_to_rx[i][j]
    cell, cross_out = net.cell[j], net.d_to_bs[i]
    return PairProblem(
        k1=cross_in.mean_gain / desired.mean_gain,
        k2=cross_out.mean_gain / cell.mean_gain,
        cell=CellularContext(cross_out.fading, cfg.nakagami_m),
        d2d=OutagePair(desired.fading, cross_in.fading),
        bounds_i=PowerBounds(net.floor(net.ipn_bs, cross_out), cfg.p_d2d_max),
        bounds_j=PowerBounds(net.floor(net.ipn_rx[i], cross_in), cfg.p_cell_max),
        qos=_qos(net))


def uplink_problem(net: NetworkRealization, u: int, i: int, j: int) -> PairProblem:
    """D2D Tx i -> UAV u on the subchannel of cellular user j."""
    cfg = net.config
    desired, cross_in = net.d_to_uav[u][i], net.c_to_uav[u][j]
    cell, cross_out = net.cell[j], net.d_to_bs_relay[u][i]
    return PairProblem(
        k1=cross_in.mean_gain / desired.mean_gain,
        k2=cross_out.mean_gain / cell.mean_gain,
        cell=CellularContext(cross_out.fading, cfg.nakagami_m),
        d2d=OutagePair(desired.fading, cross_in.fading),
        bounds_i=PowerBounds(net.floor(net.ipn_bs, cross_out), cfg.p_dr_max),
        bounds_j=PowerBounds(net.floor(net.ipn_uav[u], cross_in), cfg.p_cell_max),
        qos=_qos(net))


def downlink_problem(net: NetworkRealization, u: int, i: int, j: int) -> PairProblem:
    """UAV u -> D2D Rx i on the subchannel of cellular user j."""
    cfg = net.config
    desired, cross_in = net.uav_to_rx[u][i], net.c_to_rx[i][j]
    cell, cross_out = net.cell[j], net.uav_to_bs[u][i]
    return PairProblem(
        k1=cross_in.mean_gain / desired.mean_gain,
        k2=cross_out.mean_gain / cell.mean_gain,
        cell=CellularContext(cross_out.fading, cfg.nakagami_m),
        d2d=OutagePair(desired.fading, cross_in.fading),
        bounds_i=PowerBounds(net.floor(net.ipn_bs, cross_out), cfg.p_rd_max),
        bounds_j=PowerBounds(net.floor(net.ipn_rx[i], cross_in), cfg.p_cell_max),
        qos=_qos(net))


def d2d_zeta(problem: PairProblem, pp: PowerPair) -> float:
    return problem.k1 * pp.p_j / pp.p_i


# -------------------------------------------------------------- weights

@dataclass(frozen=True)
class DirectEntry:
    rate: float
    power: PowerPair


@dataclass(frozen=True)
class RelayEntry:
    rate: float
    uav: int
    up: PowerPair
    down: PowerPair


class WeightTable:
    """Direct weights w[i, j] and relayed weights w[i, j_u, j_d].

    Absent (infeasible) entries are stored as 0 in the dense arrays and are
    missing from the entry maps. A relayed weight is the best over UAVs.
    """

    def __init__(self, net: NetworkRealization):
        self.net = net
        md, mc, nu = net.num_d2d, net.num_cellular, net.num_uavs
        self.direct_w = np.zeros((md, mc))
        self.direct: dict[tuple[int, int], DirectEntry] = {}
        self.relay_w = np.zeros((md, mc, mc))
        self._relay_uav = np.full((md, mc, mc), -1, dtype=int)
        self._up: dict[tuple[int, int, int], PowerPair] = {}
        self._down: dict[tuple[int, int, int], PowerPair] = {}
        self._build_direct()
        if nu:
            self._build_relay()

    def _build_direct(self):
        net = self.net
        for i in range(net.num_d2d):
            todo = {}
            for j in range(net.num_cellular):
                prob = direct_problem(net, i, j)
                pp = optimal_power_pair(prob)
                if pp.feasible:
                    todo.setdefault(prob.d2d, []).append((j, pp, d2d_zeta(prob, pp)))
            for pair, items in todo.items():
                rates = capacity_batch([z for _, _, z in items], pair)
                for (j, pp, _), r in zip(items, rates):
                    if r > 0:
                        self.direct_w[i, j] = r
                        self.direct[(i, j)] = DirectEntry(float(r), pp)

    def _build_relay(self):
        net = self.net
        md, mc = net.num_d2d, net.num_cellular
        best = np.zeros((md, mc, mc))
        for u in range(net.num_uavs):
            for i in range(md):
                ups, downs = {}, {}
                for j in range(mc):
                    pu = uplink_problem(net, u, i, j)
                    ppu = optimal_power_pair(pu)
                    if ppu.feasible:
                        self._up[(u, i, j)] = ppu
                        ups.setdefault(pu.d2d, []).append((j, d2d_zeta(pu, ppu)))
                    pd = downlink_problem(net, u, i, j)
                    ppd = optimal_power_pair(pd)
                    if ppd.feasible:
                        self._down[(u, i, j)] = ppd
                        downs.setdefault(pd.d2d, []).append((j, d2d_zeta(pd, ppd)))
                rate = np.zeros((mc, mc))
                for pu_pair, us in ups.items():
                    for pd_pair, ds in downs.items():
                        r = capacity_relayed_batch([z for _, z in us], [z for _, z in ds],
                                                   pu_pair, pd_pair)
                        ju = np.array([j for j, _ in us])
                        jd = np.array([j for j, _ in ds])
                        rate[np.ix_(ju, jd)] = r
                np.fill_diagonal(rate, 0.0)
                better = rate > best[i]
                best[i] = np.where(better, rate, best[i])
                self._relay_uav[i][better] = u
        self.relay_w = best

    def relay(self, i: int, ju: int, jd: int) -> RelayEntry | None:
        u = int(self._relay_uav[i, ju, jd])
        if u < 0 or ju == jd:
            return None
        return RelayEntry(float(self.relay_w[i, ju, jd]), u,
                          self._up[(u, i, ju)], self._down[(u, i, jd)])


def build_direct_weights(net: NetworkRealization) -> WeightTable:
    return WeightTable(net)


# ------------------------------------------------------------ Hungarian

def hungarian_max(weights, present=None) -> list[tuple[int, int]]:
    """Maximum-weight one-to-one matching of a rectangular weight matrix.

    ``present`` marks assignable entries (default: weight > 0). Rows or
    columns left without an assignable partner stay unmatched. Potentials
    based O(n^3) shortest augmenting path on the padded square matrix.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a matrix")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    mask = w > 0 if present is None else np.asarray(present, dtype=bool)
    rows, cols = w.shape
    n = max(rows, cols)
    if n == 0:
        return []
    cost = np.zeros((n, n))
    cost[:rows, :cols] = -np.where(mask, w, 0.0)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for r in range(1, n + 1):
        p[0] = r
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = inf, 0
            row = cost[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    out = []
    for j in range(1, n + 1):
        i = p[j] - 1
        if i < rows and j - 1 < cols and mask[i, j - 1]:
            out.append((i, j - 1))
    return sorted(out)


# ------------------------------------------------------------ states

@dataclass(frozen=True)
class Assignment:
    pair: int
    kind: str
    channels: tuple[int, ...]
    uav: int
    p_tx: tuple[float, ...]      # D2D Tx (and UAV for relays)
    p_cell: tuple[float, ...]    # cellular user(s) on the channel(s)
    rate: float


@dataclass(frozen=True)
class MatchingState:
    num_d2d: int
    num_cellular: int
    assignments: tuple[Assignment, ...]
    sum_rate: float
    total_power: float
    history: tuple[float, ...] = ()
    evaluations: int = 0
    upgrades: tuple[int, ...] = ()     # relayed pairs in commit order

    @property
    def mu_r(self) -> tuple[bool, ...]:
        flags = [False] * self.num_d2d
        for a in self.assignments:
            flags[a.pair] = a.kind == RELAY
        return tuple(flags)

    @property
    def rho_c(self) -> dict[int, tuple[int, ...]]:
        return {a.pair: a.channels for a in self.assignments}

    @property
    def rho_d(self) -> dict[int, int]:
        return {j: a.pair for a in self.assignments for j in a.channels}

    @property
    def unmatched_d2d(self) -> tuple[int, ...]:
        got = {a.pair for a in self.assignments}
        return tuple(i for i in range(self.num_d2d) if i not in got)

    @property
    def unmatched_cellular(self) -> tuple[int, ...]:
        used = self.rho_d
        return tuple(j for j in range(self.num_cellular) if j not in used)

    @property
    def relayed_rate(self) -> float:
        return sum(a.rate for a in self.assignments if a.kind == RELAY)

    def to_text(self) -> str:
        lines = ["# pair,type,channels,uav,p_tx,p_cell,rate"]
        for a in self.assignments:
            lines.append(",".join([
                str(a.pair), a.kind, ";".join(map(str, a.channels)),
                str(a.uav) if a.uav >= 0 else "-",
                ";".join(f"{p:.9e}" for p in a.p_tx),
                ";".join(f"{p:.9e}" for p in a.p_cell),
                f"{a.rate:.9f}"]))
        lines.append(f"# sum_rate={self.sum_rate:.9f} total_power={self.total_power:.9e}")
        return "\n".join(lines) + "\n"


def standalone_floor(net: NetworkRealization, j: int) -> float:
    """Power charged to a cellular user whose subchannel is not shared:
    the interference floor taken on its own link to the BS."""
    return net.floor(net.ipn_bs, net.cell[j])


def total_power(state: MatchingState, net: NetworkRealization) -> float:
    used = state.rho_d
    total = sum(sum(a.p_tx) + sum(a.p_cell) for a in state.assignments)
    total += sum(standalone_floor(net, j) for j in range(net.num_cellular) if j not in used)
    return total


class _Builder:
    """Mutable bookkeeping used while an allocator runs."""

    def __init__(self, table: WeightTable):
        self.table = table
        self.direct: dict[int, int] = {}                 # pair -> channel
        self.relay: dict[int, tuple[int, int]] = {}      # pair -> (j_u, j_d)
        self.owner: dict[int, int] = {}                  # channel -> pair
        self.history: list[float] = []
        self.evaluations = 0
        self.upgrades: list[int] = []

    def rate_of(self, i: int) -> float:
        if i in self.direct:
            return float(self.table.direct_w[i, self.direct[i]])
        if i in self.relay:
            ju, jd = self.relay[i]
            return float(self.table.relay_w[i, ju, jd])
        return 0.0

    def sum_rate(self) -> float:
        return sum(self.rate_of(i) for i in set(self.direct) | set(self.relay))

    def set_direct(self, i: int, j: int):
        self.direct[i] = j
        self.owner[j] = i

    def drop(self, i: int):
        if i in self.direct:
            del self.owner[self.direct.pop(i)]
        elif i in self.relay:
            for j in self.relay.pop(i):
                del self.owner[j]

    def set_relay(self, i: int, ju: int, jd: int):
        self.relay[i] = (ju, jd)
        self.owner[ju] = i
        self.owner[jd] = i
        self.upgrades.append(i)

    def freeze(self) -> MatchingState:
        net = self.table.net
        out = []
        for i in sorted(set(self.direct) | set(self.relay)):
            if i in self.direct:
                j = self.direct[i]
                e = self.table.direct[(i, j)]
                out.append(Assignment(i, DIRECT, (j,), -1, (e.power.p_i,), (e.power.p_j,), e.rate))
            else:
                ju, jd = self.relay[i]
                e = self.table.relay(i, ju, jd)
                out.append(Assignment(i, RELAY, (ju, jd), e.uav, (e.up.p_i, e.down.p_i),
                                      (e.up.p_j, e.down.p_j), e.rate))
        state = MatchingState(net.num_d2d, net.num_cellular, tuple(out),
                              sum(a.rate for a in out), 0.0, tuple(self.history),
                              self.evaluations, tuple(self.upgrades))
        return _with_power(state, net)


def _with_power(state: MatchingState, net: NetworkRealization) -> MatchingState:
    return replace(state, total_power=total_power(state, net))


# ------------------------------------------------------------ allocators

def _direct_builder(table: WeightTable) -> _Builder:
    b = _Builder(table)
    for i, j in hungarian_max(table.direct_w):
        b.set_direct(i, j)
    b.history.append(b.sum_rate())
    return b


def allocate_direct(net: NetworkRealization, table: WeightTable | None = None) -> MatchingState:
    """Optimal direct-only assignment: Hungarian matching of w[i, j]."""
    table = table or WeightTable(net)
    return _direct_builder(table).freeze()


def _top2(weights: np.ndarray, free: list[int]) -> list[tuple[float, int]]:
    """Two best (weight, channel) among free channels with a present weight."""
    cands = [(float(weights[j]), j) for j in free if weights[j] > 0]
    cands.sort(key=lambda t: (-t[0], t[1]))
    return cands[:2]


def _best_replacement(table: WeightTable, iu, id_, free: list[int]):
    """Best channels (j'_u, j'_d) for the displaced pairs; None means unserved."""
    opts_u = _top2(table.direct_w[iu], free) if iu is not None else []
    opts_d = _top2(table.direct_w[id_], free) if id_ is not None else []
    opts_u.append((0.0, None))
    opts_d.append((0.0, None))
    best = (0.0, None, None)
    for (wu, ju), (wd, jd) in itertools.product(opts_u, opts_d):
        if ju is not None and ju == jd:
            continue
        total = wu + wd
        if total > best[0]:
            best = (total, ju, jd)
    return best


def allocate_with_relays(net: NetworkRealization, table: WeightTable | None = None) -> MatchingState:
    """Direct Hungarian assignment followed by greedy relay upgrades.

    Each round evaluates every (i, j_u, j_d) among the remaining candidates
    with gain w_rel - w[i, j] - w[i_u, j_u] - w[i_d, j_d] + w[i_u, j'_u] +
    w[i_d, j'_d] and commits the largest positive one.
    """
    table = table or WeightTable(net)
    b = _direct_builder(table)
    if net.num_uavs == 0:
        return b.freeze()
    cand_d = set(range(net.num_d2d))
    cand_c = set(range(net.num_cellular))
    while True:
        best = (0.0, None)
        for i in sorted(cand_d):
            j_own = b.direct.get(i)
            w_own = table.direct_w[i, j_own] if j_own is not None else 0.0
            chans = sorted(cand_c)
            rel = table.relay_w[i]
            for ju in chans:
                for jd in chans:
                    if ju == jd or rel[ju, jd] <= 0:
                        continue
                    b.evaluations += 1
                    iu = b.owner.get(ju)
                    id_ = b.owner.get(jd)
                    iu = None if iu == i else iu
                    id_ = None if id_ == i else id_
                    loss = w_own
                    if iu is not None:
                        loss += table.direct_w[iu, ju]
                    if id_ is not None:
                        loss += table.direct_w[id_, jd]
                    # channels free once the move happens: unowned ones and
                    # i's old channel, never j_u / j_d themselves
                    free = [j for j in cand_c
                            if j not in (ju, jd) and (j not in b.owner or j == j_own)]
                    gain_r, _, _ = _best_replacement(table, iu, id_, free) \
                        if (iu is not None or id_ is not None) else (0.0, None, None)
                    delta = rel[ju, jd] - loss + gain_r
                    if delta > best[0] + 1e-12:
                        best = (delta, (i, ju, jd))
        if best[1] is None:
            break
        i, ju, jd = best[1]
        before = b.sum_rate()
        j_own = b.direct.get(i)
        iu = b.owner.get(ju)
        id_ = b.owner.get(jd)
        iu = None if iu == i else iu
        id_ = None if id_ == i else id_
        free = [j for j in cand_c if j not in (ju, jd) and (j not in b.owner or j == j_own)]
        _, ru, rd = _best_replacement(table, iu, id_, free) \
            if (iu is not None or id_ is not None) else (0.0, None, None)
        b.drop(i)
        for displaced in (iu, id_):
            if displaced is not None:
                b.drop(displaced)
        b.set_relay(i, ju, jd)
        if iu is not None and ru is not None:
            b.set_direct(iu, ru)
        if id_ is not None and rd is not None:
            b.set_direct(id_, rd)
        after = b.sum_rate()
        if after < before - 1e-9:
            raise AssertionError("relay upgrade decreased the sum-rate")
        b.history.append(after)
        cand_d.discard(i)
        cand_c.discard(ju)
        cand_c.discard(jd)
    return b.freeze()


def allocate_greedy(net: NetworkRealization, variant: str = "greedy1",
                    table: WeightTable | None = None) -> MatchingState:
    """Sequential selfish upgrades after the direct assignment.

    Each pair in turn takes the relayed (j_u, j_d) with the highest rate
    among free subchannels and its own, if that beats its current rate.
    greedy1 visits pairs by index, greedy2 by ascending direct rate.
    """
    if variant not in ("greedy1", "greedy2"):
        raise ValueError(f"unknown greedy variant {variant!r}")
    table = table or WeightTable(net)
    b = _direct_builder(table)
    if net.num_uavs == 0:
        return b.freeze()
    order = list(range(net.num_d2d))
    if variant == "greedy2":
        order.sort(key=lambda i: (b.rate_of(i), i))
    for i in order:
        own = b.direct.get(i)
        avail = [j for j in range(net.num_cellular) if j not in b.owner or j == own]
        current = b.rate_of(i)
        best = (current, None)
        for ju in avail:
            for jd in avail:
                if ju == jd:
                    continue
                b.evaluations += 1
                r = table.relay_w[i, ju, jd]
                if r > best[0] + 1e-12:
                    best = (r, (ju, jd))
        if best[1] is not None:
            b.drop(i)
            b.set_relay(i, *best[1])
            b.history.append(b.sum_rate())
    return b.freeze()


def allocate_exhaustive(net: NetworkRealization, table: WeightTable | None = None,
                        direct_only: bool = False) -> MatchingState:
    """Best assignment by branch and bound over every pair's options.

    Maximises the D2D sum-rate; ties go to lower total power, then to the
    lexicographically smaller option vector.
    """
    if net.num_d2d > EXHAUSTIVE_MAX_D2D or net.num_cellular > EXHAUSTIVE_MAX_CELL:
        raise ValueError(f"exhaustive search is limited to M^d <= {EXHAUSTIVE_MAX_D2D} "
                         f"and M^c <= {EXHAUSTIVE_MAX_CELL}")
    table = table or WeightTable(net)
    md, mc = net.num_d2d, net.num_cellular
    floors = [standalone_floor(net, j) for j in range(mc)]

    # option = (rate, extra power over the standalone floors, channels, key)
    options = []
    for i in range(md):
        opts = [(0.0, 0.0, (), (0,))]
        for j in range(mc):
            e = table.direct.get((i, j))
            if e:
                opts.append((e.rate, e.power.p_i + e.power.p_j - floors[j], (j,), (1, j)))
        if not direct_only:
            for ju in range(mc):
                for jd in range(mc):
                    e = table.relay(i, ju, jd) if table.relay_w[i, ju, jd] > 0 else None
                    if e:
                        p = e.up.p_i + e.up.p_j + e.down.p_i + e.down.p_j - floors[ju] - floors[jd]
                        opts.append((e.rate, p, (ju, jd), (2, ju, jd)))
        opts.sort(key=lambda o: (-o[0], o[3]))
        options.append(opts)
    bound = [0.0] * (md + 1)
    for i in range(md - 1, -1, -1):
        bound[i] = bound[i + 1] + options[i][0][0]

    best = {"rate": -1.0, "power": math.inf, "keys": None, "pick": None}
    pick = [None] * md
    used = set()
    rtol = 1e-12

    def better(rate, pw, keys):
        if rate > best["rate"] * (1 + rtol) + rtol:
            return True
        if rate < best["rate"] * (1 - rtol) - rtol:
            return False
        if pw < best["power"] - 1e-15:
            return True
        if pw > best["power"] + 1e-15:
            return False
        return keys < best["keys"]

    def rec(i, rate, pw):
        if rate + bound[i] < best["rate"] * (1 - rtol) - rtol:
            return
        if i == md:
            keys = tuple(o[3] for o in pick)
            if better(rate, pw, keys):
                best.update(rate=rate, power=pw, keys=keys, pick=list(pick))
            return
        for opt in options[i]:
            if any(j in used for j in opt[2]):
                continue
            pick[i] = opt
            used.update(opt[2])
            rec(i + 1, rate + opt[0], pw + opt[1])
            used.difference_update(opt[2])
        pick[i] = None

    rec(0, 0.0, 0.0)
    b = _Builder(table)
    for i, opt in enumerate(best["pick"]):
        if opt[3][0] == 1:
            b.set_direct(i, opt[2][0])
        elif opt[3][0] == 2:
            b.set_relay(i, *opt[2])
    b.history.append(b.sum_rate())
    return b.freeze()


# ------------------------------------------------------------ checks

def check_state(net: NetworkRealization, state: MatchingState, tol: float = 1e-6) -> list[str]:
    """Post-hoc check of cardinality, boxes, cellular rate and reliability."""
    problems = []
    seen = {}
    for a in state.assignments:
        want = 1 if a.kind == DIRECT else 2
        if len(a.channels) != want or len(set(a.channels)) != want:
            problems.append(f"pair {a.pair}: {a.kind} link holds channels {a.channels}")
        for j in a.channels:
            if j in seen:
                problems.append(f"channel {j} shared by pairs {seen[j]} and {a.pair}")
            seen[j] = a.pair
        if a.kind == DIRECT:
            legs = [(direct_problem(net, a.pair, a.channels[0]), a.p_tx[0], a.p_cell[0])]
        else:
            legs = [(uplink_problem(net, a.uav, a.pair, a.channels[0]), a.p_tx[0], a.p_cell[0]),
                    (downlink_problem(net, a.uav, a.pair, a.channels[1]), a.p_tx[1], a.p_cell[1])]
        for prob, pi, pj in legs:
            pp = PowerPair(True, pi, pj, pi / pj, "")
            for name in check_solution(prob, pp, tol):
                problems.append(f"pair {a.pair} ({a.kind}): {name} violated")
    if len({a.pair for a in state.assignments}) != len(state.assignments):
        problems.append("a pair appears twice")
    return problems

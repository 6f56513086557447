"""Scenario configuration, random network realizations and link tables.

Geometry: a square cell centred on the BS, ground users at height 0, UAVs
hovering at a common height. Every transmitter steers its beam at its
intended receiver; a link's mean gain carries the transmitter's pattern
gain toward that link's receiver.

Link classes:
  ground -> BS            always NLoS (Nakagami), as the BS links are modelled
  ground <-> ground       distance-based LoS probability
  anything <-> UAV        elevation-based LoS probability
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .channel import (AerialLosParams, AntennaPattern, FadingSpec, GroundLosParams,
                      LinkStats, PathLossParams, angle_between, antenna_gain,
                      los_probability, mean_path_gain)
from .metrics import FblParams, PiecewiseApprox, build_piecewise
from .power import interference_floor

RING_ANGLES = tuple(math.radians(a) for a in (0, 60, 120, 180, 240, 300))


def _db(x: float) -> float:
    return 10.0 ** (x / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """All scenario knobs. Quantities given in dB are kept in dB here and
    converted by the properties below."""

    cell_side: float = 1600.0
    num_cellular: int = 18
    num_d2d: int = 10
    uav_positions: tuple[tuple[float, float], ...] = ((450.0, 0.0), (-450.0, 0.0))
    uav_height: float = 250.0
    bs_height: float = 50.0
    mu_los: float = 61.4
    beta_los: float = 2.0
    mu_nlos: float = 72.0
    beta_nlos: float = 2.92
    aerial_b: float = 0.1396
    aerial_c: float = 11.95
    ground_d1: float = 18.0
    ground_d2: float = 63.0
    nakagami_m: int = 2
    rician_k_db: float = 12.0
    antenna_max_db: float = 25.0
    antenna_min_db: float = -5.0
    theta_3db_deg: float = 15.0
    noise_w: float = 1.1e-12
    p_d2d_max: float = 0.1
    p_dr_max: float = 0.1
    p_rd_max: float = 1.0
    p_cell_max: float = 0.1
    rate_min: float = 8.0
    p_eps: float = 1e-4
    blocklength: int = 50
    xi: float = 0.8
    levels: int = 4
    delta: float = 0.5 / 400
    k_tilde: float = 1e-5
    intercell_cells: int = 0
    intercell_los: bool = True
    intercell_distance_factor: float = math.sqrt(3.0)
    d2d_distance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        positive = ["cell_side", "uav_height", "bs_height", "noise_w", "p_d2d_max",
                    "p_dr_max", "p_rd_max", "p_cell_max", "rate_min", "k_tilde",
                    "theta_3db_deg", "intercell_distance_factor"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.num_cellular < 1 or self.num_d2d < 0:
            raise ValueError("need at least one cellular user and a non-negative D2D count")
        if not 0 <= self.intercell_cells <= 6:
            raise ValueError("intercell_cells must lie in 0..6")
        if self.d2d_distance < 0:
            raise ValueError("d2d_distance must be >= 0 (0 means uniform placement)")
        if self.d2d_distance > self.cell_side:
            raise ValueError("d2d_distance larger than the cell")
        half = self.cell_side / 2
        for x, y in self.uav_positions:
            if abs(x) > half or abs(y) > half:
                raise ValueError(f"UAV at ({x}, {y}) lies outside the cell")
        # remaining checks live in the parameter dataclasses
        self.path_loss, self.aerial, self.ground, self.antenna, self.fbl
        if self.levels < 2 or not 0 < self.delta < 0.5 / self.levels:
            raise ValueError("need levels >= 2 and 0 < delta < 0.5/levels")
        if not 0 < self.p_eps < 0.5:
            raise ValueError("p_eps must lie in (0, 0.5)")

    @property
    def rician_k(self) -> float:
        return _db(self.rician_k_db)

    @property
    def fading_shapes(self) -> tuple[int, float]:
        return self.nakagami_m, self.rician_k

    @property
    def path_loss(self) -> PathLossParams:
        return PathLossParams(self.mu_los, self.beta_los, self.mu_nlos, self.beta_nlos)

    @property
    def aerial(self) -> AerialLosParams:
        return AerialLosParams(self.aerial_b, self.aerial_c)

    @property
    def ground(self) -> GroundLosParams:
        return GroundLosParams(self.ground_d1, self.ground_d2)

    @property
    def antenna(self) -> AntennaPattern:
        return AntennaPattern(_db(self.antenna_max_db), _db(self.antenna_min_db),
                              math.radians(self.theta_3db_deg))

    @property
    def fbl(self) -> FblParams:
        return FblParams(self.blocklength, self.xi)

    @property
    def approx(self) -> PiecewiseApprox:
        return _cached_piecewise(self.levels, self.delta, self.fbl)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


_PIECEWISE: dict = {}


def _cached_piecewise(levels, delta, fbl) -> PiecewiseApprox:
    key = (levels, delta, fbl)
    if key not in _PIECEWISE:
        _PIECEWISE[key] = build_piecewise(levels, delta, fbl)
    return _PIECEWISE[key]


# ------------------------------------------------------------ config files

def _parse_value(name: str, kind, text: str):
    text = text.strip()
    if name == "uav_positions":
        if text in ("", "none"):
            return ()
        pts = []
        for item in text.split(";"):
            x, y = item.split(",")
            pts.append((float(x), float(y)))
        return tuple(pts)
    if kind is bool or kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "los"):
            return True
        if low in ("0", "false", "no", "nlos"):
            return False
        raise ValueError(f"{name}: cannot read {text!r} as a boolean")
    if kind is int or kind == "int":
        v = float(text)
        if not v.is_integer():
            raise ValueError(f"{name}: expected an integer, got {text!r}")
        return int(v)
    return float(text)


def _field_kinds() -> dict:
    return {f.name: f.type for f in fields(ScenarioConfig)}


def apply_overrides(config: ScenarioConfig, pairs: dict[str, str]) -> ScenarioConfig:
    """Apply textual key=value overrides; unknown keys are errors."""
    kinds = _field_kinds()
    updates = {}
    for key, text in pairs.items():
        if key not in kinds:
            raise KeyError(f"unknown configuration key {key!r}")
        updates[key] = _parse_value(key, kinds[key], text)
    return replace(config, **updates)


def parse_config_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in pairs:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return apply_overrides(base or ScenarioConfig(), pairs)


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config_text(Path(path).read_text())


def dump_config(config: ScenarioConfig) -> str:
    lines = []
    for f in fields(ScenarioConfig):
        v = getattr(config, f.name)
        if f.name == "uav_positions":
            v = ";".join(f"{x:g},{y:g}" for x, y in v) or "none"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------- realizations

@dataclass(frozen=True)
class NetworkRealization:
    """One placement with every link descriptor the allocator needs.

    Index conventions: i D2D pair, j cellular user, u UAV.
      cell[j]            cellular j -> BS (desired)
      d2d[i]             D2D Tx i -> Rx i (desired)
      c_to_rx[i][j]      cellular j -> D2D Rx i (interference)
      d_to_bs[i]         D2D Tx i -> BS, beam on its own receiver
      d_to_uav[u][i]     D2D Tx i -> UAV u (relay uplink, desired)
      d_to_bs_relay[u][i] D2D Tx i -> BS, beam on UAV u
      c_to_uav[u][j]     cellular j -> UAV u (interference at the relay)
      uav_to_rx[u][i]    UAV u -> D2D Rx i (relay downlink, desired)
      uav_to_bs[u][i]    UAV u -> BS, beam on D2D Rx i
    Interference-plus-noise floors: ipn_bs, ipn_rx[i], ipn_uav[u].
    """

    config: ScenarioConfig
    seed: int
    bs: np.ndarray
    uavs: np.ndarray
    cellular: np.ndarray
    d2d_tx: np.ndarray
    d2d_rx: np.ndarray
    intercell_users: np.ndarray
    cell: tuple[LinkStats, ...]
    d2d: tuple[LinkStats, ...]
    c_to_rx: tuple[tuple[LinkStats, ...], ...]
    d_to_bs: tuple[LinkStats, ...]
    d_to_uav: tuple[tuple[LinkStats, ...], ...]
    d_to_bs_relay: tuple[tuple[LinkStats, ...], ...]
    c_to_uav: tuple[tuple[LinkStats, ...], ...]
    uav_to_rx: tuple[tuple[LinkStats, ...], ...]
    uav_to_bs: tuple[tuple[LinkStats, ...], ...]
    ipn_bs: float
    ipn_rx: tuple[float, ...]
    ipn_uav: tuple[float, ...]

    @property
    def num_d2d(self) -> int:
        return len(self.d2d)

    @property
    def num_cellular(self) -> int:
        return len(self.cell)

    @property
    def num_uavs(self) -> int:
        return len(self.uavs)

    def floor(self, ipn: float, cross: LinkStats) -> float:
        return interference_floor(ipn, cross.mean_gain, self.config.k_tilde)


class _LosDraws:
    """One uniform variate per physical (tx, rx) node pair.

    Comparing the same uniform against the model probability makes the
    realized LoS state monotone in that probability across sweeps that
    reuse the seed.
    """

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._u: dict = {}

    def __call__(self, key) -> float:
        if key not in self._u:
            self._u[key] = float(self._rng.random())
        return self._u[key]


def _uniform_in_square(rng, half: float, n: int) -> np.ndarray:
    return rng.uniform(-half, half, size=(n, 2))


def _place_receivers(rng, tx: np.ndarray, half: float, dist: float) -> np.ndarray:
    rx = np.empty_like(tx)
    for k, (x, y) in enumerate(tx):
        for _ in range(10_000):
            phi = rng.uniform(0.0, 2.0 * math.pi)
            px, py = x + dist * math.cos(phi), y + dist * math.sin(phi)
            if abs(px) <= half and abs(py) <= half:
                break
        else:  # pragma: no cover - needs dist close to the cell diagonal
            raise RuntimeError("could not place a receiver inside the cell")
        rx[k] = (px, py)
    return rx


def _lift(xy: np.ndarray, h: float) -> np.ndarray:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    return np.column_stack([xy, np.full(len(xy), h)])


def intercell_centers(config: ScenarioConfig) -> np.ndarray:
    r = config.cell_side * config.intercell_distance_factor
    return np.array([(r * math.cos(a), r * math.sin(a)) for a in RING_ANGLES[:config.intercell_cells]])


def intercell_floor(config: ScenarioConfig, receiver, los_flag: bool,
                    interferers: np.ndarray | None = None) -> float:
    """Noise plus intercell interference at ``receiver``.

    ``interferers`` holds the (x, y) of one co-channel user per active
    surrounding cell; the cell centres are used when it is omitted. Each
    transmits at the cellular cap through its mean path gain.
    """
    receiver = np.asarray(receiver, dtype=float)
    if interferers is None:
        interferers = intercell_centers(config)
    total = config.noise_w
    for xy in np.asarray(interferers, dtype=float).reshape(-1, 2)[:config.intercell_cells]:
        d = float(np.linalg.norm(receiver - np.array([xy[0], xy[1], 0.0])))
        total += config.p_cell_max * mean_path_gain(d, los_flag, config.path_loss)
    return total


def generate(config: ScenarioConfig, seed: int | None = None) -> NetworkRealization:
    """Random placement plus all link tables; deterministic given the seed."""
    seed = config.seed if seed is None else seed
    place_ss, los_ss, inter_ss = np.random.SeedSequence(seed).spawn(3)
    place = np.random.default_rng(place_ss)
    los_u = _LosDraws(np.random.default_rng(los_ss))
    inter = np.random.default_rng(inter_ss)
    half = config.cell_side / 2
    mc, md = config.num_cellular, config.num_d2d

    # draw counts do not depend on the sweep knobs, so sweeps share placements
    cell_xy = _uniform_in_square(place, half, mc)
    tx_xy = _uniform_in_square(place, half, md)
    rx_free = _uniform_in_square(place, half, md)
    if config.d2d_distance > 0:
        rx_xy = _place_receivers(place, tx_xy, half, config.d2d_distance)
    else:
        rx_xy = rx_free
    ring = intercell_centers(config)
    offsets = _uniform_in_square(inter, half, 6)[:len(ring)]
    inter_xy = ring + offsets if len(ring) else np.zeros((0, 2))

    bs = np.array([0.0, 0.0, config.bs_height])
    uavs = _lift(np.array(config.uav_positions, dtype=float), config.uav_height) \
        if config.uav_positions else np.zeros((0, 3))
    cellular = _lift(cell_xy, 0.0)
    tx = _lift(tx_xy, 0.0)
    rx = _lift(rx_xy, 0.0)

    shapes = config.fading_shapes
    pl, aer, gr, ant = config.path_loss, config.aerial, config.ground, config.antenna

    def link(src, dst, aim, link_class, key) -> LinkStats:
        """Directed link src -> dst with the transmit beam aimed at ``aim``."""
        d = float(np.linalg.norm(dst - src))
        if d <= 0:
            raise ValueError(f"coincident nodes for link {key}")
        if link_class == "nlos":
            is_los = False
        else:
            p = los_probability(src, dst, link_class, aer, gr)
            is_los = los_u(key) < p
        offset = 0.0 if aim is dst else angle_between(aim - src, dst - src)
        gain = mean_path_gain(d, is_los, pl) * antenna_gain(offset, ant)
        fading = FadingSpec.los(shapes[1]) if is_los else FadingSpec.nlos(shapes[0])
        elev = None
        if link_class == "aerial":
            elev = math.degrees(math.atan2(abs(dst[2] - src[2]), float(np.hypot(*(dst[:2] - src[:2])))))
        return LinkStats(gain, is_los, fading, d, elev)

    cell_links = tuple(link(cellular[j], bs, bs, "nlos", ("c", j, "bs")) for j in range(mc))
    d2d_links = tuple(link(tx[i], rx[i], rx[i], "terrestrial", ("t", i, "r", i)) for i in range(md))
    c_to_rx = tuple(tuple(link(cellular[j], rx[i], bs, "terrestrial", ("c", j, "r", i))
                          for j in range(mc)) for i in range(md))
    d_to_bs = tuple(link(tx[i], bs, rx[i], "nlos", ("t", i, "bs")) for i in range(md))
    d_to_uav = tuple(tuple(link(tx[i], uavs[u], uavs[u], "aerial", ("t", i, "u", u))
                           for i in range(md)) for u in range(len(uavs)))
    d_to_bs_relay = tuple(tuple(link(tx[i], bs, uavs[u], "nlos", ("t", i, "bs"))
                                for i in range(md)) for u in range(len(uavs)))
    c_to_uav = tuple(tuple(link(cellular[j], uavs[u], bs, "aerial", ("c", j, "u", u))
                           for j in range(mc)) for u in range(len(uavs)))
    uav_to_rx = tuple(tuple(link(uavs[u], rx[i], rx[i], "aerial", ("u", u, "r", i))
                            for i in range(md)) for u in range(len(uavs)))
    uav_to_bs = tuple(tuple(link(uavs[u], bs, rx[i], "aerial", ("u", u, "bs"))
                            for i in range(md)) for u in range(len(uavs)))

    los_flag = config.intercell_los
    ipn_bs = intercell_floor(config, bs, los_flag, inter_xy)
    ipn_rx = tuple(intercell_floor(config, rx[i], los_flag, inter_xy) for i in range(md))
    ipn_uav = tuple(intercell_floor(config, uavs[u], los_flag, inter_xy) for u in range(len(uavs)))

    return NetworkRealization(
        config=config, seed=seed, bs=bs, uavs=uavs, cellular=cellular, d2d_tx=tx, d2d_rx=rx,
        intercell_users=inter_xy, cell=cell_links, d2d=d2d_links, c_to_rx=c_to_rx,
        d_to_bs=d_to_bs, d_to_uav=d_to_uav, d_to_bs_relay=d_to_bs_relay, c_to_uav=c_to_uav,
        uav_to_rx=uav_to_rx, uav_to_bs=uav_to_bs, ipn_bs=ipn_bs, ipn_rx=ipn_rx, ipn_uav=ipn_uav)

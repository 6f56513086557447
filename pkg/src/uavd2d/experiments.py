"""Experiment runners behind the command line: parameter sweeps over seeded
realizations and the analytic-vs-Monte-Carlo validation grids.

Every sweep writes one CSV with a row per (sweep point, seed) followed by an
aggregated block whose ``seed`` column reads ``mean`` or ``stderr``.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import allocation as alloc
from .channel import FadingSpec
from .mcoracle import mc_decoding_error, mc_outage_curve
from .metrics import avg_decoding_error
from .outage import OutagePair, outage
from .scenario import ScenarioConfig, apply_overrides, generate, load_config

ALGORITHMS = ("alg1", "alg2", "greedy1", "greedy2")

HEIGHTS = tuple(range(100, 601, 50))
P_EPS_VALUES = (1e-6, 1e-5, 1e-4, 1e-3)
THETA_VALUES = (15.0, 25.0, 35.0)
CELL_COUNTS = (10, 12, 14, 16, 18)
D2D_COUNTS = (8, 10, 12)
DISTANCES = (200.0, 300.0, 400.0, 500.0, 600.0)
INTERCELL_COUNTS = (0, 1, 3, 6)
OPTIMALITY_SIZES = tuple((md, mc) for md in (2, 3) for mc in (4, 5, 6))
OUTAGE_SHAPES = (1, 2, 3)
OUTAGE_K_DB = (0.0, 6.0, 12.0)
OUTAGE_ALPHAS = tuple(np.logspace(-2, 2, 20))
ERROR_ZETAS = tuple(np.logspace(-4, 0, 15))
ERROR_FLOOR = 1e-4


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    overrides: tuple[tuple[str, str], ...] = ()
    seeds: tuple[int, ...] = (0,)
    out: str = "results"
    mc_samples: int = 10 ** 6
    config_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose from {', '.join(sorted(EXPERIMENTS))}")
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.mc_samples < 1:
            raise ValueError("mc-samples must be >= 1")

    def config(self) -> ScenarioConfig:
        base = load_config(self.config_path) if self.config_path else ScenarioConfig()
        return apply_overrides(base, dict(self.overrides))


def parse_seeds(text: str) -> tuple[int, ...]:
    """'3' -> (3,), '0..4' -> (0, 1, 2, 3, 4), '1,5,9' -> (1, 5, 9)."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("seed list is empty")
    return tuple(seeds)


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.10g}"


class CsvSink:
    """Row writer that flushes every record so partial runs stay usable."""

    def __init__(self, path: Path, header: list[str]):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self.header = header
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(header)
        self._fh.flush()

    def row(self, values: dict):
        self._w.writerow([fmt(values.get(h, "")) for h in self.header])
        self._fh.flush()

    def close(self):
        self._fh.close()


# ------------------------------------------------------------ per seed

def evaluate(net, algorithms: Iterable[str] = ALGORITHMS) -> dict:
    """Sum-rate, total power and relayed-rate ratio of each algorithm."""
    table = alloc.WeightTable(net)
    out = {}
    for name in algorithms:
        if name == "alg1":
            st = alloc.allocate_direct(net, table)
        elif name == "alg2":
            st = alloc.allocate_with_relays(net, table)
        else:
            st = alloc.allocate_greedy(net, name, table)
        out[f"rate_{name}"] = st.sum_rate
        out[f"power_{name}"] = st.total_power
        out[f"relay_ratio_{name}"] = st.relayed_rate / st.sum_rate if st.sum_rate > 0 else 0.0
    return out


def metric_columns(algorithms: Iterable[str] = ALGORITHMS) -> list[str]:
    cols = []
    for prefix in ("rate", "power", "relay_ratio"):
        cols += [f"{prefix}_{a}" for a in algorithms]
    return cols


@dataclass(frozen=True)
class SweepPoint:
    labels: dict
    overrides: dict


def run_sweep(points: list[SweepPoint], base: ScenarioConfig, seeds, path: Path,
              evaluator: Callable = evaluate, columns: list[str] | None = None,
              log=sys.stderr) -> tuple[list[dict], int]:
    """Evaluate every (point, seed); write rows then the aggregated block.

    Returns the per-seed records and the number of failed seeds.
    """
    columns = columns or metric_columns()
    label_cols = list(points[0].labels)
    sink = CsvSink(path, label_cols + ["seed"] + columns)
    records, failures = [], 0
    try:
        for pt in points:
            cfg = base.with_overrides(**pt.overrides) if pt.overrides else base
            for seed in seeds:
                try:
                    vals = evaluator(generate(cfg, seed))
                except Exception as exc:  # keep going; report at the end
                    failures += 1
                    print(f"seed {seed} at {pt.labels}: {exc}", file=log)
                    continue
                rec = {**pt.labels, "seed": seed, **vals}
                records.append(rec)
                sink.row(rec)
        for pt in points:
            mine = [r for r in records if all(r[k] == v for k, v in pt.labels.items())]
            if not mine:
                continue
            for stat in ("mean", "stderr"):
                row = {**pt.labels, "seed": stat}
                for c in columns:
                    xs = np.array([r[c] for r in mine], dtype=float)
                    if stat == "mean":
                        row[c] = xs.mean()
                    else:
                        row[c] = xs.std(ddof=1) / math.sqrt(xs.size) if xs.size > 1 else 0.0
                sink.row(row)
    finally:
        sink.close()
    return records, failures


def aggregate(records: list[dict], key: str, column: str) -> dict:
    """Mean of ``column`` grouped by ``key``."""
    groups: dict = {}
    for r in records:
        groups.setdefault(r[key], []).append(r[column])
    return {k: float(np.mean(v)) for k, v in groups.items()}


# ------------------------------------------------------------ sweeps

def height_points(heights=HEIGHTS) -> list[SweepPoint]:
    return [SweepPoint({"uav_height": float(h)}, {"uav_height": float(h)}) for h in heights]


def perr_points(p_values=P_EPS_VALUES, thetas=THETA_VALUES) -> list[SweepPoint]:
    return [SweepPoint({"theta_3db_deg": t, "p_eps": p}, {"theta_3db_deg": t, "p_eps": p})
            for t in thetas for p in p_values]


def users_points(cells=CELL_COUNTS, d2ds=D2D_COUNTS) -> list[SweepPoint]:
    return [SweepPoint({"num_d2d": md, "num_cellular": mc}, {"num_d2d": md, "num_cellular": mc})
            for md in d2ds for mc in cells]


def distance_points(base: ScenarioConfig, distances=DISTANCES) -> list[SweepPoint]:
    pts = []
    for nu in range(1, len(base.uav_positions) + 1):
        for d in distances:
            pts.append(SweepPoint({"num_uavs": nu, "d2d_distance": d},
                                  {"d2d_distance": d, "uav_positions": base.uav_positions[:nu]}))
    return pts


def multicell_points(counts=INTERCELL_COUNTS) -> list[SweepPoint]:
    pts = []
    for los in (True, False):
        for n in counts:
            pts.append(SweepPoint({"intercell_los": los, "intercell_cells": n},
                                  {"intercell_los": los, "intercell_cells": n}))
    return pts


def optimality_columns() -> list[str]:
    return ["rate_alg1", "rate_alg2", "rate_greedy1", "rate_greedy2",
            "rate_exhaustive", "rate_exhaustive_direct", "alg2_over_exhaustive"]


def evaluate_optimality(net) -> dict:
    table = alloc.WeightTable(net)
    ex = alloc.allocate_exhaustive(net, table)
    exd = alloc.allocate_exhaustive(net, table, direct_only=True)
    a2 = alloc.allocate_with_relays(net, table)
    return {
        "rate_alg1": alloc.allocate_direct(net, table).sum_rate,
        "rate_alg2": a2.sum_rate,
        "rate_greedy1": alloc.allocate_greedy(net, "greedy1", table).sum_rate,
        "rate_greedy2": alloc.allocate_greedy(net, "greedy2", table).sum_rate,
        "rate_exhaustive": ex.sum_rate,
        "rate_exhaustive_direct": exd.sum_rate,
        "alg2_over_exhaustive": a2.sum_rate / ex.sum_rate if ex.sum_rate > 0 else 1.0,
    }


def optimality_points(base: ScenarioConfig, overridden: set[str]) -> list[SweepPoint]:
    if {"num_d2d", "num_cellular"} & overridden:
        sizes = [(base.num_d2d, base.num_cellular)]
    else:
        sizes = list(OPTIMALITY_SIZES)
    for md, mc in sizes:
        if md > alloc.EXHAUSTIVE_MAX_D2D or mc > alloc.EXHAUSTIVE_MAX_CELL:
            raise ValueError(f"optimality needs M^d <= {alloc.EXHAUSTIVE_MAX_D2D} and "
                             f"M^c <= {alloc.EXHAUSTIVE_MAX_CELL}, got M^d={md}, M^c={mc}")
    one_uav = base.uav_positions[:1]
    return [SweepPoint({"num_d2d": md, "num_cellular": mc},
                       {"num_d2d": md, "num_cellular": mc, "uav_positions": one_uav})
            for md, mc in sizes]


# ------------------------------------------------------------ validation

def outage_grid(k_db=OUTAGE_K_DB, shapes=OUTAGE_SHAPES):
    """(kernel, main label, interferer label, OutagePair) for every curve."""
    los = [(f"K={k:g}dB", FadingSpec.los(10 ** (k / 10))) for k in k_db]
    nlos = [(f"m={m}", FadingSpec.nlos(m)) for m in shapes]
    grid = []
    for kernel, mains, ints in (("NN", nlos, nlos), ("LN", los, nlos),
                                ("NL", nlos, los), ("LL", los, los)):
        for lm, fm in mains:
            for li, fi in ints:
                grid.append((kernel, lm, li, OutagePair(fm, fi)))
    return grid


def validate_outage(path: Path, n: int, seed: int, alphas=OUTAGE_ALPHAS) -> float:
    sink = CsvSink(path, ["kernel", "main", "interferer", "alpha", "analytic", "mc",
                          "mc_stderr", "abs_err"])
    worst = 0.0
    try:
        for c, (kernel, lm, li, pair) in enumerate(outage_grid()):
            mc, se = mc_outage_curve(alphas, pair, n, seed * 1000 + c)
            for a, p, s in zip(alphas, mc, se):
                ana = outage(float(a), pair)
                err = abs(ana - p)
                worst = max(worst, err)
                sink.row({"kernel": kernel, "main": lm, "interferer": li, "alpha": a,
                          "analytic": ana, "mc": p, "mc_stderr": s, "abs_err": err})
        sink.row({"kernel": "max", "abs_err": worst})
    finally:
        sink.close()
    return worst


def validate_error(path: Path, config: ScenarioConfig, n: int, seed: int,
                   zetas=ERROR_ZETAS) -> float:
    """avg_decoding_error against Monte-Carlo; returns the worst relative
    error over points whose value is at least ERROR_FLOOR."""
    k = config.rician_k
    m = config.nakagami_m
    sink = CsvSink(path, ["interferer", "zeta", "analytic", "mc", "mc_stderr", "rel_err",
                          "assessed"])
    worst = 0.0
    try:
        for c, (label, spec) in enumerate((("LoS", FadingSpec.los(k)), ("NLoS", FadingSpec.nlos(m)))):
            for z in zetas:
                ana = avg_decoding_error(float(z), spec, m, config.approx)
                est = mc_decoding_error(float(z), spec, m, config.fbl, n, seed * 1000 + c)
                rel = abs(ana - est.mean) / est.mean if est.mean > 0 else math.inf
                assessed = max(ana, est.mean) >= ERROR_FLOOR
                if assessed:
                    worst = max(worst, rel)
                sink.row({"interferer": label, "zeta": z, "analytic": ana, "mc": est.mean,
                          "mc_stderr": est.stderr, "rel_err": rel, "assessed": assessed})
        sink.row({"interferer": "max", "rel_err": worst})
    finally:
        sink.close()
    return worst


# ------------------------------------------------------------ dispatch

def _solve(spec: ExperimentSpec, out: Path) -> tuple[str, int]:
    cfg = spec.config()
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for seed in spec.seeds:
        net = generate(cfg, seed)
        table = alloc.WeightTable(net)
        states = {
            "alg1": alloc.allocate_direct(net, table),
            "alg2": alloc.allocate_with_relays(net, table),
            "greedy1": alloc.allocate_greedy(net, "greedy1", table),
            "greedy2": alloc.allocate_greedy(net, "greedy2", table),
        }
        for name, st in states.items():
            buf.write(f"# seed={seed} algorithm={name}\n")
            buf.write(st.to_text())
    text = buf.getvalue()
    (out / "solve.txt").write_text(text)
    return text, 0


def run(spec: ExperimentSpec, log=sys.stderr) -> tuple[str, int]:
    """Run one experiment; returns (summary text, number of failed seeds)."""
    out = Path(spec.out)
    cfg = spec.config()
    exp = spec.experiment
    if exp == "solve":
        return _solve(spec, out)
    if exp == "validate-outage":
        worst = validate_outage(out / "validate-outage.csv", spec.mc_samples, spec.seeds[0])
        return f"validate-outage: max |analytic - MC| = {worst:.3e}", 0
    if exp == "validate-error":
        worst = validate_error(out / "validate-error.csv", cfg, spec.mc_samples, spec.seeds[0])
        return f"validate-error: max relative error (values >= {ERROR_FLOOR:g}) = {worst:.3f}", 0
    if exp == "optimality":
        points = optimality_points(cfg, {k for k, _ in spec.overrides})
        recs, bad = run_sweep(points, cfg, spec.seeds, out / "optimality.csv",
                              evaluate_optimality, optimality_columns(), log)
        worst = min((r["alg2_over_exhaustive"] for r in recs), default=math.nan)
        return f"optimality: min Alg2/exhaustive = {worst:.4f} over {len(recs)} instances", bad
    builders = {
        "sweep-height": lambda: height_points(),
        "sweep-perr": lambda: perr_points(),
        "sweep-users": lambda: users_points(),
        "sweep-distance": lambda: distance_points(cfg),
        "multicell": lambda: multicell_points(),
    }
    recs, bad = run_sweep(builders[exp](), cfg, spec.seeds, out / f"{exp}.csv", log=log)
    return f"{exp}: {len(recs)} records written to {out / (exp + '.csv')}", bad


EXPERIMENTS = {
    "validate-outage": "analytic outage kernels against Monte-Carlo",
    "validate-error": "piecewise average decoding error against Monte-Carlo",
    "sweep-height": "sum-rate versus UAV height",
    "sweep-perr": "sum-rate versus cellular error target and beamwidth",
    "sweep-users": "sum-rate versus numbers of cellular users and D2D pairs",
    "sweep-distance": "sum-rate versus D2D pair distance and UAV count",
    "multicell": "sum-rate versus LoS/NLoS intercell interference",
    "optimality": "Algorithm 2 and baselines against exhaustive search",
    "solve": "allocate one scenario and dump the matching",
}

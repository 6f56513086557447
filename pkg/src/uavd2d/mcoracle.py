"""Monte-Carlo estimators used as independent references.

Samples are drawn in fixed-size chunks; chunk ``c`` of a run seeded with
``seed`` uses its own generator keyed by (seed, c), so an estimate depends
only on (seed, N) and not on how the chunks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import FadingSpec
from .metrics import FblParams, epsilon_n
from .outage import OutagePair

CHUNK = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    count: int
    seed: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("need at least one sample")

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(value - self.mean) <= sigmas * self.stderr


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def sample_fading(spec: FadingSpec, rng: np.random.Generator, size=None):
    """Unit-mean power samples: Rician power for LoS, Gamma(m, 1/m) for NLoS."""
    if spec.is_los:
        k = spec.k_factor
        re = rng.standard_normal(size) / math.sqrt(2.0 * (k + 1.0)) + math.sqrt(k / (k + 1.0))
        im = rng.standard_normal(size) / math.sqrt(2.0 * (k + 1.0))
        return re * re + im * im
    return rng.gamma(spec.m, 1.0 / spec.m, size)


def _run(stat: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int) -> McEstimate:
    # per-chunk sums merged in chunk order
    total = 0.0
    total_sq = 0.0
    for c, start in enumerate(range(0, n, CHUNK)):
        vals = np.asarray(stat(chunk_rng(seed, c), min(CHUNK, n - start)), dtype=float)
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
    mean = total / n
    var = max(0.0, total_sq / n - mean * mean) * n / (n - 1) if n > 1 else 0.0
    return McEstimate(mean, math.sqrt(var / n), n, seed)


def mc_outage(alpha: float, pair: OutagePair, n: int, seed: int) -> McEstimate:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")

    def stat(rng, size):
        y = sample_fading(pair.main, rng, size)
        x = sample_fading(pair.interferer, rng, size)
        return y < alpha * x

    return _run(stat, n, seed)


def mc_outage_curve(alphas, pair: OutagePair, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Outage at many alpha values from one shared set of draws."""
    alphas = np.asarray(alphas, dtype=float)
    hits = np.zeros(alphas.size)
    for c, start in enumerate(range(0, n, CHUNK)):
        rng = chunk_rng(seed, c)
        size = min(CHUNK, n - start)
        ratio = sample_fading(pair.main, rng, size) / sample_fading(pair.interferer, rng, size)
        ratio.sort()
        hits += np.searchsorted(ratio, alphas, side="left")
    p = hits / n
    return p, np.sqrt(np.maximum(p * (1.0 - p), 0.0) / n)


def mc_decoding_error(zeta: float, interferer: FadingSpec, m_cell: int,
                      fbl: FblParams, n: int, seed: int) -> McEstimate:
    """E[eps_n(y / (zeta x))] with a Nakagami(m_cell) desired link."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    main = FadingSpec.nlos(m_cell)

    def stat(rng, size):
        y = sample_fading(main, rng, size)
        x = sample_fading(interferer, rng, size)
        return epsilon_n(y / (zeta * x), fbl)

    return _run(stat, n, seed)


def mc_ergodic_capacity(zeta, pair, n: int, seed: int) -> McEstimate:
    """E[log2(1 + SIR)].

    ``zeta`` and ``pair`` are either a single value and OutagePair, or
    two-tuples (uplink, downlink) for a decode-and-forward relay, in which
    case the weaker leg sets the rate.
    """
    if isinstance(pair, OutagePair):
        legs = [(float(zeta), pair)]
    else:
        legs = list(zip(zeta, pair))
    if any(not z > 0 for z, _ in legs):
        raise ValueError("zeta must be positive")

    def stat(rng, size):
        sir = np.full(size, np.inf)
        for z, p in legs:
            y = sample_fading(p.main, rng, size)
            x = sample_fading(p.interferer, rng, size)
            sir = np.minimum(sir, y / (z * x))
        return np.log2(1.0 + sir)

    return _run(stat, n, seed)

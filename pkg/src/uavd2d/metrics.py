"""Ergodic capacity and finite-blocklength decoding error.

Capacity uses the tail identity E[log2(1+g)] = (1/ln2) int (1-F(t))/(1+t) dt
with F the SIR outage curve. Reliability uses the normal approximation
eps_n(g) = Q(u(g)) and its L-level piecewise-linear surrogate, whose fading
average has a closed form through H(alpha, gamma) = int_0^gamma O(alpha t) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .channel import FadingSpec
from .numerics import (QuadratureSpec, RootBracket, gauss_2f1, gaussian_q,
                       gaussian_q_inverse, integrate, solve_monotone)
from .outage import OutagePair, _poisson_tables, outage, outage_cellular

LN2 = math.log(2.0)


# ---------------------------------------------------------------- capacity

def ergodic_capacity(outage_curve: Callable, zeta: float,
                     spec: QuadratureSpec = QuadratureSpec()) -> float:
    """(1/ln2) int_0^inf [1 - O(zeta g)] / (1 + g) dg, in bits/s/Hz.

    Integrated in s = ln g, where the weight 1/(1+g) dg becomes the
    logistic density; the range is split at s = -ln(zeta) so that each
    half is a decaying semi-infinite integral.
    """
    if not zeta > 0 or math.isinf(zeta):
        raise ValueError(f"zeta must be positive and finite, got {zeta}")
    s0 = -math.log(zeta)

    # t >= 0 measures ln(alpha) = ln(zeta g) away from the split point
    def right(t):
        t = np.asarray(t)
        return (1.0 - np.asarray(outage_curve(np.exp(np.minimum(t, 700.0))))) * _logistic(s0 + t)

    def left(t):
        t = np.asarray(t)
        return (1.0 - np.asarray(outage_curve(np.exp(-t)))) * _logistic(s0 - t)

    total = integrate(right, 0.0, math.inf, spec) + integrate(left, 0.0, math.inf, spec)
    return max(0.0, total / LN2)


def _logistic(s):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(s, dtype=float)))


def capacity_cellular(zeta: float, interferer: FadingSpec, m_cell: int) -> float:
    return ergodic_capacity(lambda a: outage_cellular(a, interferer, m_cell), zeta)


def capacity_d2d_direct(zeta: float, pair: OutagePair) -> float:
    return ergodic_capacity(lambda a: outage(a, pair), zeta)


def capacity_d2d_relayed(zeta_u: float, zeta_d: float,
                         pair_u: OutagePair, pair_d: OutagePair) -> float:
    """DF relay: the end-to-end SIR is the weaker leg; both legs run at once
    on orthogonal subchannels so there is no 1/2 pre-log."""
    if not (zeta_u > 0 and zeta_d > 0):
        raise ValueError("zeta values must be positive")

    def curve(a):
        su = 1.0 - np.asarray(outage(a * zeta_u, pair_u))
        sd = 1.0 - np.asarray(outage(a * zeta_d, pair_d))
        return 1.0 - su * sd

    return ergodic_capacity(curve, 1.0)


class SurvivalTable:
    """1 - O(alpha) sampled on a uniform ln(alpha) grid.

    Gives fast batched capacities for the allocation layer, where thousands
    of (zeta_u, zeta_d) combinations share a handful of fading pairs. Linear
    interpolation error on the default grid is ~1e-6 in capacity; the
    adaptive functions above remain the reference path.
    """

    def __init__(self, curve: Callable, lo: float = -40.0, hi: float = 32.0,
                 step: float = 0.004):
        self.u = np.arange(lo, hi + step / 2, step)
        self.s = 1.0 - np.asarray(curve(np.exp(self.u)), dtype=float)

    def __call__(self, log_alpha):
        return np.interp(log_alpha, self.u, self.s, left=1.0, right=0.0)


@lru_cache(maxsize=256)
def survival_table(pair: OutagePair) -> SurvivalTable:
    return SurvivalTable(lambda a: outage(a, pair))


_S_STEP = 0.02


def _s_grid(log_zetas: np.ndarray) -> np.ndarray:
    hi = 34.0 + max(0.0, float(np.max(-log_zetas)))
    lo = -34.0 + min(0.0, float(np.min(-log_zetas)))
    return np.arange(lo, hi + _S_STEP / 2, _S_STEP)


def capacity_batch(zetas, pair: OutagePair) -> np.ndarray:
    """Tabulated capacity for many zeta values against one fading pair."""
    lz = np.log(np.atleast_1d(np.asarray(zetas, dtype=float)))
    s = _s_grid(lz)
    w = _logistic(s) * (_S_STEP / LN2)
    tab = survival_table(pair)
    surv = tab(lz[:, None] + s[None, :])
    return surv @ w


def capacity_relayed_batch(zetas_u, zetas_d, pair_u: OutagePair,
                           pair_d: OutagePair) -> np.ndarray:
    """Tabulated relayed capacity for every combination (zeta_u[a], zeta_d[b])."""
    lu = np.log(np.atleast_1d(np.asarray(zetas_u, dtype=float)))
    ld = np.log(np.atleast_1d(np.asarray(zetas_d, dtype=float)))
    s = _s_grid(np.concatenate([lu, ld]))
    w = _logistic(s) * (_S_STEP / LN2)
    su = survival_table(pair_u)(lu[:, None] + s[None, :])
    sd = survival_table(pair_d)(ld[:, None] + s[None, :])
    return (su * w) @ sd.T


# ------------------------------------------------------ finite blocklength

@dataclass(frozen=True)
class FblParams:
    n: int = 50
    xi: float = 0.8

    def __post_init__(self):
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError(f"blocklength must be a positive integer, got {self.n}")
        if not 0.0 < self.xi < 1.0:
            raise ValueError(f"xi must lie in (0, 1), got {self.xi}")


def _u(gamma: np.ndarray, fbl: FblParams) -> np.ndarray:
    # 1 - (1+g)^-2 = g (2+g) / (1+g)^2, kept in this form for small g
    c = (1.0 - fbl.xi) * math.sqrt(fbl.n) / LN2
    return c * np.log1p(gamma) * (1.0 + gamma) / np.sqrt(gamma * (2.0 + gamma))


def epsilon_n(gamma, fbl: FblParams = FblParams()):
    """Block error probability Q(u(gamma)) at rate xi log2(1+gamma)."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("SINR must be >= 0")
    small = g < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        u = _u(np.where(small, 1.0, g), fbl)
    out = np.where(small, 0.5, gaussian_q(np.where(np.isinf(g), np.inf, u)))
    return float(out) if out.ndim == 0 else out


def epsilon_inverse(eps: float, fbl: FblParams = FblParams()) -> float:
    """SINR at which epsilon_n equals eps, by root-finding in ln(gamma)."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    target = gaussian_q_inverse(eps)
    # u is increasing in gamma, so solve u(e^s) = Q^-1(eps) instead of
    # working with probabilities that span many decades
    f = lambda s: float(_u(np.asarray(math.exp(s)), fbl))
    s = solve_monotone(f, RootBracket(-20.0, 5.0, target, increasing=True),
                       xtol=1e-14, expand=True)
    return math.exp(s)


def rate_normal_approx(gamma: float, n: int, eps: float) -> float:
    """R*(n, eps) = C - sqrt(V/n) Q^-1(eps) in bits per channel use."""
    if gamma < 0 or n < 1 or not 0 < eps < 1:
        raise ValueError("need gamma >= 0, n >= 1, 0 < eps < 1")
    cap = math.log2(1.0 + gamma)
    disp = (1.0 - (1.0 + gamma) ** -2) * math.log2(math.e) ** 2
    return cap - math.sqrt(disp / n) * gaussian_q_inverse(eps)


@dataclass(frozen=True)
class PiecewiseApprox:
    """L-level chord approximation of epsilon_n.

    ``breakpoints`` holds gamma_0 = 0 .. gamma_L; ``slopes[i-1]`` is the
    magnitude of the slope on segment i, so the surrogate drops 0.5/L over
    each segment and is 0 beyond gamma_L.
    """

    levels: int
    delta: float
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    fbl: FblParams

    def __post_init__(self):
        if len(self.breakpoints) != self.levels + 1 or len(self.slopes) != self.levels:
            raise ValueError("breakpoint/slope counts disagree with L")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must increase")

    def __call__(self, gamma):
        """Surrogate value at gamma."""
        g = np.asarray(gamma, dtype=float)
        bp = np.asarray(self.breakpoints)
        vals = 0.5 * (1.0 - np.arange(self.levels + 1) / self.levels)
        vals[-1] = 0.0
        out = np.interp(g, bp, vals, right=0.0)
        return float(out) if out.ndim == 0 else out


def build_piecewise(levels: int = 4, delta: float | None = None,
                    fbl: FblParams = FblParams()) -> PiecewiseApprox:
    if levels < 2:
        raise ValueError("need at least two levels")
    if delta is None:
        delta = 0.5 / (100 * levels)
    if not 0.0 < delta < 0.5 / levels:
        raise ValueError(f"delta must lie in (0, 0.5/L), got {delta}")
    bp = [0.0]
    for i in range(1, levels):
        bp.append(epsilon_inverse(0.5 * (1.0 - i / levels), fbl))
    bp.append(epsilon_inverse(delta, fbl))
    step = 0.5 / levels
    slopes = tuple(step / (b - a) for a, b in zip(bp, bp[1:]))
    return PiecewiseApprox(levels, delta, tuple(bp), slopes, fbl)


# ------------------------------------------------------------- H functions

def h_n(alpha: float, gamma: float, m: int, m_prime: int) -> float:
    """int_0^gamma O_NN(alpha t) dt in closed form."""
    if alpha < 0 or gamma < 0:
        raise ValueError("alpha and gamma must be >= 0")
    if gamma == 0 or alpha == 0:
        return 0.0
    z = -m * alpha * gamma / m_prime
    acc = 0.0
    for k in range(m):
        log_c = (gammaln(k + m_prime) - gammaln(m_prime) + k * math.log(m * alpha)
                 + (k + 1) * math.log(gamma) - gammaln(k + 2) - k * math.log(m_prime))
        acc += math.exp(log_c) * gauss_2f1(k + 1, k + m_prime, k + 2, z)
    return max(0.0, gamma - acc)


def h_l(alpha: float, gamma: float, m: int, k_factor: float) -> float:
    """int_0^gamma O_NL(alpha t) dt in closed form.

    The double sum over the Poisson index j and k <= j is reordered as a
    single sum over k weighted by the Poisson(K) survival P(j >= k).
    """
    if alpha < 0 or gamma < 0:
        raise ValueError("alpha and gamma must be >= 0")
    if gamma == 0 or alpha == 0:
        return 0.0
    _, sf = _poisson_tables(k_factor)
    z = -m * alpha * gamma / (k_factor + 1.0)
    log_pre = (m * math.log(m * alpha) + (m + 1) * math.log(gamma) - gammaln(m)
               - m * math.log(k_factor + 1.0) - math.log(m + 1.0))
    acc = 0.0
    for k in range(sf.size):
        if sf[k] < 1e-300:
            break
        term = math.exp(gammaln(k + m) - gammaln(k + 1)) * sf[k] * gauss_2f1(m + 1, m + k, m + 2, z)
        acc += term
        if k > k_factor and term < 1e-16 * acc:
            break
    return min(gamma, math.exp(log_pre) * acc)


def h_cellular(alpha: float, gamma: float, interferer: FadingSpec, m_cell: int) -> float:
    if interferer.is_los:
        return h_l(alpha, gamma, m_cell, interferer.k_factor)
    return h_n(alpha, gamma, m_cell, interferer.m)


def avg_decoding_error(zeta: float, interferer: FadingSpec, m_cell: int,
                       approx: PiecewiseApprox) -> float:
    """Fading average of the piecewise surrogate of epsilon_n at SIR y/(zeta x).

    With slopes w_1..w_L on segments [gamma_{i-1}, gamma_i] the average is
    sum_i w_i [H(gamma_i) - H(gamma_{i-1})], evaluated in telescoped form so
    that every coefficient is non-negative.
    """
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    if math.isinf(zeta):
        return 0.5
    w = approx.slopes
    g = approx.breakpoints
    hs = [h_cellular(zeta, g[i], interferer, m_cell) for i in range(1, approx.levels + 1)]
    total = w[-1] * hs[-1]
    for i in range(approx.levels - 1):
        total += (w[i] - w[i + 1]) * hs[i]
    return min(0.5, max(0.0, total))

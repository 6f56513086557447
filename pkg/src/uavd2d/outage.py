"""Outage kernels Pr{y < alpha x} for unit-mean Rician / Nakagami variates.

``y`` is the fading of the desired link, ``x`` that of the interferer.
All kernels broadcast over ``alpha`` and return a float for scalar input.

The Rician/Nakagami kernels are evaluated through the Poisson-mixture form
of the Rician power law: ``(K+1) y`` is Gamma(1+j) distributed with
``j ~ Poisson(K)``. Conditioning on the mixture index turns every kernel
into a finite combination of negative-binomial probabilities weighted by
Poisson survival terms, which is the double series obtained by expanding
the Bessel function term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .channel import FadingSpec
from .numerics import QuadratureSpec, SeriesError, bessel_i0e, gauss_2f1, integrate, marcum_q1

_POISSON_CAP = 500


@dataclass(frozen=True)
class OutagePair:
    main: FadingSpec
    interferer: FadingSpec

    def __str__(self):
        return f"{self.main}/{self.interferer}"


def zeta(p_interferer: float, mean_interf_gain: float, p_main: float, mean_main_gain: float) -> float:
    """Interference-to-signal mean power ratio p' E[h'] / (p E[h])."""
    for v in (p_interferer, mean_interf_gain, p_main, mean_main_gain):
        if not v > 0:
            raise ValueError("zeta needs strictly positive powers and gains")
    return p_interferer * mean_interf_gain / (p_main * mean_main_gain)


def _finish(out, alpha):
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(alpha) == 0 else out


@lru_cache(maxsize=64)
def _poisson_tables(k_factor: float) -> tuple[np.ndarray, np.ndarray]:
    """Poisson(K) pmf and survival P(N >= k) for k = 0..kmax."""
    kmax = int(math.ceil(k_factor + 14.0 * math.sqrt(k_factor) + 45.0))
    if kmax > _POISSON_CAP:
        raise SeriesError(f"Rician K={k_factor} needs {kmax} Poisson terms (cap {_POISSON_CAP})")
    k = np.arange(kmax + 1)
    if k_factor == 0.0:
        pmf = (k == 0).astype(float)
    else:
        pmf = np.exp(k * math.log(k_factor) - k_factor - gammaln(k + 1))
    sf = np.cumsum(pmf[::-1])[::-1]
    sf.setflags(write=False)
    pmf.setflags(write=False)
    return pmf, sf


def _log_nb(k: np.ndarray, shape, theta: np.ndarray) -> np.ndarray:
    """log of the negative-binomial pmf C(k+s-1, k) theta^k (1-theta)^s."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (gammaln(k + shape) - gammaln(k + 1) - gammaln(shape)
               + np.where(k == 0, 0.0, k * np.log(theta))
               + shape * np.log1p(-theta))
    return out


def _check_m(m):
    if m < 1 or not float(m).is_integer():
        raise ValueError(f"Nakagami m must be a positive integer, got {m}")
    return int(m)


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0) or np.any(np.isnan(a)):
        raise ValueError("alpha must be >= 0")
    return a


def outage_nn(alpha, m: int, m_prime: int):
    """Nakagami(m) desired link against a Nakagami(m') interferer."""
    m, m_prime = _check_m(m), _check_m(m_prime)
    a = _check_alpha(alpha)
    k = np.arange(m)
    with np.errstate(invalid="ignore", over="ignore"):
        theta = (m * a / (m_prime + m * a))[..., None]
        s = np.exp(_log_nb(k, m_prime, theta)).sum(axis=-1)
    s = np.where(np.isinf(a), 0.0, s)
    return _finish(1.0 - s, alpha)


def _rician_vs_gamma_survival(a_eff: np.ndarray, k_factor: float, shape: float) -> np.ndarray:
    """P(y >= a x) for y unit-mean Rician(K) and x ~ Gamma(shape, rate=1).

    ``a_eff`` is the already scaled argument a (K+1).
    """
    _, sf = _poisson_tables(k_factor)
    k = np.arange(sf.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = a_eff / (1.0 + a_eff)
    theta = np.where(np.isinf(a_eff), 1.0, theta)[..., None]
    nb = np.exp(_log_nb(k, shape, theta))
    return (nb * sf).sum(axis=-1)


def outage_ln(alpha, k_factor: float, m: int):
    """Rician(K) desired link against a Nakagami(m) interferer."""
    m = _check_m(m)
    if k_factor < 0:
        raise ValueError("K must be >= 0")
    a = _check_alpha(alpha)
    s = _rician_vs_gamma_survival(a * (k_factor + 1.0) / m, k_factor, m)
    return _finish(1.0 - s, alpha)


def outage_nl(alpha, m: int, k_factor: float):
    """Nakagami(m) desired link against a Rician(K) interferer.

    Equal to 1 - outage_ln(1/alpha, K, m); alpha = 0 gives 0.
    """
    m = _check_m(m)
    if k_factor < 0:
        raise ValueError("K must be >= 0")
    a = _check_alpha(alpha)
    # P(y_N < a x_L) = P(x_L >= y_N / a) with the roles swapped
    with np.errstate(divide="ignore"):
        inv = np.where(a == 0, np.inf, (k_factor + 1.0) / (m * a))
    s = _rician_vs_gamma_survival(inv, k_factor, m)
    return _finish(s, alpha)


def outage_ll(alpha, k_factor: float, k_prime: float, chunk: int = 512):
    """Rician(K) desired link against a Rician(K') interferer.

    Mixes the Rician-vs-Gamma kernel over the interferer's Poisson index.
    """
    if k_factor < 0 or k_prime < 0:
        raise ValueError("K must be >= 0")
    a = _check_alpha(alpha)
    flat = a.reshape(-1)
    pmf_i, _ = _poisson_tables(k_prime)
    keep = pmf_i > 1e-18 * pmf_i.max()
    shapes = np.arange(pmf_i.size)[keep] + 1.0
    weights = pmf_i[keep]
    out = np.empty_like(flat)
    for start in range(0, flat.size, chunk):
        block = flat[start:start + chunk]
        a_eff = block[:, None] * (k_factor + 1.0) / (k_prime + 1.0)
        _, sf = _poisson_tables(k_factor)
        k = np.arange(sf.size)
        with np.errstate(invalid="ignore", divide="ignore"):
            theta = a_eff / (1.0 + a_eff)
        theta = np.where(np.isinf(a_eff), 1.0, theta)[..., None]
        nb = np.exp(_log_nb(k, shapes[None, :, None], theta))
        surv = (nb * sf).sum(axis=-1) @ weights
        out[start:start + chunk] = surv
    return _finish(1.0 - out.reshape(a.shape), alpha)


def rician_pdf(x, k_factor: float):
    x = np.asarray(x, dtype=float)
    z = 2.0 * np.sqrt(k_factor * (k_factor + 1.0) * x)
    i0e = np.vectorize(bessel_i0e)(z)
    return (k_factor + 1.0) * np.exp(-k_factor - (k_factor + 1.0) * x + z) * i0e


def rician_cdf(t: float, k_factor: float) -> float:
    return 1.0 - marcum_q1(math.sqrt(2.0 * k_factor), math.sqrt(2.0 * (k_factor + 1.0) * t))


def outage_ll_quadrature(alpha: float, k_factor: float, k_prime: float) -> float:
    """Independent LoS/LoS evaluator: integral of f_R(x; K') F_R(alpha x; K)."""
    if alpha == 0:
        return 0.0
    cdf = np.vectorize(lambda t: rician_cdf(t, k_factor))

    def f(x):
        return rician_pdf(x, k_prime) * cdf(alpha * x)

    # split where the interferer density lives
    spec = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)
    edge = 1.0 + 8.0 / math.sqrt(k_prime + 1.0)
    return min(1.0, integrate(f, 0.0, edge, spec) + integrate(f, edge, math.inf, spec))


def outage_ll_printed(alpha: float, k_factor: float, k_prime: float,
                      terms: int = 120) -> float:
    """The closed-form ratio-of-Rician double series exactly as printed.

    Kept only to document how it compares with the exact kernel: it agrees
    for K = K' = 0 but not in general (see tests/test_outage.py).
    """
    base = alpha * (k_factor + 1.0) + (k_prime + 1.0)
    r2 = k_prime * (k_prime + 1.0) / base ** 2
    z = alpha * k_factor / (2.0 * k_prime * (k_prime + 1.0)) if k_prime > 0 else 0.0
    total = 0.0
    for mm in range(terms):
        outer = math.exp(mm * math.log(k_factor) - math.lgamma(mm + 1)) if k_factor > 0 else float(mm == 0)
        if outer == 0.0:
            continue
        inner = 0.0
        for n in range(terms):
            if r2 == 0.0 and n > 0:
                break
            inner += math.exp(n * math.log(r2) - math.lgamma(n + 1)) * gauss_2f1(-n, -n, mm + 1, z) \
                if r2 > 0 else 1.0
        total += outer * inner
    return 1.0 - (k_prime + 1.0) * math.exp(-k_factor - k_prime) / base * total


def outage(alpha, pair: OutagePair):
    main, intf = pair.main, pair.interferer
    if main.is_los and intf.is_los:
        return outage_ll(alpha, main.shape, intf.shape)
    if main.is_los:
        return outage_ln(alpha, main.shape, intf.shape)
    if intf.is_los:
        return outage_nl(alpha, main.shape, intf.shape)
    return outage_nn(alpha, main.shape, intf.shape)


def outage_cellular(alpha, interferer: FadingSpec, m_cell: int):
    """Cellular uplink outage: the BS link is always Nakagami."""
    return outage(alpha, OutagePair(FadingSpec.nlos(m_cell), interferer))


def outage_relayed(alpha_u, alpha_d, pair_u: OutagePair, pair_d: OutagePair):
    """Decode-and-forward outage: either leg failing fails the link."""
    ou = np.asarray(outage(alpha_u, pair_u))
    od = np.asarray(outage(alpha_d, pair_d))
    out = 1.0 - (1.0 - ou) * (1.0 - od)
    return float(out) if out.ndim == 0 else out

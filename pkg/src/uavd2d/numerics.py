"""Special functions, adaptive quadrature and monotone root finding.

Everything here is a pure function of its arguments. Functions that are
used inside vectorised hot paths (``gaussian_q``) accept numpy arrays; the
rest are scalar.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature cannot meet its tolerance."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class SeriesError(RuntimeError):
    """Raised when a series fails to converge within its iteration cap."""


class BracketError(RuntimeError):
    """Raised when a root cannot be bracketed."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    tail_transform: bool = True

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class RootBracket:
    lower: float
    upper: float
    target: float
    increasing: bool = True

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty bracket [{self.lower}, {self.upper}]")


# ---------------------------------------------------------------------------
# Gaussian tail


def gaussian_q(x):
    """Upper tail of the standard normal, Q(x) = P(Z > x). Array friendly."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_q_inverse(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"gaussian_q_inverse needs 0 < p < 1, got {p}")
    x = math.sqrt(2.0) * float(special.erfcinv(2.0 * p))
    # two Newton steps on log Q polish the last few ulps in the deep tail
    for _ in range(2):
        q = gaussian_q(x)
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if q <= 0.0 or pdf <= 0.0:
            break
        x += (q - p) / pdf if abs(x) < 5 else q * math.log(q / p) / pdf
    return x


# ---------------------------------------------------------------------------
# Modified Bessel functions


def bessel_i0e(x: float) -> float:
    """Exponentially scaled I0: exp(-x) * I0(x) for x >= 0."""
    if x < 0:
        raise ValueError("bessel_i0e is defined for x >= 0 here")
    if x <= 30.0:
        q = 0.25 * x * x
        term, total, k = 1.0, 1.0, 0
        while True:
            k += 1
            term *= q / (k * k)
            total += term
            if term < 1e-17 * total:
                break
        return total * math.exp(-x)
    # Hankel asymptotic series; terms keep shrinking well past k = 30 for x > 30
    term, total = 1.0, 1.0
    for k in range(1, 60):
        term *= (2 * k - 1) ** 2 / (8.0 * x * k)
        total += term
        if term < 1e-17 * total:
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i0(x: float) -> float:
    if x < 0:
        raise ValueError("bessel_i0 is defined for x >= 0 here")
    if x > 700.0:
        return math.inf
    return bessel_i0e(x) * math.exp(x)


def _scaled_bessel_sequence(x: float, n: int) -> np.ndarray:
    """exp(-x) I_k(x) for k = 0..n via Miller's backward recurrence."""
    out = np.zeros(n + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    start = n + 20 + int(math.sqrt(40.0 * (n + x)))
    i_next, i_cur = 0.0, 1e-300
    for k in range(start, 0, -1):
        i_prev = (2.0 * k / x) * i_cur + i_next
        i_next, i_cur = i_cur, i_prev
        if k - 1 <= n:
            out[k - 1] = i_cur
        if abs(i_cur) > 1e250:
            out *= 1e-250
            i_next *= 1e-250
            i_cur *= 1e-250
    return out * (bessel_i0e(x) / out[0])


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q function Q1(a, b) for a, b >= 0.

    Uses the Bessel series ``exp(-(a-b)^2/2) sum (a/b)^k e^{-ab} I_k(ab)``
    (or its complement when a > b) with the scaled Bessel terms generated
    by backward recurrence.
    """
    if a < 0 or b < 0:
        raise ValueError("marcum_q1 needs a, b >= 0")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    x = a * b
    lead = math.exp(-0.5 * (a - b) ** 2)
    if lead == 0.0:
        return 1.0 if a > b else 0.0
    if a == b:
        return min(1.0, 0.5 + 0.5 * bessel_i0e(x))
    r = a / b if a < b else b / a
    n = int(x + 12.0 * math.sqrt(x + 1.0) + 40.0)
    if r < 1.0:
        n = min(n, int(40.0 / max(-math.log(r), 1e-12)) + 40)
    n = max(n, 40)
    scaled = _scaled_bessel_sequence(x, n)
    powers = r ** np.arange(n + 1)
    if a < b:
        total = float(np.dot(powers, scaled))
        q = lead * total
    else:
        total = float(np.dot(powers[1:], scaled[1:]))
        q = 1.0 - lead * total
    return min(1.0, max(0.0, q))


# ---------------------------------------------------------------------------
# Gauss hypergeometric function


def _nonpositive_int(v: float) -> bool:
    return v <= 0 and float(v).is_integer()


def _hyp_series(a: float, b: float, c: float, z: float,
                tol: float = 1e-13, cap: int = 10_000) -> float:
    term, total = 1.0, 1.0
    for n in range(cap):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) < tol * abs(total):
            ratio = abs((a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * z)
            if ratio < 1.0 and abs(term) * ratio / (1.0 - ratio) < tol * abs(total):
                return total
    raise SeriesError(f"2F1({a}, {b}; {c}; {z}) did not converge in {cap} terms")


def _hyp_euler(a: float, b: float, c: float, z: float) -> float:
    """Euler integral for 2F1 when z < 0; needs c > b > 0 or c > a > 0."""
    if not c > b > 0:
        a, b = b, a
    if not c > b > 0:
        raise SeriesError(f"no convergent representation for 2F1({a}, {b}; {c}; {z})")
    lognorm = math.lgamma(c) - math.lgamma(b) - math.lgamma(c - b)

    def f(t):
        return np.exp((b - 1) * np.log(t) + (c - b - 1) * np.log1p(-t)
                      - a * np.log1p(-z * t) + lognorm)

    # the integrand is concentrated near t ~ 1/|z|; split there
    split = min(0.5, 1.0 / abs(z))
    spec = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-12, tail_transform=False)
    return integrate(f, 0.0, split, spec) + integrate(f, split, 1.0, spec)


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    Terminating cases (a or b a non-positive integer) are summed exactly.
    Negative arguments go through the Pfaff transformation, picking the
    form that terminates when one exists.
    """
    if z > 1.0 or (z == 1.0 and not (_nonpositive_int(a) or _nonpositive_int(b))):
        raise ValueError("gauss_2f1 is implemented for z < 1 only")
    if z == 0.0:
        return 1.0
    if _nonpositive_int(a) or _nonpositive_int(b):
        deg = int(-a) if _nonpositive_int(a) else int(-b)
        if _nonpositive_int(a) and _nonpositive_int(b):
            deg = min(int(-a), int(-b))
        term, total = 1.0, 1.0
        for n in range(deg):
            term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
            total += term
        return total
    if _nonpositive_int(c):
        raise ValueError("c is a non-positive integer and the series does not terminate")
    if z > 0.0:
        return _hyp_series(a, b, c, z)
    w = z / (z - 1.0)
    # Pfaff: (1-z)^-a F(a, c-b; c; w) or (1-z)^-b F(c-a, b; c; w).
    # A variant with all-positive terms sums without cancellation, so it
    # wins over a terminating but alternating polynomial.
    if w <= 0.95:
        if a > 0 and c - b > 0:
            return (1.0 - z) ** (-a) * _hyp_series(a, c - b, c, w)
        if c - a > 0 and b > 0:
            return (1.0 - z) ** (-b) * _hyp_series(c - a, b, c, w)
    # near w = 1 long alternating polynomials cancel; the Euler integral
    # has a positive integrand and is preferred for them
    euler_ok = c > b > 0 or c > a > 0
    if _nonpositive_int(c - b) and (b - c <= 8 or not euler_ok):
        return (1.0 - z) ** (-a) * gauss_2f1(a, c - b, c, w)
    if _nonpositive_int(c - a) and (a - c <= 8 or not euler_ok):
        return (1.0 - z) ** (-b) * gauss_2f1(c - a, b, c, w)
    if w <= 0.95:
        return (1.0 - z) ** (-a) * _hyp_series(a, c - b, c, w)
    return _hyp_euler(a, b, c, z)


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature

_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, lo: float, hi: float) -> tuple[float, float]:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    fx = np.asarray(f(mid + half * _NODES), dtype=float)
    k = half * float(np.dot(_WEIGHTS_K, fx))
    g = half * float(np.dot(_WEIGHTS_G, fx))
    return k, abs(k - g)


def integrate(f: Callable, lo: float, hi: float = math.inf,
              spec: QuadratureSpec | None = None) -> float:
    """Adaptive 15-point Gauss-Kronrod integral of a vectorised ``f``.

    A semi-infinite range [lo, inf) is mapped onto [0, 1) with
    x = lo + t / (1 - t).

    Raises:
        QuadratureError: if the tolerance is not met within
            ``spec.max_subdivisions`` bisections.
    """
    spec = spec or QuadratureSpec()
    if math.isinf(hi):
        if not spec.tail_transform:
            raise ValueError("semi-infinite range needs tail_transform")

        def g(t):
            s = 1.0 - t
            return np.asarray(f(lo + t / s), dtype=float) / (s * s)

        return integrate(g, 0.0, 1.0, QuadratureSpec(spec.abs_tol, spec.rel_tol,
                                                      spec.max_subdivisions, False))
    if hi == lo:
        return 0.0
    val, err = _gk15(f, lo, hi)
    heap = [(-err, lo, hi, val)]
    total, total_err = val, err
    for _ in range(spec.max_subdivisions):
        if total_err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
            return total
        neg_err, a, b, v = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        total += v1 + v2 - v
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
    # recompute from the leaves to shed accumulated rounding
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    if total_err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
        return total
    raise QuadratureError("tolerance not met", total, total_err)


# ---------------------------------------------------------------------------
# Monotone root finding


def solve_monotone(f: Callable[[float], float], bracket: RootBracket,
                   xtol: float = 1e-12, ftol: float = 0.0,
                   expand: bool = False, max_doublings: int = 60,
                   max_iter: int = 300) -> float:
    """Root of ``f(x) = target`` for monotone ``f``.

    Bisection safeguarded with secant (Illinois) steps. With ``expand`` the
    bracket is widened by doubling its width on the side that misses the
    target, up to ``max_doublings`` times.
    """
    sign = 1.0 if bracket.increasing else -1.0

    def g(x):
        return sign * (f(x) - bracket.target)

    lo, hi = bracket.lower, bracket.upper
    glo, ghi = g(lo), g(hi)
    doublings = 0
    while glo > 0 or ghi < 0:
        if not expand or doublings >= max_doublings:
            raise BracketError(
                f"target {bracket.target} not bracketed on [{lo}, {hi}] "
                f"(g={glo}, {ghi}) after {doublings} doublings")
        width = hi - lo
        if glo > 0:
            hi, ghi = lo, glo
            lo = lo - width
            glo = g(lo)
        else:
            lo, glo = hi, ghi
            hi = hi + width
            ghi = g(hi)
        doublings += 1
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    side = 0
    for _ in range(max_iter):
        width = hi - lo
        if width <= xtol * max(1.0, abs(lo), abs(hi)):
            break
        # Illinois-modified regula falsi, falling back to bisection
        x = hi - ghi * (hi - lo) / (ghi - glo)
        if not lo < x < hi or (x - lo) < 0.01 * width or (hi - x) < 0.01 * width:
            x = 0.5 * (lo + hi)
        gx = g(x)
        if abs(gx) <= ftol or gx == 0:
            return x
        if gx < 0:
            lo, glo = x, gx
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi, ghi = x, gx
            if side == 1:
                glo *= 0.5
            side = 1
    return 0.5 * (lo + hi)

"""Path loss, LoS probability, antenna directivity and per-link statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FadingSpec:
    """Unit-mean power fading: Rician(K) when LoS, Nakagami(m) when NLoS.

    Build with :meth:`los` / :meth:`nlos` rather than the raw constructor.
    """

    is_los: bool
    shape: float

    def __post_init__(self):
        if self.is_los:
            if not self.shape >= 0 or math.isinf(self.shape):
                raise ValueError(f"Rician K must be finite and >= 0, got {self.shape}")
        else:
            if self.shape < 1 or not float(self.shape).is_integer():
                raise ValueError(f"Nakagami m must be a positive integer, got {self.shape}")
            object.__setattr__(self, "shape", int(self.shape))

    @classmethod
    def los(cls, k_factor: float) -> "FadingSpec":
        return cls(True, float(k_factor))

    @classmethod
    def nlos(cls, m: int) -> "FadingSpec":
        return cls(False, m)

    @property
    def k_factor(self) -> float:
        if not self.is_los:
            raise AttributeError("NLoS fading has no Rician K")
        return self.shape

    @property
    def m(self) -> int:
        if self.is_los:
            raise AttributeError("LoS fading has no Nakagami m")
        return self.shape

    def __str__(self):
        return f"LoS(K={self.shape:g})" if self.is_los else f"NLoS(m={self.shape})"


@dataclass(frozen=True)
class PathLossParams:
    mu_los: float = 61.4
    beta_los: float = 2.0
    mu_nlos: float = 72.0
    beta_nlos: float = 2.92

    def __post_init__(self):
        if self.beta_los <= 0 or self.beta_nlos <= 0:
            raise ValueError("path-loss exponents must be positive")


@dataclass(frozen=True)
class AerialLosParams:
    b: float = 0.1396
    c: float = 11.95

    def __post_init__(self):
        if self.b <= 0 or self.c <= 0:
            raise ValueError("aerial LoS constants must be positive")


@dataclass(frozen=True)
class GroundLosParams:
    d1: float = 18.0
    d2: float = 63.0

    def __post_init__(self):
        if self.d1 <= 0 or self.d2 <= 0:
            raise ValueError("ground LoS distances must be positive")


@dataclass(frozen=True)
class AntennaPattern:
    a_max: float = 10 ** 2.5
    a_min: float = 10 ** -0.5
    theta_3db: float = math.radians(15.0)

    def __post_init__(self):
        if not self.a_max >= self.a_min > 0:
            raise ValueError("need a_max >= a_min > 0")
        if not 0 < self.theta_3db < math.pi:
            raise ValueError("theta_3db must lie in (0, pi)")


@dataclass(frozen=True)
class LinkStats:
    mean_gain: float
    is_los: bool
    fading: FadingSpec
    distance: float
    elevation_deg: float | None = None

    def __post_init__(self):
        if not self.mean_gain > 0:
            raise ValueError("mean gain must be positive")
        if self.fading.is_los != self.is_los:
            raise ValueError("fading variant disagrees with the LoS flag")


def path_loss_db(d: float, is_los: bool, params: PathLossParams = PathLossParams()) -> float:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if is_los:
        return params.mu_los + 10.0 * params.beta_los * math.log10(d)
    return params.mu_nlos + 10.0 * params.beta_nlos * math.log10(d)


def mean_path_gain(d: float, is_los: bool, params: PathLossParams = PathLossParams()) -> float:
    return 10.0 ** (-path_loss_db(d, is_los, params) / 10.0)


def los_probability_aerial(theta_deg: float, params: AerialLosParams = AerialLosParams()) -> float:
    if not 0.0 <= theta_deg <= 90.0:
        raise ValueError(f"elevation must be in [0, 90] degrees, got {theta_deg}")
    return 1.0 / (1.0 + params.c * math.exp(-params.b * (theta_deg - params.c)))


def los_probability_ground(d: float, params: GroundLosParams = GroundLosParams()) -> float:
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    tail = math.exp(-d / params.d2)
    return min(params.d1 / d, 1.0) * (1.0 - tail) + tail


def wrap_angle(theta):
    """Map an angle onto [-pi, pi)."""
    return np.mod(np.asarray(theta, dtype=float) + math.pi, 2.0 * math.pi) - math.pi


def antenna_gain(theta_offset, pattern: AntennaPattern = AntennaPattern()):
    """Gaussian-like beam: max(A_max exp(-0.69 wrap(t)^2 / t3dB^2), A_min)."""
    t = wrap_angle(theta_offset)
    g = np.maximum(pattern.a_max * np.exp(-0.69 * t * t / pattern.theta_3db ** 2),
                   pattern.a_min)
    return float(g) if np.ndim(g) == 0 else g


def angle_between(u, v) -> float:
    """Unsigned angle between two 3-D direction vectors, radians."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(max(-1.0, min(1.0, c)))


def elevation_deg(tx, rx) -> float:
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    horizontal = float(np.hypot(*(rx[:2] - tx[:2])))
    dh = abs(float(rx[2] - tx[2]))
    return math.degrees(math.atan2(dh, horizontal))


def los_probability(tx, rx, link_class: str,
                    aerial: AerialLosParams = AerialLosParams(),
                    ground: GroundLosParams = GroundLosParams()) -> float:
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if link_class == "aerial":
        return los_probability_aerial(elevation_deg(tx, rx), aerial)
    if link_class == "terrestrial":
        return los_probability_ground(float(np.linalg.norm(rx - tx)), ground)
    if link_class == "nlos":
        return 0.0
    raise ValueError(f"unknown link class {link_class!r}")


def build_link_stats(tx, rx, link_class: str, beam_offset: float,
                     fading_shapes: tuple[int, float], rng: np.random.Generator | None,
                     path_loss: PathLossParams = PathLossParams(),
                     aerial: AerialLosParams = AerialLosParams(),
                     ground: GroundLosParams = GroundLosParams(),
                     antenna: AntennaPattern = AntennaPattern(),
                     is_los: bool | None = None) -> LinkStats:
    """Statistical descriptor for one directed link.

    ``link_class`` is ``"aerial"`` (elevation-based LoS), ``"terrestrial"``
    (distance-based LoS) or ``"nlos"`` (always NLoS, used for ground links
    into the BS). Unless ``is_los`` is forced, the LoS state is one
    Bernoulli draw from ``rng``. ``fading_shapes`` is (Nakagami m, Rician K
    linear). The mean gain carries the transmit antenna gain at
    ``beam_offset`` radians off boresight.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    d = float(np.linalg.norm(rx - tx))
    if d <= 0.0:
        raise ValueError("transmitter and receiver coincide")
    if is_los is None:
        p = los_probability(tx, rx, link_class, aerial, ground)
        is_los = bool(rng.random() < p)
    m, k_factor = fading_shapes
    fading = FadingSpec.los(k_factor) if is_los else FadingSpec.nlos(m)
    gain = mean_path_gain(d, is_los, path_loss) * antenna_gain(beam_offset, antenna)
    elev = elevation_deg(tx, rx) if link_class == "aerial" else None
    return LinkStats(gain, is_los, fading, d, elev)

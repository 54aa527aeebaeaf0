"""Gray-labeled PAM constellations and the uncoded PAM error bounds."""

from dataclasses import dataclass
from functools import cached_property
import math

import mpmath
import numpy as np

from .numerics import qfunc, shannon_snr


def gray_encode(j: int) -> int:
    """Binary-reflected Gray label of amplitude index ``j``."""
    return j ^ (j >> 1)


def gray_decode(w: int) -> int:
    """Amplitude index carrying Gray label ``w``."""
    j = w
    shift = 1
    while (w >> shift) > 0:
        j ^= w >> shift
        shift += 1
    return j


@dataclass(frozen=True)
class PamConstellation:
    """M = 2**bits_per_symbol equispaced points with unit mean square.

    Point ``j`` (in increasing amplitude order) sits at ``(2j - M + 1) * eta``
    and carries the Gray label ``j ^ (j >> 1)``. Labels are plain Python ints,
    so constellations far beyond float resolution (e.g. 76 bits) still map
    and decode exactly when the amplitude is handled in high precision.
    """

    bits_per_symbol: int

    def __post_init__(self):
        b = self.bits_per_symbol
        if not isinstance(b, (int, np.integer)) or b < 1:
            raise ValueError(f"bits_per_symbol must be a positive integer, got {b!r}")

    @property
    def size(self) -> int:
        return 1 << int(self.bits_per_symbol)

    @cached_property
    def eta(self) -> float:
        return math.sqrt(3.0 / shannon_snr(self.bits_per_symbol))

    @property
    def d_min(self) -> float:
        return 2.0 * self.eta

    @property
    def points(self) -> np.ndarray:
        """Amplitudes in increasing order (only for small constellations)."""
        if self.bits_per_symbol > 24:
            raise ValueError("refusing to materialize more than 2**24 points")
        j = np.arange(self.size, dtype=np.float64)
        return (2.0 * j - (self.size - 1)) * self.eta

    @property
    def gray_map(self) -> np.ndarray:
        """``gray_map[j]`` is the label of point ``j``."""
        if self.bits_per_symbol > 24:
            raise ValueError("refusing to materialize more than 2**24 labels")
        j = np.arange(self.size, dtype=np.int64)
        return j ^ (j >> 1)

    def check_label(self, w: int) -> int:
        w = int(w)
        if not 0 <= w < self.size:
            raise IndexError(f"message index {w} outside [0, {self.size})")
        return w

    def index_of(self, w: int) -> int:
        return gray_decode(self.check_label(w))

    def label_of(self, j: int) -> int:
        return gray_encode(j)

    def amplitude(self, j: int) -> float:
        return (2 * j - (self.size - 1)) * self.eta

    def amplitude_mp(self, j: int):
        """Point ``j`` at the current mpmath precision."""
        eta = mpmath.sqrt(mpmath.mpf(3) / (mpmath.mpf(2) ** (2 * self.bits_per_symbol) - 1))
        return (2 * j - (self.size - 1)) * eta

    def nearest_index(self, theta_hat) -> int:
        """Index of the nearest point; midpoint ties go to the larger one."""
        m = self.size
        if isinstance(theta_hat, mpmath.mpf):
            eta = self.amplitude_mp(1) - self.amplitude_mp(0)
            u = theta_hat / eta + mpmath.mpf(m - 1) / 2
            j = int(mpmath.floor(u + mpmath.mpf(0.5)))
        else:
            if not math.isfinite(theta_hat):
                raise ValueError("theta_hat must be finite")
            u = (theta_hat / self.eta + (m - 1)) / 2.0
            j = min(max(math.floor(u + 0.5), 0), m - 1)
            # boundaries are the midpoints of the float points themselves
            if j > 0 and theta_hat < 0.5 * (self.amplitude(j - 1) + self.amplitude(j)):
                j -= 1
            elif j < m - 1 and theta_hat >= 0.5 * (self.amplitude(j) + self.amplitude(j + 1)):
                j += 1
        return min(max(j, 0), m - 1)


def pam_map(w: int, c: PamConstellation) -> float:
    """Unit mean-square amplitude labeled ``w``."""
    return c.amplitude(c.index_of(w))


def pam_decode(theta_hat, c: PamConstellation) -> int:
    """Minimum-distance decision, returned as a Gray label."""
    return gray_encode(c.nearest_index(theta_hat))


def _check_pos(snr, rate):
    if not snr > 0 or not rate > 0:
        raise ValueError("snr and rate must be positive")


def pam_ser_bound(snr: float, rate: float) -> float:
    """Two-neighbor union bound on the PAM symbol error probability."""
    _check_pos(snr, rate)
    return 2.0 * qfunc(math.sqrt(3.0 * snr / shannon_snr(rate)))


def pam_ber_bound(snr: float, rate: float) -> float:
    """Gray-labeled PAM bit error approximation ``(2/R)Q(a) + 2Q(3a)``."""
    _check_pos(snr, rate)
    if rate < 1:
        raise ValueError("pam_ber_bound needs rate >= 1")
    a = math.sqrt(3.0 * snr / shannon_snr(rate))
    return 2.0 / rate * qfunc(a) + 2.0 * qfunc(3.0 * a)

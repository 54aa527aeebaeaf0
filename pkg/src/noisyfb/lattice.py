"""Scalar modulo arithmetic, dithered side-information JSCC, cubic lattices."""

from dataclasses import dataclass
import math

import numpy as np

from ._backend import njit
from .numerics import qfunc


@njit(cache=True, nogil=True)
def _mod(x, d):
    h = 0.5 * d
    if -h <= x < h:
        return x
    r = x - d * math.floor(x / d + 0.5)
    # floor(x/d + 0.5) can land one step off when x/d + 0.5 rounds.
    if r >= h:
        r -= d
    elif r < -h:
        r += d
    return r


def mod_d(x, d):
    """``x - d*round(x/d)`` with round-half-up; result in ``[-d/2, d/2)``.

    In-range inputs are returned unchanged, bit for bit. Works on floats and
    numpy arrays.
    """
    if not d > 0:
        raise ValueError(f"modulo interval must be positive, got {d!r}")
    if isinstance(x, np.ndarray):
        return mod_array(x, d)
    return _mod(float(x), float(d))


def mod_array(x: np.ndarray, d: float) -> np.ndarray:
    h = 0.5 * d
    inside = (x >= -h) & (x < h)
    r = x - d * np.floor(x / d + 0.5)
    r = np.where(r >= h, r - d, r)
    r = np.where(r < -h, r + d, r)
    return np.where(inside, x, r)


def in_range(x, d):
    """True where ``x`` lies in the fundamental interval (no aliasing)."""
    h = 0.5 * d
    return (x >= -h) & (x < h)


def interval_for_power(p_fb: float) -> float:
    """Modulo interval whose uniform distribution has mean square ``p_fb``."""
    return math.sqrt(12.0 * p_fb)


def draw_dither(rng: np.random.Generator, d: float, size=None):
    """Uniform dither on ``[-d/2, d/2)``."""
    return rng.uniform(-0.5 * d, 0.5 * d, size=size)


def jscc_si_encode(theta_hat, gamma, v, d):
    """Terminal B's feedback symbol ``[gamma*theta_hat + v] mod d``."""
    return mod_d(gamma * theta_hat + v, d)


def jscc_si_decode(y_tilde, theta, gamma, v, d):
    """Terminal A's residual ``[y_tilde - gamma*theta - v] mod d``.

    Equals ``gamma*eps + z_fb`` whenever that quantity is in range, and
    differs from it by a nonzero multiple of ``d`` otherwise.
    """
    return mod_d(y_tilde - gamma * theta - v, d)


def pmod_scalar(L: float) -> float:
    """Probability that a Gaussian of variance ``d^2/(12 L)`` leaves the interval."""
    if not L > 0:
        raise ValueError(f"looseness must be positive, got {L!r}")
    return 2.0 * qfunc(math.sqrt(3.0 * L))


@dataclass(frozen=True)
class CubicLattice:
    """The scaled integer lattice ``d_c * Z^dim``."""

    dim: int
    cell_side: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("lattice dimension must be >= 1")
        if not self.cell_side > 0:
            raise ValueError("cell side must be positive")

    @classmethod
    def for_power(cls, dim: int, p_fb: float) -> "CubicLattice":
        return cls(dim, interval_for_power(p_fb))

    @property
    def second_moment(self) -> float:
        """Per-dimension second moment of a uniform point in the Voronoi cell."""
        return self.cell_side ** 2 / 12.0

    @property
    def normalized_second_moment(self) -> float:
        return self.second_moment / self.volume ** (2.0 / self.dim)

    @property
    def volume(self) -> float:
        return self.cell_side ** self.dim

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"vector dimension {x.shape[-1]} != lattice dimension {self.dim}")
        return x

    def quantize(self, x) -> np.ndarray:
        """Nearest lattice point, ties rounded up."""
        x = self._check(x)
        return x - mod_array(x, self.cell_side)

    def sample_cell(self, rng: np.random.Generator, size=()) -> np.ndarray:
        shape = tuple(np.atleast_1d(size)) if size != () else ()
        h = 0.5 * self.cell_side
        return rng.uniform(-h, h, size=shape + (self.dim,))


def lattice_mod(x, lat: CubicLattice) -> np.ndarray:
    """Reduce ``x`` into the Voronoi cell of ``lat`` (componentwise)."""
    return mod_array(lat._check(x), lat.cell_side)

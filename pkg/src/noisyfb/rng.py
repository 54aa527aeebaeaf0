"""Counter-based random numbers keyed by (master seed, trial index, counter).

Every draw is ``splitmix64`` applied to a per-trial key plus a counter, so
any trial's noise tape can be regenerated in isolation, in any order.

Per-trial layout for a scheme with N rounds:

* counters 0, 1 of the trial key: message words (low and high 64 bits)
* counters 2, 3, ... of the trial key: 2N-1 standard normals drawn in order
  by a ziggurat sampler (normals 0..N-1 drive the forward noise, N..2N-2
  the feedback noise); rejections consume extra counters
* counters 0 .. N-2 of a derived dither key: uniform dither offsets

The ziggurat is the 128-layer floating-point variant with Marsaglia's exact
tail method. It is exact: the output is standard normal, not an
approximation.
"""

import math

import numpy as np

from ._backend import HAVE_NUMBA, njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TRIAL_MUL = np.uint64(0xD1B54A32D192ED03)
_SEED_SALT = np.uint64(0x5851F42D4C957F2D)
_DITHER_SALT = np.uint64(0xA0761D6478BD642F)
_ONE = np.uint64(1)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_LOW7 = np.uint64(0x7F)
_TWO_M53 = 2.0 ** -53

SLOT_MSG = 0
SLOT_NORMALS = 2

# ziggurat tables: 128 layers of equal area V, base layer includes the tail
_ZIG_C = 128
ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3


def _zig_tables():
    x = np.zeros(_ZIG_C + 1)
    f = math.exp(-0.5 * ZIG_R * ZIG_R)
    x[0] = _ZIG_V / f
    x[1] = ZIG_R
    for i in range(2, _ZIG_C):
        x[i] = math.sqrt(-2.0 * math.log(_ZIG_V / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    r = x[1:] / x[:-1]
    return x, r


ZIG_X, ZIG_RATIO = _zig_tables()


def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _trial_key(seed, i):
    return _mix64(_mix64(seed ^ _SEED_SALT) + (i + _ONE) * _TRIAL_MUL)


def _dither_key(key):
    return _mix64(key ^ _DITHER_SALT)


def _raw(key, slot):
    return _mix64(key + (slot + _ONE) * GOLDEN)


def _uniform(raw):
    """[0, 1) with 53 random bits."""
    return (raw >> _S11) * _TWO_M53


def _open_uniform(raw):
    """(0, 1), safe for logarithms."""
    return ((raw >> _S11) + 0.5) * _TWO_M53


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def mix64(z):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)

    @njit(cache=True, nogil=True)
    def trial_key(seed, i):
        return mix64(mix64(seed ^ _SEED_SALT) + (i + _ONE) * _TRIAL_MUL)

    @njit(cache=True, nogil=True)
    def dither_key(key):
        return mix64(key ^ _DITHER_SALT)

    @njit(cache=True, nogil=True)
    def raw(key, slot):
        return mix64(key + (slot + _ONE) * GOLDEN)

    @njit(cache=True, nogil=True)
    def uniform(r):
        return np.float64(r >> _S11) * _TWO_M53

    @njit(cache=True, nogil=True)
    def open_uniform(r):
        return (np.float64(r >> _S11) + 0.5) * _TWO_M53

    @njit(cache=True, nogil=True)
    def normal(key, c):
        """One standard normal from counter ``c`` on; returns (value, next counter)."""
        while True:
            w = raw(key, np.uint64(c))
            c += 1
            u = 2.0 * uniform(w) - 1.0
            i = np.int64(w & _LOW7)
            if abs(u) < ZIG_RATIO[i]:
                return u * ZIG_X[i], c
            if i == 0:
                while True:
                    x = math.log(open_uniform(raw(key, np.uint64(c)))) / ZIG_R
                    y = math.log(open_uniform(raw(key, np.uint64(c + 1))))
                    c += 2
                    if -2.0 * y >= x * x:
                        break
                if u < 0.0:
                    return x - ZIG_R, c
                return ZIG_R - x, c
            x = u * ZIG_X[i]
            f0 = math.exp(-0.5 * (ZIG_X[i] * ZIG_X[i] - x * x))
            f1 = math.exp(-0.5 * (ZIG_X[i + 1] * ZIG_X[i + 1] - x * x))
            g = uniform(raw(key, np.uint64(c)))
            c += 1
            if f1 + g * (f0 - f1) < 1.0:
                return x, c

    @njit(cache=True, nogil=True)
    def fill_normals(key, out, count):
        c = SLOT_NORMALS
        for q in range(count):
            out[q], c = normal(key, c)

else:
    mix64, trial_key, dither_key, raw = _mix64, _trial_key, _dither_key, _raw
    uniform, open_uniform = _uniform, _open_uniform
    normal = fill_normals = None


def as_seed(seed) -> np.uint64:
    """Reduce any Python int to a 64-bit master seed."""
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def trial_keys(seed, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).astype(np.uint64)
    return _trial_key(np.full(idx.shape, as_seed(seed), dtype=np.uint64), idx)


def raw_block(keys: np.ndarray, first_slot: int, count: int) -> np.ndarray:
    """Raw words for ``count`` consecutive counters, shape ``(len(keys), count)``."""
    slots = np.arange(first_slot, first_slot + count, dtype=np.uint64)
    return _raw(keys[:, None], slots[None, :])


def message_words(keys: np.ndarray):
    w = raw_block(keys, SLOT_MSG, 2)
    return w[:, 0].copy(), w[:, 1].copy()


def _normals_np(keys: np.ndarray, count: int) -> np.ndarray:
    """Vectorized ziggurat over trials; same draws as the compiled sampler."""
    t = len(keys)
    out = np.empty((t, count))
    c = np.full(t, SLOT_NORMALS, dtype=np.uint64)
    for q in range(count):
        todo = np.arange(t)
        while todo.size:
            k = keys[todo]
            w = _raw(k, c[todo])
            c[todo] += _ONE
            u = 2.0 * _uniform(w) - 1.0
            i = (w & _LOW7).astype(np.int64)
            xi = ZIG_X[i]
            done = np.abs(u) < ZIG_RATIO[i]
            out[todo[done], q] = u[done] * xi[done]
            tail = ~done & (i == 0)
            for j in np.flatnonzero(tail):
                row = todo[j]
                kr = keys[row:row + 1]
                while True:
                    w2 = _raw(kr, c[row:row + 1] + np.array([0, 1], dtype=np.uint64))
                    x = math.log(float(_open_uniform(w2[0]))) / ZIG_R
                    y = math.log(float(_open_uniform(w2[1])))
                    c[row] += np.uint64(2)
                    if -2.0 * y >= x * x:
                        break
                out[row, q] = x - ZIG_R if u[j] < 0.0 else ZIG_R - x
            wedge = ~done & (i != 0)
            if np.any(wedge):
                rows = todo[wedge]
                x = u[wedge] * xi[wedge]
                x0, x1 = xi[wedge], ZIG_X[i[wedge] + 1]
                f0 = np.exp(-0.5 * (x0 * x0 - x * x))
                f1 = np.exp(-0.5 * (x1 * x1 - x * x))
                g = _uniform(_raw(keys[rows], c[rows]))
                c[rows] += _ONE
                ok = f1 + g * (f0 - f1) < 1.0
                out[rows[ok], q] = x[ok]
                todo = rows[~ok]
            else:
                todo = todo[:0]
    return out


def normals(keys: np.ndarray, n_rounds: int) -> np.ndarray:
    """The 2N-1 tape normals per trial, shape ``(len(keys), 2N-1)``."""
    return _normals_np(keys, 2 * n_rounds - 1)


def dither_uniforms(keys: np.ndarray, n_rounds: int) -> np.ndarray:
    """Uniforms on [0, 1) for the N-1 dither offsets."""
    if n_rounds < 2:
        return np.empty((len(keys), 0))
    return _uniform(raw_block(_dither_key(keys), 0, n_rounds - 1))


def message_int(lo: int, hi: int, bits: int) -> int:
    """Assemble a ``bits``-bit message index from the two tape words."""
    w = int(lo) | (int(hi) << 64)
    return w & ((1 << bits) - 1)

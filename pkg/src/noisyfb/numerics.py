"""Gaussian tail, dB helpers and AWGN capacity.

Rates are bits per channel use throughout the package.
"""

import math

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_LN10_OVER_10 = math.log(10.0) / 10.0


def db(x: float) -> float:
    """Linear power ratio to dB."""
    if not x > 0:
        raise ValueError(f"dB of nonpositive value {x!r}")
    return 10.0 * math.log10(x)


def undb(x_db: float) -> float:
    """dB to linear power ratio."""
    return math.exp(x_db * _LN10_OVER_10)


def qfunc(x):
    """Standard normal upper tail Q(x).

    erfc keeps full relative accuracy deep in the tail, so outputs stay
    accurate down to the underflow threshold. Arrays are handled elementwise.
    """
    if isinstance(x, np.ndarray):
        return 0.5 * special.erfc(x / _SQRT2)
    return 0.5 * math.erfc(x / _SQRT2)


def _log_q(x: float) -> float:
    q = qfunc(x)
    if q > 0.0:
        return math.log(q)
    # Beyond double range: leading asymptotic term of the Mills ratio.
    return -0.5 * x * x - math.log(x * math.sqrt(2.0 * math.pi))


def qinv(p: float) -> float:
    """Inverse of :func:`qfunc` on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"qinv needs 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # Q(-x) = 1 - Q(x); near p = 1 the complement loses nothing that
        # matters because the tolerance is relative to p itself.
        lo, hi, target, sign = 0.0, 40.0, 1.0 - p, -1.0
    else:
        lo, hi, target, sign = 0.0, 40.0, p, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if qfunc(mid) > target:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    # Newton polish on log Q, which is well scaled far into the tail.
    log_t = math.log(target)
    for _ in range(3):
        lq = _log_q(x)
        pdf_over_q = math.exp(-0.5 * x * x - 0.5 * math.log(2.0 * math.pi) - lq)
        step = (lq - log_t) / pdf_over_q
        if not math.isfinite(step):
            break
        x += step
    return sign * x


def capacity(snr: float) -> float:
    """AWGN capacity in bits per channel use."""
    if snr < 0:
        raise ValueError(f"capacity needs snr >= 0, got {snr!r}")
    return 0.5 * math.log2(1.0 + snr)


def shannon_snr(rate: float) -> float:
    """The SNR at which capacity equals ``rate``: 2^(2R) - 1."""
    return math.expm1(2.0 * rate * math.log(2.0))


def capacity_gap(snr: float, rate: float) -> float:
    """Excess SNR over the Shannon limit for ``rate``, in dB."""
    if not snr > 0 or not rate > 0:
        raise ValueError("capacity_gap needs snr > 0 and rate > 0")
    return db(snr / shannon_snr(rate))


def gamma0_linear(pe: float) -> float:
    return qinv(pe / 2.0) ** 2 / 3.0


def gamma0(pe: float) -> float:
    """Capacity gap of uncoded PAM at symbol error rate ``pe``, in dB."""
    return db(gamma0_linear(pe))

"""AWGN error exponents, the Poltyrev exponent and the feedback exponent.

All exponents are in nats per channel use (per dimension for lattices);
rates are in bits per channel use and converted here.
"""

from dataclasses import dataclass, asdict, field
import math
from typing import Tuple

from .errors import InfeasibleParametersError
from .numerics import capacity

_LN2 = math.log(2.0)
_LOG2E = 1.0 / _LN2


def _check_snr(snr):
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr!r}")


def _check_rate(rate):
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate!r}")


def _root(snr):
    # sqrt(1 + snr^2/4) without overflow
    return math.hypot(1.0, 0.5 * snr)


@dataclass(frozen=True)
class ExponentRegions:
    capacity: float
    r_cr: float
    r_ex: float


def critical_rate(snr: float) -> float:
    _check_snr(snr)
    return 0.5 * math.log2(0.5 + 0.25 * snr + 0.5 * _root(snr))


def expurgation_rate(snr: float) -> float:
    _check_snr(snr)
    return 0.5 * math.log2(0.5 + 0.5 * _root(snr))


def regions(snr: float) -> ExponentRegions:
    return ExponentRegions(capacity(snr), critical_rate(snr), expurgation_rate(snr))


def e_sp(snr: float, rate: float) -> float:
    """Sphere-packing exponent (0 at and beyond capacity)."""
    _check_snr(snr)
    _check_rate(rate)
    if rate == 0:
        return 0.5 * snr
    if rate > capacity(snr):
        return 0.0
    beta = math.exp(2.0 * rate * _LN2)
    u = 4.0 * beta / (snr * math.expm1(2.0 * rate * _LN2))
    s = math.sqrt(1.0 + u)
    # (s - 1) rewritten as u/(s + 1) to avoid cancellation
    v = snr / (2.0 * beta) - 1.0 / (s + 1.0) + 0.5 * math.log(beta * u / (s + 1.0) ** 2)
    return max(v, 0.0)


def e_rc(snr: float, rate: float) -> float:
    """Straight-line random-coding exponent through the critical rate."""
    _check_snr(snr)
    _check_rate(rate)
    r = _root(snr)
    q = 0.5 / (r + 0.5 * snr)  # equals beta_cr - snr/2 - 1/2
    b = 0.5 + 0.25 * snr + 0.5 * r
    return 0.5 - q + 0.5 * math.log(0.5 + q) + 0.5 * math.log(b) - rate * _LN2


def e_ex(snr: float, rate: float) -> float:
    """Expurgated exponent ``(snr/4)(1 - sqrt(1 - 2^-2R))``."""
    _check_snr(snr)
    _check_rate(rate)
    x = math.exp(-2.0 * rate * _LN2)
    return 0.25 * snr * x / (1.0 + math.sqrt(1.0 - x))


def _e_r(snr: float, rate: float) -> float:
    """Region dispatch, defined on rate >= 0 (0 beyond capacity)."""
    if math.isinf(snr):
        return math.inf
    if rate <= expurgation_rate(snr):
        return e_ex(snr, rate)
    if rate <= critical_rate(snr):
        return e_rc(snr, rate)
    if rate < capacity(snr):
        return e_sp(snr, rate)
    return 0.0


def e_r(snr: float, rate: float) -> float:
    """Best known no-feedback exponent at ``rate`` bits (0 at or above capacity)."""
    _check_snr(snr)
    if not rate > 0:
        raise ValueError(f"e_r needs rate > 0, got {rate!r}")
    return _e_r(snr, rate)


def above_capacity(snr: float, rate: float) -> bool:
    return rate >= capacity(snr)


def poltyrev_ep(x: float) -> float:
    """Poltyrev exponent as a function of the volume-to-noise ratio."""
    if not x >= 1:
        raise ValueError(f"poltyrev_ep needs x >= 1, got {x!r}")
    if x <= 2:
        return 0.5 * (x - 1.0 - math.log(x))
    if x <= 4:
        return 0.5 * (math.log(x) + 1.0 - math.log(4.0))
    return x / 8.0


def _log_snr_k(L, K, snr, dsnr):
    g = snr * (1.0 - L / (snr * dsnr)) / (1.0 + L / dsnr)
    return math.log(snr) + (K - 1) * math.log1p(g)


def snr_k(L: float, K: int, snr: float, dsnr: float) -> float:
    """End-to-end SNR of the coupled block scheme after K rounds."""
    _check_snr(snr)
    if K < 1:
        raise ValueError("K must be >= 1")
    if not 1 <= L < snr * dsnr:
        raise InfeasibleParametersError(f"L={L!r} outside [1, snr*dsnr)")
    ls = _log_snr_k(L, K, snr, dsnr)
    return math.exp(ls) if ls < 709.0 else math.inf


@dataclass(frozen=True)
class ExponentResult:
    rate: float
    value: float
    k_star: int
    l_star: float
    e_r_at_opt: float
    e_p_at_opt: float

    def to_dict(self):
        return asdict(self)


def _inner(K, rate, snr, dsnr, lo, hi, iters):
    """max over L in [lo, hi] of min(E_r(snr_K(L), K R), E_p(L)); returns (value, L, er, ep)."""
    f = lambda L: _e_r(snr_k(L, K, snr, dsnr), K * rate)
    obj = lambda L: (min(f(L), poltyrev_ep(L)), L)
    if f(lo) - poltyrev_ep(lo) <= 0:
        best = obj(lo)
    elif f(hi) - poltyrev_ep(hi) >= 0:
        best = obj(hi)
    else:
        a, b = lo, hi
        for _ in range(iters):
            m = 0.5 * (a + b)
            if m in (a, b):
                break
            if f(m) - poltyrev_ep(m) > 0:
                a = m
            else:
                b = m
        best = max(obj(a), obj(b))
    L = best[1]
    return best[0], L, f(L), poltyrev_ep(L)


def e_fb(rate: float, snr: float, dsnr: float, k_max: int = 64, iters: int = 200) -> ExponentResult:
    """Feedback error exponent: best balanced (K, L) over 2K blocks."""
    _check_snr(snr)
    _check_rate(rate)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if rate >= capacity(snr):
        return ExponentResult(rate, 0.0, 1, math.nan, 0.0, math.nan)
    lo = 1.0 + 1e-6
    hi = snr * dsnr * (1.0 - 1e-6)
    if not hi > lo:
        raise InfeasibleParametersError("feedback snr too small for a valid looseness")
    best = None
    for K in range(1, k_max + 1):
        v, L, er, ep = _inner(K, rate, snr, dsnr, lo, hi, iters)
        cand = ExponentResult(rate, v / (2 * K), K, L, er, ep)
        if best is None or cand.value > best.value:
            best = cand
    return best


@dataclass(frozen=True)
class ZeroRateAsymptotics:
    k_star: int
    l_star: float
    bound: float  # balanced large-snr expression at (K*, L*)
    bound_closed_form: float  # the K-optimized closed form
    feasible_value: float  # exact min(E_r, E_p)/(2K) at (K*, L*)
    violations: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def in_regime(self) -> bool:
        return not self.violations


def e_fb_zero_rate_asymptotics(snr: float, dsnr: float) -> ZeroRateAsymptotics:
    """High-snr balanced zero-rate point. Regime problems are listed, not hidden."""
    _check_snr(snr)
    if not dsnr > 2:
        raise ValueError("dsnr must exceed 2 for the balanced point to exist")
    K = max(2, int(round(0.78 * math.log(dsnr / 2.0))))
    root = (0.5 * dsnr) ** (1.0 / K)
    snr_fb = snr * dsnr
    L = snr_fb / (1.0 + root)
    bound = snr_fb / (16.0 * K * (1.0 + root))
    closed = dsnr * snr / (57.44 * (math.log(dsnr) - 0.693))
    problems = []
    if not L >= 1:
        problems.append(f"L*={L:.4g} is below 1, outside the feasible range")
        return ZeroRateAsymptotics(K, L, bound, closed, math.nan, tuple(problems))
    er = _e_r(snr_k(L, K, snr, dsnr), 0.0)
    ep = poltyrev_ep(L)
    if not L > 4:
        problems.append(f"L*={L:.4g} is not in the linear branch of the Poltyrev exponent")
    if not L > dsnr:
        problems.append(f"L*={L:.4g} does not dominate dsnr={dsnr:.4g}")
    approx = (snr_fb - L) ** K / (dsnr * L ** (K - 1))
    exact = snr_k(L, K, snr, dsnr)
    if not exact >= 0.9 * approx:
        problems.append("snr_K falls more than 10% below its large-snr lower bound")
    return ZeroRateAsymptotics(K, L, bound, closed, min(er, ep) / (2 * K), tuple(problems))


def chance_love_zero_rate(snr: float, dsnr: float) -> float:
    """Zero-rate exponent of the linear-inner-code concatenated scheme."""
    _check_snr(snr)
    if dsnr < 0:
        raise ValueError("dsnr must be nonnegative")
    return 0.25 * snr * (1.0 + dsnr * snr / (1.0 + snr))


def rth_ratio_bound(snr: float, dsnr: float) -> float:
    """Upper bound on that scheme's shut-off rate relative to capacity (logs base 2)."""
    if not snr > 1:
        raise ValueError("rth_ratio_bound needs snr > 1")
    if not dsnr > 0:
        raise ValueError("dsnr must be positive")
    ls = math.log2(snr)
    return 0.5 * (1.0 + (1.0 + math.log2(1.0 + dsnr)) / ls
                  + (1.0 + snr) * _LOG2E / (2.0 * dsnr * snr * snr * ls))

"""Closed-form performance analysis of the noisy-feedback scalar scheme."""

from dataclasses import dataclass, asdict
import csv
import io
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import InfeasibleParametersError, OutOfRegimeError
from .lattice import interval_for_power
from .numerics import capacity, db, gamma0, gamma0_linear, qfunc, qinv, shannon_snr
from .schemes import SchemeParams, SystemParams

_LN2 = math.log(2.0)
_DB_PER_NEPER = 10.0 / math.log(10.0)


def looseness(pe: float, N: int, p_m: Optional[float] = None) -> float:
    """L with per-round aliasing probability p_m (default pe/(2N))."""
    if not 0 < pe < 1:
        raise ValueError("pe must lie in (0, 1)")
    if p_m is None:
        p_m = pe / (2 * N)
    return qinv(p_m / 2.0) ** 2 / 3.0


def log_snr_n(snr: float, dsnr: float, L: float, n: int) -> float:
    """ln of the coupled-system SNR after ``n`` rounds."""
    snr_fb = snr * dsnr
    g = snr * (1.0 - L / snr_fb) / (1.0 + L / dsnr)
    return math.log(snr) + (n - 1) * math.log1p(g)


def scheme_params_for_looseness(sys: SystemParams, L: float) -> SchemeParams:
    """Coefficients for a given looseness L (must satisfy 0 < L < snr_fb)."""
    snr, snr_fb, dsnr = sys.snr, sys.snr_fb, sys.dsnr
    if not 0 < L < snr_fb:
        raise InfeasibleParametersError(
            f"looseness L={L:.6g} must be below the feedback snr {snr_fb:.6g}"
        )
    N = sys.N
    n = np.arange(1, N + 1)
    g = snr * (1.0 - L / snr_fb) / (1.0 + L / dsnr)
    sigma_n = np.exp(-0.5 * (math.log(snr) + (n - 1) * math.log1p(g)))
    alpha = math.sqrt(L * sys.P / sys.P_fb)
    head = sigma_n[:-1]
    gamma = np.sqrt(sys.P_fb / L - sys.sigma2_fb) / head
    beta = head / sys.sigma * math.sqrt(snr * (1.0 - L / snr_fb)) / (1.0 + snr)
    return SchemeParams(L, interval_for_power(sys.P_fb), alpha, beta, gamma, sigma_n)


def derive_scheme_params(sys: SystemParams, pe: float, p_m: Optional[float] = None) -> SchemeParams:
    """Coefficients targeting total error probability ``pe`` in ``sys.N`` rounds."""
    return scheme_params_for_looseness(sys, looseness(pe, sys.N, p_m))


def per_round_alias_probability(L: float) -> float:
    return 2.0 * qfunc(math.sqrt(3.0 * L))


def _decision_bound(log_snr_final: float, bits: float) -> float:
    """2Q(sqrt(3 snr_N / (2^(2 bits) - 1))) with snr_N given by its log."""
    two_b = 2.0 * bits * _LN2
    log_den = two_b + math.log(-math.expm1(-two_b))
    log_arg = math.log(3.0) + log_snr_final - log_den
    if log_arg > 1400.0:
        return 0.0
    return 2.0 * qfunc(math.exp(0.5 * log_arg))


def total_error_bound(sys: SystemParams, sp: SchemeParams, rate: float) -> float:
    """Union bound over N-1 aliasing events and the final PAM decision."""
    N = sys.N
    p_m = per_round_alias_probability(sp.L)
    lsn = log_snr_n(sys.snr, sys.dsnr, sp.L, N)
    return min(1.0, (N - 1) * p_m + _decision_bound(lsn, N * rate))


@dataclass(frozen=True)
class PenaltyLedger:
    psi1: float
    psi2: float
    psi3_db: float

    @property
    def psi1_db(self) -> float:
        return db(self.psi1)

    @property
    def psi2_db(self) -> float:
        return db(self.psi2)


@dataclass(frozen=True)
class GapReport:
    target_pe: float
    N: int
    L: float
    snr: float
    gap_bound_db: float
    gap_approx_db: float
    penalties: PenaltyLedger
    gap_simulated_db: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["penalties"] = asdict(self.penalties)
        return d


def penalties(sys: SystemParams, pe: float, p_m: Optional[float] = None) -> PenaltyLedger:
    N = sys.N
    L = looseness(pe, N, p_m)
    if not L < sys.snr_fb:
        raise InfeasibleParametersError(f"L={L:.6g} >= feedback snr {sys.snr_fb:.6g}")
    psi1 = 1.0 + L / sys.dsnr
    psi2 = 1.0 / (1.0 - L / sys.snr_fb)
    e = (N - 1) / N
    den = sys.snr * psi1 ** (-e) * psi2 ** (-e) * gamma0_linear(pe / 2.0) ** (-1.0 / N) - 1.0
    if not den > 0:
        raise OutOfRegimeError("the third penalty term has a nonpositive denominator")
    return PenaltyLedger(psi1, psi2, _DB_PER_NEPER / den)


def theorem1_gap_bound(sys: SystemParams, pe: float, p_m: Optional[float] = None) -> GapReport:
    """Upper bound on the capacity gap achievable in ``sys.N`` rounds at ``pe``."""
    N = sys.N
    pen = penalties(sys, pe, p_m)
    e = (N - 1) / N
    bound = gamma0(pe / 2.0) / N + e * (pen.psi1_db + pen.psi2_db) + pen.psi3_db
    L = looseness(pe, N, p_m)
    return GapReport(pe, N, L, sys.snr, bound, high_snr_gap_approx(sys.dsnr, pe, N, p_m), pen)


def high_snr_gap_approx(dsnr: float, pe: float, N: int, p_m: Optional[float] = None) -> float:
    """Large-snr form of the gap bound; independent of the base snr."""
    L = looseness(pe, N, p_m)
    if not dsnr > L and N > 1:
        raise InfeasibleParametersError(f"dsnr={dsnr:.6g} does not exceed L={L:.6g}")
    return gamma0(pe / 2.0) / N + (N - 1) / N * db(1.0 + L / dsnr)


def error_bound_at_snr(snr: float, rate: float, N: int, pe: float, dsnr: float,
                       p_m: Optional[float] = None) -> float:
    """Total error bound at unit powers; 1.0 where the parameters are infeasible."""
    L = looseness(pe, N, p_m)
    if N > 1 and not L < snr * dsnr:
        return 1.0
    sys = SystemParams.from_snr(snr, dsnr, N)
    if N == 1:
        return _decision_bound(math.log(snr), rate)
    return total_error_bound(sys, scheme_params_for_looseness(sys, L), rate)


def snr_for_target_rate(rate: float, N: int, pe: float, dsnr: float,
                        p_m: Optional[float] = None, lo_db: float = -20.0,
                        hi_db: float = 80.0, tol_db: float = 1e-4) -> float:
    """Smallest snr (linear) at which the total error bound reaches ``pe``."""
    f = lambda s_db: error_bound_at_snr(10 ** (s_db / 10), rate, N, pe, dsnr, p_m)
    grid = np.linspace(lo_db, hi_db, 41)
    vals = [f(s) for s in grid]
    # the bound must be non-increasing in snr for bisection to be meaningful
    for a, b, s in zip(vals, vals[1:], grid[1:]):
        if b > a * (1 + 1e-9) + 1e-300:
            raise OutOfRegimeError(f"error bound increases with snr near {s:.2f} dB")
    if vals[-1] > pe:
        raise InfeasibleParametersError(
            f"no snr in [{lo_db}, {hi_db}] dB meets pe={pe} at N={N}, rate={rate}"
        )
    if vals[0] <= pe:
        return 10 ** (lo_db / 10)
    k = next(i for i, v in enumerate(vals) if v <= pe)
    lo, hi = grid[k - 1], grid[k]
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if f(mid) <= pe:
            hi = mid
        else:
            lo = mid
    return 10 ** (hi / 10)


@dataclass(frozen=True)
class SweepRow:
    N: int
    dsnr_db: float
    snr_db: float
    rate: float
    gap_db: float
    gap_bound_db: float
    gap_approx_db: float
    feasible: bool
    n_opt: bool = False


SWEEP_COLUMNS = ("N", "dsnr_db", "snr_db", "rate", "gap_bound_db", "gap_approx_db",
                 "feasible", "gap_db", "n_opt")


def gap_sweep(rate: float, dsnr_db_values: Iterable[float], pe: float,
              n_values: Sequence[int] = range(1, 41), p_m: Optional[float] = None,
              n_opt_window_db: float = 0.2) -> List[SweepRow]:
    """Capacity gap versus rounds for each dsnr.

    ``gap_db`` is the gap of the snr found by the bound search;
    ``gap_bound_db`` is the closed-form gap bound evaluated at that snr.
    The first N within ``n_opt_window_db`` of each curve's minimum is marked.
    """
    rows = []
    for dsnr_db in map(float, dsnr_db_values):
        dsnr = 10 ** (dsnr_db / 10)
        curve = []
        for N in n_values:
            try:
                snr = snr_for_target_rate(rate, N, pe, dsnr, p_m)
            except (InfeasibleParametersError, OutOfRegimeError):
                curve.append(SweepRow(N, dsnr_db, math.nan, rate, math.nan, math.nan,
                                      math.nan, False))
                continue
            gap = db(snr / shannon_snr(rate))
            try:
                approx = high_snr_gap_approx(dsnr, pe, N, p_m)
            except InfeasibleParametersError:
                approx = math.nan
            try:
                bound = theorem1_gap_bound(SystemParams.from_snr(snr, dsnr, N), pe, p_m).gap_bound_db
            except (InfeasibleParametersError, OutOfRegimeError):
                bound = math.nan
            curve.append(SweepRow(N, dsnr_db, db(snr), rate, gap, bound, approx, True))
        feas = [r for r in curve if r.feasible]
        if feas:
            best = min(r.gap_db for r in feas)
            mark = next(r.N for r in feas if r.gap_db <= best + n_opt_window_db)
            curve = [SweepRow(**{**asdict(r), "n_opt": r.N == mark}) for r in curve]
        rows.extend(curve)
    return rows


def n_opt(rows: Sequence[SweepRow], dsnr_db: float) -> SweepRow:
    return next(r for r in rows if r.n_opt and r.dsnr_db == dsnr_db)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    fmt = lambda v: "nan" if isinstance(v, float) and math.isnan(v) else (
        f"{v:.6f}" if isinstance(v, float) else str(v))
    for r in rows:
        w.writerow([r.N, fmt(r.dsnr_db), fmt(r.snr_db), fmt(r.rate), fmt(r.gap_bound_db),
                    fmt(r.gap_approx_db), int(r.feasible), fmt(r.gap_db), int(r.n_opt)])
    return buf.getvalue()


def concatenated_snr(snr: float, snr_fb: float):
    """SNR of the forward channel cascaded with the feedback channel, and its loss factor."""
    if not snr > 0 or not snr_fb > 0:
        raise ValueError("snr values must be positive")
    s = snr * snr_fb / (snr + snr_fb + 1.0)
    loss = 1.0 + snr / snr_fb + 1.0 / snr_fb
    return s, loss


@dataclass(frozen=True)
class BandwidthTradeoff:
    snr_db: float
    rate_interactive: float
    rate_split: float
    crossover_snr_db: float
    interactive_wins: bool


def bandwidth_tradeoff(snr_db: float, gap_ours_db: float, gap_nonfb_db: float) -> BandwidthTradeoff:
    """Interactive scheme on the full band versus half band each way without feedback.

    The split alternative delivers ``2 C(snr - 3 dB - gap_nonfb)``; the
    interactive one ``C(snr - gap_ours)``. The crossover is where they meet.
    """
    lin = lambda x_db: 10 ** (x_db / 10)
    ours = capacity(lin(snr_db - gap_ours_db))
    split = 2.0 * capacity(lin(snr_db - 3.0 - gap_nonfb_db))
    a = lin(-gap_ours_db)
    b = lin(-3.0 - gap_nonfb_db)
    # 1 + a x = (1 + b x)^2  =>  x = (a - 2b) / b^2
    x = (a - 2.0 * b) / (b * b)
    cross = db(x) if x > 0 else -math.inf
    return BandwidthTradeoff(snr_db, ours, split, cross, ours > split)

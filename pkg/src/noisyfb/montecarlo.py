"""Deterministic, parallel Monte Carlo harness.

Trials are split into fixed-size chunks of consecutive indices. Each chunk
is a pure function of (plan, chunk index) and results are merged in chunk
order, so reports do not depend on how many workers ran them.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import csv
import io
import json
import math
import os
import time
from typing import List, Optional

import numpy as np
from scipy import stats

from . import kernels, rng
from .errors import ConfigError
from .kernels import (EVENT_ALIAS, I_ERR_C, I_ERR_M, I_FIRST_VIOL, I_ROUNDS, I_UNI_C,
                      I_UNI_M, I_VIOL_J, I_VIOL_PATH, I_VIOL_UNION, F_PA_C, F_PA_C2, F_PA_M,
                      F_PA_M2, F_PB, F_PB2, F_PD, F_PD2, F_ROUNDS, T_EPS, T_EPSFB, T_X,
                      T_XFB, T_Y, T_YFB)
from .lattice import pmod_scalar
from .modulation import PamConstellation, gray_decode, gray_encode
from .schemes import (PowerReport, RoundTrace, SchemeParams, SystemParams, message_bits,
                      noisy_kernel_spec, sk_kernel_spec)

PLAN_MODES = ("modulo", "coupled", "both", "sk")
COLLECT = frozenset({"ser", "ber", "aliasing_per_round", "power", "coupling", "moments"})
DEFAULT_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class TrialPlan:
    """What to simulate. ``scheme`` may be None only for the ``sk`` baseline."""

    master_seed: int
    trials: int
    system: SystemParams
    scheme: Optional[SchemeParams]
    rate: float
    mode: str = "modulo"
    collect: frozenset = frozenset({"ser", "aliasing_per_round"})
    zero_noise: bool = False
    cpl_shift: int = 0
    chunk_size: int = DEFAULT_CHUNK
    capture: int = 0

    def __post_init__(self):
        if self.mode not in PLAN_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}", "mode")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ConfigError("must be a positive integer", "trials")
        if self.mode != "sk" and self.scheme is None:
            raise ConfigError("scheme parameters required", "scheme")
        bad = set(self.collect) - COLLECT
        if bad:
            raise ConfigError(f"unknown collect items {sorted(bad)}", "collect")
        if self.chunk_size < 1:
            raise ConfigError("must be positive", "chunk_size")
        message_bits(self.system.N, self.rate)

    @property
    def bits(self) -> int:
        return message_bits(self.system.N, self.rate)

    def kernel_spec(self) -> kernels.KernelSpec:
        power = "power" in self.collect
        if self.mode == "sk":
            spec = sk_kernel_spec(self.system, self.rate, power, self.zero_noise)
        else:
            spec = noisy_kernel_spec(self.system, self.scheme, self.rate, self.mode, power,
                                     self.cpl_shift, self.zero_noise)
        return kernels.KernelSpec(**{**spec.__dict__, "want_moments": "moments" in self.collect})

    def chunks(self):
        c = self.chunk_size
        return [(s, min(c, self.trials - s)) for s in range(0, self.trials, c)]

    def describe(self) -> dict:
        s = self.system
        return {
            "master_seed": int(self.master_seed), "trials": int(self.trials), "mode": self.mode,
            "rate": self.rate, "N": s.N, "snr_db": 10 * math.log10(s.snr),
            "dsnr_db": 10 * math.log10(s.dsnr), "P": s.P, "P_fb": s.P_fb,
            "L": None if self.scheme is None else self.scheme.L,
            "zero_noise": self.zero_noise, "collect": sorted(self.collect),
            "chunk_size": self.chunk_size,
        }


def clopper_pearson(k: int, n: int, level: float = 0.95):
    """Exact two-sided binomial confidence interval."""
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass
class RoundMoments:
    """Per-round empirical E[eps_n^2] with its standard error."""

    mean_sq: List[float]
    se: List[float]


@dataclass
class McReport:
    trials: int
    mode: str
    bits: int
    symbol_errors: int
    ser: float
    ser_ci: tuple
    bit_errors: Optional[int]
    ber: Optional[float]
    ber_ci: Optional[tuple]
    union_events: int
    per_round_alias_counts: List[int]
    first_alias_counts: List[int]
    coupled: Optional[dict] = None
    coupling: Optional[dict] = None
    moments: Optional[dict] = None
    power: Optional[PowerReport] = None
    config: dict = field(default_factory=dict)
    backend: str = ""
    wallclock: float = 0.0
    error_log: list = field(default_factory=list, repr=False)
    captured: list = field(default_factory=list, repr=False)

    def to_dict(self, wallclock: bool = False) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("error_log", "captured")}
        d["power"] = None if self.power is None else self.power.to_dict()
        if not wallclock:
            d.pop("wallclock")
        return d

    def to_json(self, wallclock: bool = False, **kw) -> str:
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(wallclock), sort_keys=True, **kw)

    def error_log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("trial_index", "failing_round", "event_type"))
        for idx, rnd, ev, _ in self.error_log:
            w.writerow((idx, rnd, "alias" if ev == EVENT_ALIAS else "decode"))
        return buf.getvalue()


def _merge(results):
    ints = np.sum([r.ints for r in results], axis=0)
    firsts = [int(r.ints[I_FIRST_VIOL]) for r in results if r.ints[I_FIRST_VIOL] >= 0]
    ints[I_FIRST_VIOL] = firsts[0] if firsts else -1
    floats = np.zeros_like(results[0].floats)
    for r in results:  # fixed order keeps float sums reproducible
        floats += r.floats
    log = np.concatenate([r.log for r in results]) if results else np.zeros((0, 4), np.int64)
    return ints, floats, log


def _bit_errors(plan: TrialPlan, log: np.ndarray) -> int:
    """Bit errors of the logged symbol errors, recomputed from the tapes."""
    if len(log) == 0:
        return 0
    bits = plan.bits
    c = PamConstellation(bits)
    keys = rng.trial_keys(plan.master_seed, log[:, 0] + (plan.cpl_shift if plan.mode in ("coupled", "sk") else 0))
    lo, hi = rng.message_words(keys)
    total = 0
    for a, b, k in zip(lo, hi, log[:, 3]):
        w = rng.message_int(a, b, bits)
        j = gray_decode(w)
        jh = min(max(j + int(k), 0), c.size - 1)
        total += bin(w ^ gray_encode(jh)).count("1")
    return total


def _moments(floats, offset, n, t):
    e2 = floats[offset:offset + n] / t
    e4 = floats[offset + n:offset + 2 * n] / t
    se = np.sqrt(np.maximum(e4 - e2 * e2, 0.0) / t)
    return RoundMoments(e2.tolist(), se.tolist())


def _se(s1, s2, t):
    if t < 2:
        return math.nan
    m = s1 / t
    return math.sqrt(max(s2 / t - m * m, 0.0) / (t - 1))


def _power(plan, floats, t) -> PowerReport:
    n = plan.system.N
    sys_a = (F_PA_M, F_PA_M2) if plan.mode in ("modulo", "both") else (F_PA_C, F_PA_C2)
    a = float(floats[sys_a[0]] / t)
    b_act = float(floats[F_PB] / t) if plan.mode in ("modulo", "both") else math.nan
    b_se = _se(floats[F_PB], floats[F_PB2], t)
    frac = (n - 1) / n
    rep = PowerReport(a, _se(floats[sys_a[0]], floats[sys_a[1]], t), b_act * frac, b_se * frac,
                      b_act, b_se, n, t)
    if plan.mode == "both":
        rep.terminal_a_excess = float(floats[F_PD] / t)
        rep.terminal_a_excess_se = _se(floats[F_PD], floats[F_PD2], t)
    return rep


def estimate(plan: TrialPlan, workers: Optional[int] = None, backend: Optional[str] = None) -> McReport:
    """Run every trial of ``plan`` and aggregate the statistics."""
    spec = plan.kernel_spec()
    backend = backend or kernels.default_backend()
    workers = workers or os.cpu_count() or 1
    chunks = plan.chunks()
    t0 = time.perf_counter()

    def job(arg):
        ci, (start, count) = arg
        cap = plan.capture if ci == 0 else 0
        return kernels.run_chunk(spec, plan.master_seed, start, count, cap, backend)

    if workers == 1 or len(chunks) == 1:
        results = [job(a) for a in enumerate(chunks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(job, enumerate(chunks)))
    wall = time.perf_counter() - t0
    ints, floats, log = _merge(results)
    t = plan.trials
    n = plan.system.N
    m1 = n - 1
    primary = 0 if plan.mode in ("modulo", "both") else 1
    errs = int(ints[I_ERR_M if primary == 0 else I_ERR_C])
    alias = ints[I_ROUNDS + primary * m1:I_ROUNDS + (primary + 1) * m1]
    first = ints[I_ROUNDS + (2 + primary) * m1:I_ROUNDS + (3 + primary) * m1]
    bit_errors = ber = ber_ci = None
    if "ber" in plan.collect:
        bit_errors = _bit_errors(plan, log)
        nb = t * plan.bits
        ber, ber_ci = bit_errors / nb, clopper_pearson(bit_errors, nb)
    rep = McReport(
        trials=t, mode=plan.mode, bits=plan.bits, symbol_errors=errs, ser=errs / t,
        ser_ci=clopper_pearson(errs, t), bit_errors=bit_errors, ber=ber, ber_ci=ber_ci,
        union_events=int(ints[I_UNI_M if primary == 0 else I_UNI_C]),
        per_round_alias_counts=[int(v) for v in alias],
        first_alias_counts=[int(v) for v in first],
        config=plan.describe(), backend=backend, wallclock=wall,
        error_log=[tuple(int(v) for v in row) for row in log],
    )
    if plan.mode == "both":
        ec = int(ints[I_ERR_C])
        rep.coupled = {
            "symbol_errors": ec, "ser": ec / t, "ser_ci": clopper_pearson(ec, t),
            "union_events": int(ints[I_UNI_C]),
            "per_round_alias_counts": [int(v) for v in ints[I_ROUNDS + m1:I_ROUNDS + 2 * m1]],
            "first_alias_counts": [int(v) for v in ints[I_ROUNDS + 3 * m1:I_ROUNDS + 4 * m1]],
        }
        rep.coupling = {
            "union_mismatches": int(ints[I_VIOL_UNION]),
            "path_mismatches": int(ints[I_VIOL_PATH]),
            "clean_mismatches": int(ints[I_VIOL_J]),
            "first_violation": int(ints[I_FIRST_VIOL]),
        }
    if "moments" in plan.collect:
        rep.moments = {}
        if plan.mode in ("modulo", "both"):
            rep.moments["modulo"] = asdict(_moments(floats, F_ROUNDS, n, t))
        if plan.mode in ("coupled", "both", "sk"):
            rep.moments["coupled"] = asdict(_moments(floats, F_ROUNDS + 2 * n, n, t))
    if "power" in plan.collect:
        rep.power = _power(plan, floats, t)
    if plan.capture:
        rep.captured = _to_traces(plan, results[0].traces)
    return rep


def _to_traces(plan: TrialPlan, tb: kernels.TraceBuffers) -> list:
    """Convert raw kernel records into RoundTraces (pairs in ``both`` mode)."""
    n = plan.system.N
    c = PamConstellation(plan.bits)
    out = []
    for t in range(tb.signals.shape[0]):
        made = []
        systems = {"modulo": [0], "coupled": [1], "both": [0, 1], "sk": [1]}[plan.mode]
        for s in systems:
            sig = tb.signals[t, s]
            w = rng.message_int(tb.words[t, s, 0], tb.words[t, s, 1], plan.bits)
            j = gray_decode(w)
            theta = c.amplitude(j)
            k = int(tb.flags[t, s, n - 1])
            jh = min(max(j + k, 0), c.size - 1)
            decoded = gray_encode(jh)
            mode = plan.mode if plan.mode == "sk" else ("modulo" if s == 0 else "coupled")
            tr = RoundTrace(mode, w, theta, sig[T_X].copy(), sig[T_Y].copy(),
                            sig[T_XFB, :n - 1].copy(), sig[T_YFB, :n - 1].copy(),
                            sig[T_EPS].copy(), sig[T_EPSFB, :n - 1].copy(), theta + sig[T_EPS],
                            tb.flags[t, s, :n - 1].astype(bool), decoded, jh != j, k)
            if plan.mode == "sk":
                tr.x_fb = tr.theta_hat[:-1].copy()
                tr.y_fb = tr.x_fb.copy()
                tr.eps_fb = tr.eps[:-1].copy()
                tr.alias = np.zeros(n - 1, dtype=bool)
            made.append(tr)
        out.append(tuple(made) if len(made) > 1 else made[0])
    return out


def replay(master_seed: int, trial_index: int, plan: TrialPlan, backend: Optional[str] = None):
    """Trace of a single trial, bit-identical to what ``estimate`` simulated."""
    if not 0 <= trial_index:
        raise ConfigError("trial index must be nonnegative", "trial_index")
    p = TrialPlan(**{**plan.__dict__, "master_seed": master_seed, "trials": 1, "capture": 1})
    spec = p.kernel_spec()
    res = kernels.run_chunk(spec, master_seed, trial_index, 1, 1, backend)
    return _to_traces(p, res.traces)[0]


@dataclass
class AuditResult:
    passed: bool
    trials: int
    union_mismatches: int
    path_mismatches: int
    clean_mismatches: int
    first_violation: int
    counterexample: Optional[tuple]
    alias_frequency: List[float]
    alias_expected: float
    alias_z: List[float]
    report: McReport = field(repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("report", "counterexample")}
        d["counterexample"] = None if self.counterexample is None else [
            t.to_dict() for t in self.counterexample]
        return d


def coupling_audit(plan: TrialPlan, workers: Optional[int] = None,
                   backend: Optional[str] = None) -> AuditResult:
    """Per-trial check that the modulo system and its coupled twin share sample paths.

    The alias statistics are those of the coupled system, where every round's
    modulo argument has the same Gaussian law.
    """
    if plan.mode != "both":
        raise ConfigError("coupling audit needs mode='both'", "mode")
    rep = estimate(plan, workers, backend)
    cp = rep.coupling
    bad = cp["union_mismatches"] + cp["path_mismatches"] + cp["clean_mismatches"]
    cex = None
    if cp["first_violation"] >= 0:
        cex = replay(plan.master_seed, cp["first_violation"], plan, backend)
    p = pmod_scalar(plan.scheme.L)
    t = plan.trials
    counts = rep.coupled["per_round_alias_counts"]
    freq = [k / t for k in counts]
    sd = math.sqrt(p * (1 - p) / t)
    z = [(f - p) / sd for f in freq]
    return AuditResult(bad == 0, t, cp["union_mismatches"], cp["path_mismatches"],
                       cp["clean_mismatches"], cp["first_violation"], cex, freq, p, z, rep)


def plain_awgn_plan(snr: float, bits: int, trials: int, seed: int, **kw) -> TrialPlan:
    """Uncoded PAM over the forward channel alone (a single round, no feedback)."""
    sys_ = SystemParams.from_snr(snr, 10.0, 1)
    sp = SchemeParams(1.0, math.sqrt(12.0 * sys_.P_fb), 1.0, [], [], [1.0 / math.sqrt(snr)])
    return TrialPlan(seed, trials, sys_, sp, float(bits), mode="modulo", **kw)


@dataclass
class BlockReport:
    trials: int
    K: int
    dim: int
    errors: List[int]  # per stream
    error_rate: float
    error_ci: tuple
    alias_counts: List[int]  # per round, both streams pooled
    var_eps: List[float]  # per-dimension E[eps_K^2], per stream
    var_eps_se: List[float]


def simulate_block(sys: SystemParams, lat, code, sp: SchemeParams, trials: int, seed: int,
                   mode: str = "modulo", zero_noise: bool = False) -> BlockReport:
    """Vectorized runs of the interlaced block scheme (both streams).

    Same per-stream recursion as ``schemes.run_interlaced_block``; the two
    streams draw independent noise.
    """
    from .lattice import mod_array

    K, n = sys.N, lat.dim
    if sp.N != K or code.dim != n:
        raise ConfigError("inconsistent block configuration")
    reduce = mode == "modulo"
    if mode not in ("modulo", "coupled"):
        raise ConfigError(f"unknown mode {mode!r}", "mode")
    sqrt_p = math.sqrt(sys.P)
    s = 0.0 if zero_noise else sys.sigma
    sf = 0.0 if zero_noise else sys.sigma_fb
    h = 0.5 * lat.cell_side
    errors, alias, var, var_se = [], np.zeros(max(K - 1, 0), dtype=np.int64), [], []
    for stream in (1, 2):
        g = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), stream, K, n]))
        msg = g.integers(code.size, size=trials)
        theta = code.codewords[msg]
        th = (sqrt_p * theta + s * g.standard_normal((trials, n))) / sqrt_p
        for k in range(K - 1):
            gk = sp.gamma[k]
            zf = sf * g.standard_normal((trials, n))
            u = g.uniform(-h, h, (trials, n))
            v = mod_array(u - gk * theta, lat.cell_side)
            xt = gk * th + v
            if reduce:
                xt = mod_array(xt, lat.cell_side)
            arg = gk * (th - theta) + zf
            alias[k] += int(np.count_nonzero(np.any((arg < -h) | (arg >= h), axis=1)))
            res = xt + zf - gk * theta - v
            if reduce:
                res = mod_array(res, lat.cell_side)
            y = sp.alpha * res + s * g.standard_normal((trials, n))
            th = th - sp.beta[k] * y
        dec = code.decode(th)
        errors.append(int(np.count_nonzero(dec != msg)))
        e2 = (th - theta) ** 2
        var.append(float(e2.mean()))
        var_se.append(float(e2.std(ddof=1) / math.sqrt(e2.size)))
    tot = sum(errors)
    return BlockReport(trials, K, n, errors, tot / (2 * trials), clopper_pearson(tot, 2 * trials),
                       alias.tolist(), var, var_se)


def awgn_ml_errors(code, snr: float, trials: int, seed: int) -> int:
    """Direct ML decoding of the codebook over a plain AWGN channel."""
    g = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 0xA3]))
    msg = g.integers(code.size, size=trials)
    y = code.codewords[msg] + g.standard_normal((trials, code.dim)) / math.sqrt(snr)
    return int(np.count_nonzero(code.decode(y) != msg))

"""Per-trial simulation kernels.

The fast path tracks the estimation errors ``eps_n = theta_hat_n - theta``
instead of the signals themselves. Both are equivalent in exact arithmetic,
but eps stays O(sigma_n) while theta needs N*R bits of resolution, which
float64 cannot hold at the high-resolution operating points.

In these coordinates one feedback use reads::

    arg    = gamma_n * eps_n + zfb_n          (the modulo argument)
    alias  = arg outside [-d/2, d/2)
    res    = arg mod d     (modulo system)    or   arg   (coupled system)
    X      = alpha_n * res,   Y = X + z_{n+1},   eps_{n+1} = eps_n - beta_{n+1} * Y

and Terminal B transmits ``[u_n + gamma_n * eps_n] mod d`` where ``u_n`` is
the uniform tape offset (the dither equals ``[u_n - gamma_n * theta] mod d``,
itself uniform and independent of everything else).

Two interchangeable implementations produce the same statistics layout: a
numba loop (one trial at a time, no temporaries) and a vectorized numpy
version used when numba is unavailable or disabled.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import rng
from ._backend import HAVE_NUMBA, njit
from .lattice import _mod, mod_array

# integer statistics
I_ERR_M, I_ERR_C, I_UNI_M, I_UNI_C = 0, 1, 2, 3
I_VIOL_UNION, I_VIOL_PATH, I_VIOL_J, I_FIRST_VIOL, I_NLOG = 4, 5, 6, 7, 8
I_ROUNDS = 16
# float statistics
F_PA_M, F_PA_M2, F_PA_C, F_PA_C2, F_PD, F_PD2, F_PB, F_PB2 = range(8)
F_ROUNDS = 8
# trace signal rows
T_X, T_Y, T_XFB, T_YFB, T_EPS, T_EPSFB = range(6)
N_SIGNALS = 6

EVENT_DECODE, EVENT_ALIAS = 0, 1

_U64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class KernelSpec:
    """Everything a kernel needs to simulate one configuration."""

    n_rounds: int
    bits: int
    sqrt_p: float
    sigma: float
    sigma_fb: float
    d: float
    eta: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    do_mod: bool
    do_cpl: bool
    want_power: bool = False
    cpl_shift: int = 0
    want_moments: bool = True

    def __post_init__(self):
        n = self.n_rounds
        if n < 1:
            raise ValueError("need at least one round")
        if not 1 <= self.bits <= 128:
            raise ValueError("message length must be 1..128 bits")
        for name in ("alpha", "beta", "gamma"):
            a = getattr(self, name)
            if len(a) != n - 1:
                raise ValueError(f"{name} must have {n - 1} entries")
        if not (self.do_mod or self.do_cpl):
            raise ValueError("run at least one of the two systems")

    @property
    def n_int(self) -> int:
        return I_ROUNDS + 4 * max(self.n_rounds - 1, 0)

    @property
    def n_float(self) -> int:
        return F_ROUNDS + 4 * self.n_rounds

    def packed(self):
        b = self.bits
        mask = (1 << b) - 1
        top = 1 << (b - 1)
        words = np.array(
            [mask & _U64, mask >> 64, top & _U64, top >> 64], dtype=np.uint64
        )
        m = 2.0 ** b
        fp = np.array(
            [self.sqrt_p, self.sigma, self.sigma_fb, self.d, 0.5 / self.eta,
             self.eta * m, 1.0 / m],
            dtype=np.float64,
        )
        ip = np.array(
            [self.n_rounds, b, int(self.do_mod), int(self.do_cpl),
             int(self.want_power), self.cpl_shift, int(self.want_moments)],
            dtype=np.int64,
        )
        f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
        return ip, fp, words, f(self.alpha), f(self.beta), f(self.gamma)


@dataclass
class ChunkResult:
    ints: np.ndarray
    floats: np.ndarray
    log: np.ndarray  # rows (trial_index, failing_round, event_type, offset)
    traces: "TraceBuffers"


@dataclass
class TraceBuffers:
    """Raw per-trial records for the first few trials of a chunk."""

    signals: np.ndarray  # (n, 2, N_SIGNALS, N) float
    flags: np.ndarray  # (n, 2, N + 1) int: alias flags, decision offset, error
    normals: np.ndarray  # (n, 2, 2N-1)
    offsets: np.ndarray  # (n, 2, N - 1) dither offsets u_n
    words: np.ndarray  # (n, 2, 2) uint64 message words

    @classmethod
    def empty(cls, n, n_rounds):
        return cls(
            np.zeros((n, 2, N_SIGNALS, n_rounds)),
            np.zeros((n, 2, n_rounds + 1), dtype=np.int64),
            np.zeros((n, 2, 2 * n_rounds - 1)),
            np.zeros((n, 2, max(n_rounds - 1, 0))),
            np.zeros((n, 2, 2), dtype=np.uint64),
        )


# ---------------------------------------------------------------------------
# numba implementation

_S1, _S2, _S4, _S8, _S16, _S32 = (np.uint64(s) for s in (1, 2, 4, 8, 16, 32))
_ALL = np.uint64(_U64)
_ZERO = np.uint64(0)
_TWO64 = 2.0 ** 64


@njit(cache=True, nogil=True)
def _gray_decode64(x):
    x ^= x >> _S1
    x ^= x >> _S2
    x ^= x >> _S4
    x ^= x >> _S8
    x ^= x >> _S16
    x ^= x >> _S32
    return x


@njit(cache=True, nogil=True)
def _theta(lo, hi, fp):
    """Float amplitude of the message (only used for power bookkeeping)."""
    jh = _gray_decode64(hi)
    jl = _gray_decode64(lo)
    if jh & _S1:
        jl ^= _ALL
    jf = np.float64(jh) * _TWO64 + np.float64(jl)
    return ((2.0 * jf + 1.0) * fp[6] - 1.0) * fp[5]


def kernel_theta(message: int, bits: int, eta: float) -> float:
    """The amplitude exactly as the kernels compute it (same float rounding)."""
    fp = np.zeros(7)
    fp[5] = eta * 2.0 ** bits
    fp[6] = 2.0 ** -bits
    return float(_theta(np.uint64(message & _U64), np.uint64(message >> 64), fp))


@njit(cache=True, nogil=True)
def _fill_tape(key, n, want_u, d, nrm, u, words):
    lo = rng.raw(key, np.uint64(0)) & words[0]
    hi = rng.raw(key, np.uint64(1)) & words[1]
    rng.fill_normals(key, nrm, 2 * n - 1)
    if want_u:
        dk = rng.dither_key(key)
        for k in range(n - 1):
            u[k] = (rng.uniform(rng.raw(dk, np.uint64(k))) - 0.5) * d
    return lo, hi


@njit(cache=True, nogil=True)
def _decide(eps, inv2eta, lo, hi, words):
    k = np.int64(math.floor(eps * inv2eta + 0.5))
    if k == 0:
        return k, False
    if k < 0 and lo == _ZERO and hi == _ZERO:
        return k, False
    if k > 0 and lo == words[2] and hi == words[3]:
        return k, False
    return k, True


@njit(cache=True, nogil=True)
def _run_chunk_nb(seed, start, count, ip, fp, words, alpha, beta, gamma,
                  out_i, out_f, log, tr_s, tr_f, tr_n, tr_u, tr_w):
    n = ip[0]
    do_mod = ip[2] != 0
    do_cpl = ip[3] != 0
    want_p = ip[4] != 0
    shift = ip[5]
    mom = ip[6] != 0
    sqrt_p = fp[0]
    sigma = fp[1]
    sigma_fb = fp[2]
    d = fp[3]
    h = 0.5 * d
    inv2eta = fp[4]
    n_cap = tr_s.shape[0]
    m1 = n - 1
    o_am = I_ROUNDS
    o_ac = I_ROUNDS + m1
    o_fm = I_ROUNDS + 2 * m1
    o_fc = I_ROUNDS + 3 * m1
    o_e2m = F_ROUNDS
    o_e4m = F_ROUNDS + n
    o_e2c = F_ROUNDS + 2 * n
    o_e4c = F_ROUNDS + 3 * n
    paired = do_mod and do_cpl
    separate = do_cpl and (shift != 0 or not do_mod)
    nm = np.empty(2 * n - 1)
    nc = np.empty(2 * n - 1)
    um = np.empty(max(m1, 1))
    uc = np.empty(max(m1, 1))
    nlog = out_i[I_NLOG]
    for t in range(count):
        i = start + t
        rec = t < n_cap
        need_u = want_p or rec
        lo_m = _ZERO
        hi_m = _ZERO
        if do_mod:
            key = rng.trial_key(seed, np.uint64(i))
            lo_m, hi_m = _fill_tape(key, n, need_u, d, nm, um, words)
        if separate:
            key_c = rng.trial_key(seed, np.uint64(i + shift))
            lo_c, hi_c = _fill_tape(key_c, n, need_u, d, nc, uc, words)
        elif do_cpl:
            lo_c = lo_m
            hi_c = hi_m
            nc[:] = nm
            uc[:m1] = um[:m1]
        else:
            lo_c = lo_m
            hi_c = hi_m

        x1m = 0.0
        x1c = 0.0
        if want_p or rec:
            if do_mod:
                x1m = sqrt_p * _theta(lo_m, hi_m, fp)
            if do_cpl:
                x1c = sqrt_p * _theta(lo_c, hi_c, fp)
        eps_m = sigma * nm[0] / sqrt_p
        eps_c = sigma * nc[0] / sqrt_p
        pa_m = x1m * x1m
        pa_c = x1c * x1c
        pb = 0.0
        clean_m = True
        clean_c = True
        first_m = -1
        first_c = -1
        bad_path = False
        bad_j = False
        if rec:
            tr_s[t, 0, T_X, 0] = x1m
            tr_s[t, 0, T_Y, 0] = x1m + sigma * nm[0]
            tr_s[t, 0, T_EPS, 0] = eps_m
            tr_s[t, 1, T_X, 0] = x1c
            tr_s[t, 1, T_Y, 0] = x1c + sigma * nc[0]
            tr_s[t, 1, T_EPS, 0] = eps_c
        if do_mod and mom:
            out_f[o_e2m] += eps_m * eps_m
            out_f[o_e4m] += eps_m * eps_m * eps_m * eps_m
        if do_cpl and mom:
            out_f[o_e2c] += eps_c * eps_c
            out_f[o_e4c] += eps_c * eps_c * eps_c * eps_c

        for k in range(m1):
            g = gamma[k]
            if paired and clean_m and clean_c and eps_m != eps_c:
                bad_path = True
            if do_mod:
                zf = sigma_fb * nm[n + k]
                arg = g * eps_m + zf
                if -h <= arg < h:
                    res = arg
                else:
                    res = _mod(arg, d)
                    out_i[o_am + k] += 1
                    if clean_m:
                        out_i[o_fm + k] += 1
                        first_m = k
                        clean_m = False
                    if rec:
                        tr_f[t, 0, k] = 1
                if need_u:
                    xt = _mod(um[k] + g * eps_m, d)
                    pb += xt * xt
                    if rec:
                        tr_s[t, 0, T_XFB, k] = xt
                        tr_s[t, 0, T_YFB, k] = xt + zf
                x = alpha[k] * res
                z = sigma * nm[k + 1]
                eps_m = eps_m - beta[k] * (x + z)
                pa_m += x * x
                if mom:
                    out_f[o_e2m + k + 1] += eps_m * eps_m
                    out_f[o_e4m + k + 1] += eps_m * eps_m * eps_m * eps_m
                if rec:
                    tr_s[t, 0, T_EPSFB, k] = res
                    tr_s[t, 0, T_X, k + 1] = x
                    tr_s[t, 0, T_Y, k + 1] = x + z
                    tr_s[t, 0, T_EPS, k + 1] = eps_m
            if do_cpl:
                zf = sigma_fb * nc[n + k]
                arg = g * eps_c + zf
                if not (-h <= arg < h):
                    out_i[o_ac + k] += 1
                    if clean_c:
                        out_i[o_fc + k] += 1
                        first_c = k
                        clean_c = False
                    if rec:
                        tr_f[t, 1, k] = 1
                if rec:
                    xt = uc[k] + g * eps_c
                    tr_s[t, 1, T_XFB, k] = xt
                    tr_s[t, 1, T_YFB, k] = xt + zf
                x = alpha[k] * arg
                z = sigma * nc[k + 1]
                eps_c = eps_c - beta[k] * (x + z)
                pa_c += x * x
                if mom:
                    out_f[o_e2c + k + 1] += eps_c * eps_c
                    out_f[o_e4c + k + 1] += eps_c * eps_c * eps_c * eps_c
                if rec:
                    tr_s[t, 1, T_EPSFB, k] = arg
                    tr_s[t, 1, T_X, k + 1] = x
                    tr_s[t, 1, T_Y, k + 1] = x + z
                    tr_s[t, 1, T_EPS, k + 1] = eps_c
            if paired and clean_m != clean_c:
                bad_j = True
        if paired and clean_m and clean_c and eps_m != eps_c:
            bad_path = True

        err_m = False
        err_c = False
        km = np.int64(0)
        kc = np.int64(0)
        if do_mod:
            km, err_m = _decide(eps_m, inv2eta, lo_m, hi_m, words)
            if err_m:
                out_i[I_ERR_M] += 1
            if err_m or not clean_m:
                out_i[I_UNI_M] += 1
            if rec:
                tr_f[t, 0, m1] = km
                tr_f[t, 0, n] = 1 if err_m else 0
        if do_cpl:
            kc, err_c = _decide(eps_c, inv2eta, lo_c, hi_c, words)
            if err_c:
                out_i[I_ERR_C] += 1
            if err_c or not clean_c:
                out_i[I_UNI_C] += 1
            if rec:
                tr_f[t, 1, m1] = kc
                tr_f[t, 1, n] = 1 if err_c else 0
        if paired:
            bad_u = (err_m or not clean_m) != (err_c or not clean_c)
            if bad_u:
                out_i[I_VIOL_UNION] += 1
            if bad_path:
                out_i[I_VIOL_PATH] += 1
            if bad_j:
                out_i[I_VIOL_J] += 1
            if (bad_u or bad_path or bad_j) and out_i[I_FIRST_VIOL] < 0:
                out_i[I_FIRST_VIOL] = i

        # the primary system feeds the error log
        if do_mod:
            if err_m:
                log[nlog, 0] = i
                log[nlog, 1] = n if first_m < 0 else first_m + 1
                log[nlog, 2] = EVENT_DECODE if first_m < 0 else EVENT_ALIAS
                log[nlog, 3] = km
                nlog += 1
        elif err_c:
            log[nlog, 0] = i
            log[nlog, 1] = n if first_c < 0 else first_c + 1
            log[nlog, 2] = EVENT_DECODE if first_c < 0 else EVENT_ALIAS
            log[nlog, 3] = kc
            nlog += 1

        if want_p:
            am = pa_m / n
            ac = pa_c / n
            out_f[F_PA_M] += am
            out_f[F_PA_M2] += am * am
            out_f[F_PA_C] += ac
            out_f[F_PA_C2] += ac * ac
            out_f[F_PD] += am - ac
            out_f[F_PD2] += (am - ac) * (am - ac)
            if m1 > 0:
                b = pb / m1
                out_f[F_PB] += b
                out_f[F_PB2] += b * b
        if rec:
            for q in range(2 * n - 1):
                tr_n[t, 0, q] = nm[q]
                tr_n[t, 1, q] = nc[q]
            for q in range(m1):
                tr_u[t, 0, q] = um[q]
                tr_u[t, 1, q] = uc[q]
            tr_w[t, 0, 0] = lo_m
            tr_w[t, 0, 1] = hi_m
            tr_w[t, 1, 0] = lo_c
            tr_w[t, 1, 1] = hi_c
    out_i[I_NLOG] = nlog


# ---------------------------------------------------------------------------
# numpy implementation


def _theta_np(lo, hi, fp):
    def gd(x):
        x = x.copy()
        for s in (1, 2, 4, 8, 16, 32):
            x ^= x >> np.uint64(s)
        return x

    jh = gd(hi)
    jl = gd(lo)
    jl = np.where((jh & np.uint64(1)) != 0, jl ^ _ALL, jl)
    jf = jh.astype(np.float64) * _TWO64 + jl.astype(np.float64)
    return ((2.0 * jf + 1.0) * fp[6] - 1.0) * fp[5]


def _tape_np(seed, idx, n, need_u, d, words):
    keys = rng.trial_keys(seed, idx)
    lo, hi = rng.message_words(keys)
    lo &= words[0]
    hi &= words[1]
    nrm = rng.normals(keys, n)
    if need_u:
        u = (rng.dither_uniforms(keys, n) - 0.5) * d
    else:
        u = np.zeros((len(idx), max(n - 1, 0)))
    return lo, hi, nrm, u


def _decide_np(eps, inv2eta, lo, hi, words):
    k = np.floor(eps * inv2eta + 0.5).astype(np.int64)
    at_bottom = (lo == 0) & (hi == 0)
    at_top = (lo == words[2]) & (hi == words[3])
    err = (k != 0) & ~((k < 0) & at_bottom) & ~((k > 0) & at_top)
    return k, err


def _run_chunk_np(seed, start, count, ip, fp, words, alpha, beta, gamma,
                  out_i, out_f, log, tr_s, tr_f, tr_n, tr_u, tr_w):
    n = int(ip[0])
    do_mod, do_cpl, want_p = bool(ip[2]), bool(ip[3]), bool(ip[4])
    shift = int(ip[5])
    mom = bool(ip[6])
    sqrt_p, sigma, sigma_fb, d = fp[0], fp[1], fp[2], fp[3]
    h = 0.5 * d
    inv2eta = fp[4]
    n_cap = tr_s.shape[0]
    m1 = n - 1
    paired = do_mod and do_cpl
    idx = np.arange(start, start + count, dtype=np.int64)
    need_u = want_p or n_cap > 0
    lo_m, hi_m, nm, um = _tape_np(seed, idx, n, need_u, d, words)
    if do_cpl and (shift != 0 or not do_mod):
        lo_c, hi_c, nc, uc = _tape_np(seed, idx + shift, n, need_u, d, words)
    else:
        lo_c, hi_c, nc, uc = lo_m, hi_m, nm, um

    zeros = np.zeros(count)
    x1m = sqrt_p * _theta_np(lo_m, hi_m, fp) if need_u else zeros
    x1c = sqrt_p * _theta_np(lo_c, hi_c, fp) if need_u else zeros
    systems = []
    if do_mod:
        systems.append((0, nm, um, x1m))
    if do_cpl:
        systems.append((1, nc, uc, x1c))
    ntr = min(n_cap, count)
    state = {}
    for s, nrm, u, x1 in systems:
        eps = sigma * nrm[:, 0] / sqrt_p
        st = dict(eps=eps, clean=np.ones(count, bool), first=np.full(count, -1),
                  pa=x1 * x1, pb=np.zeros(count))
        state[s] = st
        o2 = F_ROUNDS + 2 * n * s
        if mom:
            out_f[o2] += np.sum(eps * eps)
            out_f[o2 + n] += np.sum(eps ** 4)
        if ntr:
            tr_s[:ntr, s, T_X, 0] = x1[:ntr]
            tr_s[:ntr, s, T_Y, 0] = x1[:ntr] + sigma * nrm[:ntr, 0]
            tr_s[:ntr, s, T_EPS, 0] = eps[:ntr]
    bad_path = np.zeros(count, bool)
    bad_j = np.zeros(count, bool)
    for k in range(m1):
        g = gamma[k]
        if paired:
            both = state[0]["clean"] & state[1]["clean"]
            bad_path |= both & (state[0]["eps"] != state[1]["eps"])
        for s, nrm, u, _ in systems:
            st = state[s]
            eps = st["eps"]
            zf = sigma_fb * nrm[:, n + k]
            arg = g * eps + zf
            inside = (arg >= -h) & (arg < h)
            alias = ~inside
            newly = alias & st["clean"]
            out_i[I_ROUNDS + s * m1 + k] += int(np.count_nonzero(alias))
            out_i[I_ROUNDS + (2 + s) * m1 + k] += int(np.count_nonzero(newly))
            st["first"] = np.where(newly, k, st["first"])
            st["clean"] = st["clean"] & inside
            res = mod_array(arg, d) if s == 0 else arg
            if need_u:
                xt = mod_array(u[:, k] + g * eps, d) if s == 0 else u[:, k] + g * eps
                if s == 0:
                    st["pb"] += xt * xt
                if ntr:
                    tr_s[:ntr, s, T_XFB, k] = xt[:ntr]
                    tr_s[:ntr, s, T_YFB, k] = xt[:ntr] + zf[:ntr]
            x = alpha[k] * res
            z = sigma * nrm[:, k + 1]
            eps = eps - beta[k] * (x + z)
            st["eps"] = eps
            st["pa"] += x * x
            o2 = F_ROUNDS + 2 * n * s
            if mom:
                out_f[o2 + k + 1] += np.sum(eps * eps)
                out_f[o2 + n + k + 1] += np.sum(eps ** 4)
            if ntr:
                tr_f[:ntr, s, k] = alias[:ntr]
                tr_s[:ntr, s, T_EPSFB, k] = res[:ntr]
                tr_s[:ntr, s, T_X, k + 1] = x[:ntr]
                tr_s[:ntr, s, T_Y, k + 1] = x[:ntr] + z[:ntr]
                tr_s[:ntr, s, T_EPS, k + 1] = eps[:ntr]
        if paired:
            bad_j |= state[0]["clean"] != state[1]["clean"]
    if paired:
        both = state[0]["clean"] & state[1]["clean"]
        bad_path |= both & (state[0]["eps"] != state[1]["eps"])

    words_of = {0: (lo_m, hi_m), 1: (lo_c, hi_c)}
    for s, *_ in systems:
        st = state[s]
        kk, err = _decide_np(st["eps"], inv2eta, *words_of[s], words)
        st["k"], st["err"] = kk, err
        st["union"] = err | ~st["clean"]
        out_i[I_ERR_M + s] += int(np.count_nonzero(err))
        out_i[I_UNI_M + s] += int(np.count_nonzero(st["union"]))
        if ntr:
            tr_f[:ntr, s, m1] = kk[:ntr]
            tr_f[:ntr, s, n] = err[:ntr]
    if paired:
        bad_u = state[0]["union"] != state[1]["union"]
        out_i[I_VIOL_UNION] += int(np.count_nonzero(bad_u))
        out_i[I_VIOL_PATH] += int(np.count_nonzero(bad_path))
        out_i[I_VIOL_J] += int(np.count_nonzero(bad_j))
        bad = np.flatnonzero(bad_u | bad_path | bad_j)
        if bad.size and out_i[I_FIRST_VIOL] < 0:
            out_i[I_FIRST_VIOL] = idx[bad[0]]

    st = state[0] if do_mod else state[1]
    hit = np.flatnonzero(st["err"])
    nlog = int(out_i[I_NLOG])
    first = st["first"][hit]
    log[nlog:nlog + hit.size, 0] = idx[hit]
    log[nlog:nlog + hit.size, 1] = np.where(first < 0, n, first + 1)
    log[nlog:nlog + hit.size, 2] = np.where(first < 0, EVENT_DECODE, EVENT_ALIAS)
    log[nlog:nlog + hit.size, 3] = st["k"][hit]
    out_i[I_NLOG] = nlog + hit.size

    if want_p:
        am = state[0]["pa"] / n if do_mod else zeros
        ac = state[1]["pa"] / n if do_cpl else zeros
        out_f[F_PA_M] += np.sum(am)
        out_f[F_PA_M2] += np.sum(am * am)
        out_f[F_PA_C] += np.sum(ac)
        out_f[F_PA_C2] += np.sum(ac * ac)
        out_f[F_PD] += np.sum(am - ac)
        out_f[F_PD2] += np.sum((am - ac) ** 2)
        if m1 > 0 and do_mod:
            b = state[0]["pb"] / m1
            out_f[F_PB] += np.sum(b)
            out_f[F_PB2] += np.sum(b * b)
    if ntr:
        tr_n[:ntr, 0] = nm[:ntr]
        tr_n[:ntr, 1] = nc[:ntr]
        tr_u[:ntr, 0] = um[:ntr]
        tr_u[:ntr, 1] = uc[:ntr]
        tr_w[:ntr, 0, 0], tr_w[:ntr, 0, 1] = lo_m[:ntr], hi_m[:ntr]
        tr_w[:ntr, 1, 0], tr_w[:ntr, 1, 1] = lo_c[:ntr], hi_c[:ntr]


def default_backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def run_chunk(spec: KernelSpec, seed, start: int, count: int, n_capture: int = 0,
              backend: str = None) -> ChunkResult:
    """Simulate trials ``start .. start+count-1`` and return their statistics."""
    backend = backend or default_backend()
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is disabled")
    fn = {"numba": _run_chunk_nb, "numpy": _run_chunk_np}[backend]
    ip, fp, words, alpha, beta, gamma = spec.packed()
    out_i = np.zeros(spec.n_int, dtype=np.int64)
    out_i[I_FIRST_VIOL] = -1
    out_f = np.zeros(spec.n_float)
    log = np.zeros((count, 4), dtype=np.int64)
    n_capture = min(n_capture, count)
    tb = TraceBuffers.empty(n_capture, spec.n_rounds)
    fn(rng.as_seed(seed), np.int64(start), np.int64(count), ip, fp, words,
       alpha, beta, gamma, out_i, out_f, log,
       tb.signals, tb.flags, tb.normals, tb.offsets, tb.words)
    nlog = int(out_i[I_NLOG])
    return ChunkResult(out_i, out_f, log[:nlog].copy(), tb)

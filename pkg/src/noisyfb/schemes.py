"""Protocol state machines for the AWGN channel with AWGN feedback.

``run_sk`` is the noiseless-feedback baseline, ``run_noisy_fb`` the dithered
modulo scheme for noisy feedback (and its modulo-free coupled twin), and
``run_interlaced_block`` the two-stream block version on a cubic lattice.

Scalar runs choose between two arithmetics. ``"fast"`` uses float64 in
estimation-error coordinates and is bit-identical to the Monte Carlo kernels.
``"exact"`` runs the protocol literally (transmit sqrt(P)*theta, subtract
gamma*theta at Terminal A, ...) in mpmath with enough digits to resolve the
whole message, and serves as the reference for the fast path.
"""

from dataclasses import dataclass, field, asdict
import json
import math
from typing import Optional, Sequence

import mpmath
import numpy as np

from . import rng
from .errors import ConfigError
from .kernels import KernelSpec, kernel_theta
from .lattice import CubicLattice, _mod, interval_for_power, lattice_mod
from .modulation import PamConstellation, gray_decode, gray_encode

MODES = ("modulo", "coupled", "both")


@dataclass(frozen=True)
class SystemParams:
    """Physical setup: powers, noise variances and the number of rounds."""

    P: float
    P_fb: float
    sigma2: float
    sigma2_fb: float
    N: int

    def __post_init__(self):
        for name in ("P", "P_fb", "sigma2", "sigma2_fb"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"must be positive and finite, got {v!r}", name)
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ConfigError(f"must be a positive integer, got {self.N!r}", "N")
        if not self.dsnr > 1:
            raise ConfigError(f"feedback must be better than feedforward (dsnr={self.dsnr})", "dsnr")

    @classmethod
    def from_snr(cls, snr: float, dsnr: float, N: int, P: float = 1.0, P_fb: float = 1.0):
        """Build from linear snr and dsnr (feedback snr = snr * dsnr)."""
        if not snr > 0:
            raise ConfigError("must be positive", "snr")
        if not dsnr > 0:
            raise ConfigError("must be positive", "dsnr")
        return cls(P, P_fb, P / snr, P_fb / (snr * dsnr), int(N))

    @classmethod
    def from_db(cls, snr_db: float, dsnr_db: float, N: int, **kw):
        return cls.from_snr(10 ** (snr_db / 10), 10 ** (dsnr_db / 10), N, **kw)

    @property
    def snr(self) -> float:
        return self.P / self.sigma2

    @property
    def snr_fb(self) -> float:
        return self.P_fb / self.sigma2_fb

    @property
    def dsnr(self) -> float:
        return self.snr_fb / self.snr

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def sigma_fb(self) -> float:
        return math.sqrt(self.sigma2_fb)

    def with_rounds(self, N: int) -> "SystemParams":
        return SystemParams(self.P, self.P_fb, self.sigma2, self.sigma2_fb, int(N))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SchemeParams:
    """Protocol coefficients. ``beta[k]`` scales Y_{k+2}; ``gamma[k]`` is gamma_{k+1}."""

    L: float
    d: float
    alpha: float
    beta: np.ndarray
    gamma: np.ndarray
    sigma_n: np.ndarray

    def __post_init__(self):
        for name in ("beta", "gamma", "sigma_n"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.sigma_n)
        if len(self.beta) != n - 1 or len(self.gamma) != n - 1:
            raise ConfigError("coefficient sequences have inconsistent lengths")

    @property
    def N(self) -> int:
        return len(self.sigma_n)

    def to_dict(self) -> dict:
        return {
            "L": self.L, "d": self.d, "alpha": self.alpha,
            "beta": self.beta.tolist(), "gamma": self.gamma.tolist(),
            "sigma_n": self.sigma_n.tolist(),
        }


def message_bits(N: int, rate: float) -> int:
    """Total message length N*rate, which must be a whole number of bits."""
    if not rate > 0:
        raise ConfigError(f"must be positive, got {rate!r}", "rate")
    b = N * rate
    bits = int(round(b))
    if abs(b - bits) > 1e-9 or bits < 1:
        raise ConfigError(f"N*rate = {b} is not a positive whole number of bits", "rate")
    return bits


@dataclass(eq=False)
class NoiseTape:
    """Everything random in one trial.

    ``u`` holds uniform offsets on [-d/2, d/2). The dither actually added at
    Terminal B is ``V_n = [u_n - gamma_n * theta] mod d``, which given the
    message is again uniform and independent of the noises, so it is a valid
    dither; this form lets implementations work without resolving theta.
    """

    message: int
    z: np.ndarray
    z_fb: np.ndarray
    u: np.ndarray

    @property
    def N(self) -> int:
        return len(self.z)

    @classmethod
    def zeros(cls, message: int, N: int) -> "NoiseTape":
        return cls(int(message), np.zeros(N), np.zeros(N - 1), np.zeros(N - 1))

    @classmethod
    def generate(cls, seed: int, index: int, sys: SystemParams, bits: int, d: float,
                 sigma: Optional[float] = None, sigma_fb: Optional[float] = None):
        """Tape of trial ``index`` for master ``seed`` (numpy generator path)."""
        n = sys.N
        keys = rng.trial_keys(seed, [index])
        lo, hi = rng.message_words(keys)
        nrm = rng.normals(keys, n)[0]
        u = (rng.dither_uniforms(keys, n)[0] - 0.5) * d
        s = sys.sigma if sigma is None else sigma
        sf = sys.sigma_fb if sigma_fb is None else sigma_fb
        return cls(rng.message_int(lo[0], hi[0], bits), s * nrm[:n], sf * nrm[n:2 * n - 1], u)

    def to_dict(self) -> dict:
        return {"message": str(self.message), "z": self.z.tolist(),
                "z_fb": self.z_fb.tolist(), "u": self.u.tolist()}


@dataclass(eq=False)
class RoundTrace:
    """Per-round signals of one run.

    ``eps_fb`` is Terminal A's modulo residual (the gamma-scaled estimate of
    B's error plus feedback noise) that gets retransmitted. In coupled traces
    ``x_fb`` is reported relative to the tape offset (``u_n + gamma_n*eps_n``,
    equal to the unreduced symbol up to the known shift), since the coupled
    system never reduces it.
    """

    mode: str
    message: int
    theta: float
    x: np.ndarray
    y: np.ndarray
    x_fb: np.ndarray
    y_fb: np.ndarray
    eps: np.ndarray
    eps_fb: np.ndarray
    theta_hat: np.ndarray
    alias: np.ndarray
    decoded: int
    error: bool
    decision_offset: int = 0

    @property
    def N(self) -> int:
        return len(self.x)

    @property
    def any_alias(self) -> bool:
        return bool(np.any(self.alias))

    @property
    def union_event(self) -> bool:
        return self.any_alias or self.error

    def to_dict(self) -> dict:
        arr = lambda a: np.asarray(a).tolist()
        return {
            "mode": self.mode, "message": str(self.message), "theta": self.theta,
            "X": arr(self.x), "Y": arr(self.y), "X_fb": arr(self.x_fb), "Y_fb": arr(self.y_fb),
            "eps": arr(self.eps), "eps_fb": arr(self.eps_fb), "theta_hat": arr(self.theta_hat),
            "alias": [bool(a) for a in self.alias], "decoded": str(self.decoded),
            "error": bool(self.error), "decision_offset": int(self.decision_offset),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "RoundTrace":
        f = lambda k: np.asarray(d[k], dtype=np.float64)
        return cls(d["mode"], int(d["message"]), float(d["theta"]), f("X"), f("Y"),
                   f("X_fb"), f("Y_fb"), f("eps"), f("eps_fb"), f("theta_hat"),
                   np.asarray(d["alias"], dtype=bool), int(d["decoded"]), bool(d["error"]),
                   int(d.get("decision_offset", 0)))

    def same_as(self, other: "RoundTrace") -> bool:
        """Bitwise equality of every recorded quantity."""
        a, b = self.to_dict(), other.to_dict()
        return json.dumps(a) == json.dumps(b)


# ---------------------------------------------------------------------------
# coefficient sequences


def sk_sigma_n(sys: SystemParams) -> np.ndarray:
    """sigma_n for the noiseless-feedback recursion: 1/(snr (1+snr)^(n-1))."""
    n = np.arange(sys.N)
    return np.exp(-0.5 * (math.log(sys.snr) + n * math.log1p(sys.snr)))


def sk_coefficients(sys: SystemParams):
    """(alpha_n, beta_{n+1}) for n = 1..N-1."""
    s = sk_sigma_n(sys)
    alpha = math.sqrt(sys.P) / s[:-1]
    beta = s[:-1] / sys.sigma * math.sqrt(sys.snr) / (1.0 + sys.snr)
    return alpha, beta


def _decide_offset(eps: float, eta: float) -> int:
    return math.floor(eps * (0.5 / eta) + 0.5)


def _finish(c: PamConstellation, message: int, k: int):
    j = gray_decode(message)
    jh = min(max(j + k, 0), c.size - 1)
    return gray_encode(jh), jh != j


def noisy_kernel_spec(sys: SystemParams, sp: SchemeParams, rate: float, mode: str,
                      want_power=False, cpl_shift=0, zero_noise=False) -> KernelSpec:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}", "mode")
    if sp.N != sys.N:
        raise ConfigError("scheme parameters were derived for a different N", "N")
    bits = message_bits(sys.N, rate)
    c = PamConstellation(bits)
    return KernelSpec(
        n_rounds=sys.N, bits=bits, sqrt_p=math.sqrt(sys.P),
        sigma=0.0 if zero_noise else sys.sigma,
        sigma_fb=0.0 if zero_noise else sys.sigma_fb,
        d=sp.d, eta=c.eta, alpha=np.full(sys.N - 1, sp.alpha), beta=sp.beta, gamma=sp.gamma,
        do_mod=mode in ("modulo", "both"), do_cpl=mode in ("coupled", "both"),
        want_power=want_power, cpl_shift=cpl_shift,
    )


def sk_kernel_spec(sys: SystemParams, rate: float, want_power=False, zero_noise=False) -> KernelSpec:
    bits = message_bits(sys.N, rate)
    alpha, beta = sk_coefficients(sys)
    # No modulo: an interval this wide never aliases.
    return KernelSpec(
        n_rounds=sys.N, bits=bits, sqrt_p=math.sqrt(sys.P),
        sigma=0.0 if zero_noise else sys.sigma, sigma_fb=0.0, d=1e300,
        eta=PamConstellation(bits).eta, alpha=alpha, beta=beta, gamma=np.ones(sys.N - 1),
        do_mod=False, do_cpl=True, want_power=want_power,
    )


# ---------------------------------------------------------------------------
# scalar runners


def _fast_run(c, message, tape, n, sqrt_p, alpha, beta, gamma, d, reduce, mode):
    """Float64 run in error coordinates; mirrors the compiled kernel op for op."""
    h = 0.5 * d
    j = gray_decode(message)
    theta = c.amplitude(j)
    x = np.zeros(n)
    y = np.zeros(n)
    xf = np.zeros(n - 1)
    yf = np.zeros(n - 1)
    eps = np.zeros(n)
    epsf = np.zeros(n - 1)
    alias = np.zeros(n - 1, dtype=bool)
    x[0] = sqrt_p * kernel_theta(message, c.bits_per_symbol, c.eta)
    y[0] = x[0] + tape.z[0]
    e = tape.z[0] / sqrt_p
    eps[0] = e
    for k in range(n - 1):
        g = gamma[k]
        zf = tape.z_fb[k]
        arg = g * e + zf
        inside = -h <= arg < h
        alias[k] = not inside
        res = _mod(arg, d) if (reduce and not inside) else arg
        xt = _mod(tape.u[k] + g * e, d) if reduce else tape.u[k] + g * e
        xf[k] = xt
        yf[k] = xt + zf
        epsf[k] = res
        xk = alpha[k] * res
        z = tape.z[k + 1]
        e = e - beta[k] * (xk + z)
        x[k + 1] = xk
        y[k + 1] = xk + z
        eps[k + 1] = e
    koff = _decide_offset(e, c.eta)
    decoded, err = _finish(c, message, koff)
    return RoundTrace(mode, message, theta, x, y, xf, yf, eps, epsf, theta + eps, alias,
                      decoded, err, koff)


def _mp_mod(x, d):
    r = x - d * mpmath.floor(x / d + mpmath.mpf(0.5))
    return r


def exact_dps(N: int, rate: float) -> int:
    """Decimal digits that resolve an N*rate-bit PAM point with room to spare."""
    return int(math.ceil(0.302 * N * rate)) + 30


def _exact_run(c, message, tape, n, P, alpha, beta, gamma, d, reduce, mode, dps):
    """Literal protocol in arbitrary precision."""
    mpf = mpmath.mpf
    with mpmath.workdps(dps):
        d_m = mpf(d)
        h = d_m / 2
        sqrt_p = mpmath.sqrt(mpf(P))
        theta = c.amplitude_mp(gray_decode(message))
        x1 = sqrt_p * theta
        y1 = x1 + mpf(tape.z[0])
        th = y1 / sqrt_p
        xs, ys, ths = [x1], [y1], [th]
        xf, yf, epsf, alias = [], [], [], []
        for k in range(n - 1):
            g = mpf(gamma[k])
            zf = mpf(tape.z_fb[k])
            v = _mp_mod(mpf(tape.u[k]) - g * theta, d_m)
            xt = g * th + v
            if reduce:
                xt = _mp_mod(xt, d_m)
            yt = xt + zf
            arg = g * (th - theta) + zf
            alias.append(not (-h <= arg < h))
            res = yt - g * theta - v
            if reduce:
                res = _mp_mod(res, d_m)
            xk = mpf(alpha[k]) * res
            yk = xk + mpf(tape.z[k + 1])
            th = th - mpf(beta[k]) * yk
            xf.append(xt)
            yf.append(yt)
            epsf.append(res)
            xs.append(xk)
            ys.append(yk)
            ths.append(th)
        # symbol decision on the full-precision estimate
        jh = c.nearest_index(th)
        j = gray_decode(message)
        decoded = gray_encode(jh)
        fl = lambda a: np.array([float(v) for v in a], dtype=np.float64)
        eps = fl([t - theta for t in ths])
        return RoundTrace(mode, message, float(theta), fl(xs), fl(ys), fl(xf), fl(yf), eps,
                          fl(epsf), fl(ths), np.array(alias, dtype=bool), decoded, jh != j,
                          jh - j)


def _check_tape(tape: NoiseTape, sys: SystemParams, bits: int):
    if tape.N != sys.N or len(tape.z_fb) != sys.N - 1 or len(tape.u) != sys.N - 1:
        raise ConfigError("tape length does not match N", "tape")
    if not 0 <= tape.message < (1 << bits):
        raise ConfigError("message index out of range", "tape")


def run_sk(sys: SystemParams, rate: float, tape: NoiseTape, arithmetic: str = "fast") -> RoundTrace:
    """Noiseless-feedback iterative scheme; the tape's feedback entries are ignored."""
    bits = message_bits(sys.N, rate)
    _check_tape(tape, sys, bits)
    c = PamConstellation(bits)
    alpha, beta = sk_coefficients(sys)
    n = sys.N
    quiet = NoiseTape(tape.message, tape.z, np.zeros(n - 1), np.zeros(n - 1))
    if arithmetic == "fast":
        tr = _fast_run(c, tape.message, quiet, n, math.sqrt(sys.P), alpha, beta,
                       np.ones(n - 1), 1e300, False, "sk")
    elif arithmetic == "exact":
        tr = _exact_run(c, tape.message, quiet, n, sys.P, alpha, beta, np.ones(n - 1),
                        1e300, False, "sk", exact_dps(n, rate))
    else:
        raise ConfigError(f"unknown arithmetic {arithmetic!r}", "arithmetic")
    # with noiseless feedback B returns its own estimate
    tr.x_fb = tr.theta_hat[:-1].copy()
    tr.y_fb = tr.x_fb.copy()
    tr.eps_fb = tr.eps[:-1].copy()
    return tr


def run_noisy_fb(sys: SystemParams, sp: SchemeParams, rate: float, tape: NoiseTape,
                 mode: str = "modulo", arithmetic: str = "fast"):
    """Run the modulo scheme, its coupled twin, or both on one tape.

    Returns a single trace, or ``(modulo_trace, coupled_trace)`` for ``mode="both"``.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}", "mode")
    if sp.N != sys.N:
        raise ConfigError("scheme parameters were derived for a different N", "N")
    bits = message_bits(sys.N, rate)
    _check_tape(tape, sys, bits)
    c = PamConstellation(bits)
    n = sys.N
    alpha = np.full(n - 1, sp.alpha)

    def one(reduce):
        name = "modulo" if reduce else "coupled"
        if arithmetic == "fast":
            return _fast_run(c, tape.message, tape, n, math.sqrt(sys.P), alpha, sp.beta,
                             sp.gamma, sp.d, reduce, name)
        if arithmetic == "exact":
            return _exact_run(c, tape.message, tape, n, sys.P, alpha, sp.beta, sp.gamma,
                              sp.d, reduce, name, exact_dps(n, rate))
        raise ConfigError(f"unknown arithmetic {arithmetic!r}", "arithmetic")

    if mode == "both":
        return one(True), one(False)
    return one(mode == "modulo")


# ---------------------------------------------------------------------------
# power bookkeeping


@dataclass
class PowerReport:
    """Average transmit powers per terminal (per channel use of the whole block)."""

    terminal_a: float
    terminal_a_se: float
    terminal_b: float
    terminal_b_se: float
    terminal_b_active: float
    terminal_b_active_se: float
    n_rounds: int
    samples: int
    terminal_a_excess: Optional[float] = None
    terminal_a_excess_se: Optional[float] = None

    def excess_db(self, P: float) -> float:
        """Terminal A power above ``P`` in dB (control-variate estimate when available)."""
        pa = P + self.terminal_a_excess if self.terminal_a_excess is not None else self.terminal_a
        return 10.0 * math.log10(pa / P)

    def to_dict(self) -> dict:
        return asdict(self)


def _mean_se(v):
    v = np.asarray(v, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()) if v.size else float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def measure_power(source) -> PowerReport:
    """Power report from a list of traces or from a Monte Carlo report.

    Lists may mix modulo and coupled traces; pairs ``(modulo, coupled)`` from
    ``mode="both"`` runs also enable a control-variate estimate of Terminal
    A's excess over the coupled system, whose power is exact by design.
    """
    if hasattr(source, "power") and not isinstance(source, (list, tuple)):
        if source.power is None:
            raise ValueError("report was produced without power collection")
        return source.power
    pairs = [t for t in source if isinstance(t, tuple)]
    singles = [t for t in source if not isinstance(t, tuple)]
    mod = [p[0] for p in pairs] + [t for t in singles if t.mode != "coupled"]
    traces = mod if mod else singles
    if not traces:
        raise ValueError("no traces")
    n = traces[0].N
    a = [float(np.mean(t.x ** 2)) for t in traces]
    b_act = [float(np.mean(t.x_fb ** 2)) if n > 1 else 0.0 for t in traces]
    b = [float(np.sum(t.x_fb ** 2)) / n for t in traces]
    am, ase = _mean_se(a)
    bm, bse = _mean_se(b)
    bam, base = _mean_se(b_act)
    rep = PowerReport(am, ase, bm, bse, bam, base, n, len(traces))
    if pairs:
        diff = [float(np.mean(m.x ** 2) - np.mean(c.x ** 2)) for m, c in pairs]
        rep.terminal_a_excess, rep.terminal_a_excess_se = _mean_se(diff)
    return rep


# ---------------------------------------------------------------------------
# interlaced block scheme


@dataclass(frozen=True, eq=False)
class BlockCodebook:
    """``2**bits`` codewords of length ``dim`` with unit average power per symbol."""

    codewords: np.ndarray

    @classmethod
    def gaussian(cls, bits: int, dim: int, seed: int) -> "BlockCodebook":
        if bits > 20:
            raise ConfigError("exhaustive ML decoding is limited to 20-bit codebooks", "bits")
        g = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 0xB10C]))
        cw = g.standard_normal((1 << bits, dim))
        cw /= math.sqrt(np.mean(cw ** 2))
        return cls(cw)

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]

    def decode(self, theta_hat: np.ndarray) -> np.ndarray:
        """ML (nearest codeword) decisions for rows of ``theta_hat``."""
        th = np.atleast_2d(theta_hat)
        half = 0.5 * np.sum(self.codewords ** 2, axis=1)
        step = max(1, (1 << 22) // self.size)
        out = np.empty(th.shape[0], dtype=np.int64)
        for a in range(0, th.shape[0], step):
            metric = th[a:a + step] @ self.codewords.T - half
            out[a:a + step] = np.argmax(metric, axis=1)
        return out


def block_schedule(K: int):
    """Interlaced two-stream schedule.

    Returns ``(block, direction, stream, round)`` tuples for blocks 1..2K:
    stream 1 sends round k forward in block 2k-1 and gets its feedback in
    block 2k; stream 2 runs one block later.
    """
    if K < 1:
        raise ConfigError("need K >= 1", "K")
    events = []
    for s in (1, 2):
        for k in range(1, K + 1):
            events.append((2 * (k - 1) + s, "ff", s, k))
            if k < K:
                events.append((2 * (k - 1) + s + 1, "fb", s, k))
    events.sort()
    seen = set()
    for blk, direction, _, _ in events:
        if (blk, direction) in seen:
            raise ConfigError(f"schedule conflict in block {blk}", "schedule")
        seen.add((blk, direction))
    return events


@dataclass(eq=False)
class BlockTape:
    """Noise for one stream of the block scheme; arrays are (rounds, dim)."""

    message: int
    z: np.ndarray
    z_fb: np.ndarray
    u: np.ndarray

    @classmethod
    def generate(cls, seed, index, stream, sys, lat, n_messages, sigma=None, sigma_fb=None):
        g = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), int(index), stream]))
        K, n = sys.N, lat.dim
        s = sys.sigma if sigma is None else sigma
        sf = sys.sigma_fb if sigma_fb is None else sigma_fb
        h = 0.5 * lat.cell_side
        return cls(int(g.integers(n_messages)), s * g.standard_normal((K, n)),
                   sf * g.standard_normal((K - 1, n)), g.uniform(-h, h, (K - 1, n)))

    @classmethod
    def zeros(cls, message, K, dim):
        return cls(int(message), np.zeros((K, dim)), np.zeros((K - 1, dim)), np.zeros((K - 1, dim)))


@dataclass(eq=False)
class BlockTrace:
    stream: int
    mode: str
    message: int
    x: np.ndarray
    y: np.ndarray
    x_fb: np.ndarray
    y_fb: np.ndarray
    theta_hat: np.ndarray
    alias: np.ndarray  # (K-1,) any component out of the cell
    decoded: int
    error: bool


@dataclass(eq=False)
class BlockTracePair:
    streams: tuple
    schedule: list
    coupled: Optional[tuple] = None


def _run_block_stream(sys, sp, lat, code, tape, stream, reduce):
    K, n = sys.N, lat.dim
    sqrt_p = math.sqrt(sys.P)
    theta = code.codewords[tape.message]
    x = np.zeros((K, n))
    y = np.zeros((K, n))
    xf = np.zeros((max(K - 1, 0), n))
    yf = np.zeros_like(xf)
    th = np.zeros((K, n))
    alias = np.zeros(max(K - 1, 0), dtype=bool)
    h = 0.5 * lat.cell_side
    x[0] = sqrt_p * theta
    y[0] = x[0] + tape.z[0]
    th[0] = y[0] / sqrt_p
    for k in range(K - 1):
        g = sp.gamma[k]
        v = lattice_mod(tape.u[k] - g * theta, lat)
        xt = g * th[k] + v
        if reduce:
            xt = lattice_mod(xt, lat)
        yt = xt + tape.z_fb[k]
        arg = g * (th[k] - theta) + tape.z_fb[k]
        alias[k] = bool(np.any((arg < -h) | (arg >= h)))
        res = yt - g * theta - v
        if reduce:
            res = lattice_mod(res, lat)
        x[k + 1] = sp.alpha * res
        y[k + 1] = x[k + 1] + tape.z[k + 1]
        th[k + 1] = th[k] - sp.beta[k] * y[k + 1]
        xf[k] = xt
        yf[k] = yt
    dec = int(code.decode(th[-1])[0])
    return BlockTrace(stream, "modulo" if reduce else "coupled", tape.message, x, y, xf, yf,
                      th, alias, dec, dec != tape.message)


def run_interlaced_block(sys: SystemParams, lat: CubicLattice, code: BlockCodebook, K: int,
                         tapes: Sequence[BlockTape], sp: SchemeParams,
                         mode: str = "modulo") -> BlockTracePair:
    """Two interlaced streams of the vector scheme over ``2K`` blocks."""
    if code.dim != lat.dim:
        raise ConfigError("codebook blocklength differs from lattice dimension", "dim")
    if sys.N != K or sp.N != K:
        raise ConfigError("system/scheme parameters must be built for K rounds", "K")
    if len(tapes) != 2:
        raise ConfigError("need one tape per stream", "tapes")
    if not math.isclose(lat.cell_side, sp.d, rel_tol=1e-12):
        raise ConfigError("lattice cell side must match the modulo interval", "lattice")
    for t in tapes:
        if t.z.shape != (K, lat.dim):
            raise ConfigError("tape shape mismatch", "tapes")
    sched = block_schedule(K)
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}", "mode")
    run = lambda reduce: tuple(
        _run_block_stream(sys, sp, lat, code, t, s + 1, reduce) for s, t in enumerate(tapes)
    )
    if mode == "coupled":
        return BlockTracePair(run(False), sched)
    pair = BlockTracePair(run(True), sched)
    if mode == "both":
        pair.coupled = run(False)
    return pair


def lattice_for(sys: SystemParams, dim: int) -> CubicLattice:
    return CubicLattice(dim, interval_for_power(sys.P_fb))

"""Command-line front end.

Settings come from built-in defaults, then a ``--config`` JSON file, then
command-line flags, each overriding the previous. Data goes to stdout or
``--output``; timing goes to stderr so data output is reproducible.

Exit codes: 0 success, 1 bad configuration, 2 infeasible parameters,
3 audit failure.
"""

import argparse
from dataclasses import dataclass, asdict, fields
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import analysis, exponents, montecarlo
from .errors import ConfigError, InfeasibleParametersError, OutOfRegimeError
from .numerics import capacity
from .schemes import RoundTrace, SystemParams, message_bits

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_AUDIT = 0, 1, 2, 3
SEED_ENV = "NOISYFB_SEED"


@dataclass
class ExperimentConfig:
    snr_db: object = "derived"
    dsnr_db: float = 20.0
    rate: float = 4.0
    n_rounds: int = 19
    target_pe: float = 1e-6
    trials: Optional[int] = None
    master_seed: Optional[int] = None
    mode: str = "modulo"
    output_path: Optional[str] = None
    workers: Optional[int] = None
    baseline: Optional[str] = None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object", "config")
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown field(s) {sorted(extra)}", sorted(extra)[0])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        def num(name, lo=None, integer=False, positive=False):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"must be a number, got {v!r}", name)
            if integer and (isinstance(v, float) and not v.is_integer()):
                raise ConfigError(f"must be an integer, got {v!r}", name)
            if positive and not v > 0:
                raise ConfigError(f"must be positive, got {v!r}", name)
            if not math.isfinite(v):
                raise ConfigError("must be finite", name)
        if self.snr_db != "derived":
            num("snr_db")
        num("dsnr_db")
        num("rate", positive=True)
        num("n_rounds", integer=True, positive=True)
        self.n_rounds = int(self.n_rounds)
        num("target_pe", positive=True)
        if not self.target_pe < 1:
            raise ConfigError("must be below 1", "target_pe")
        if self.trials is not None:
            num("trials", integer=True, positive=True)
            self.trials = int(self.trials)
        if self.master_seed is not None:
            num("master_seed", integer=True)
            self.master_seed = int(self.master_seed)
        if self.workers is not None:
            num("workers", integer=True, positive=True)
            self.workers = int(self.workers)
        if self.mode not in ("modulo", "coupled", "both"):
            raise ConfigError(f"must be modulo, coupled or both, got {self.mode!r}", "mode")
        if self.baseline not in (None, "sk"):
            raise ConfigError(f"unknown baseline {self.baseline!r}", "baseline")
        try:
            message_bits(self.n_rounds, self.rate)
        except ConfigError as e:
            raise ConfigError(str(e).split(": ", 1)[-1], "rate") from None

    def seed(self) -> int:
        if self.master_seed is not None:
            return self.master_seed
        env = os.environ.get(SEED_ENV)
        if env:
            try:
                return int(env, 0)
            except ValueError:
                raise ConfigError(f"{SEED_ENV}={env!r} is not an integer", "master_seed")
        return 0

    def default_trials(self) -> int:
        return int(math.ceil(30.0 / self.target_pe))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _trials_arg(s: str) -> int:
    v = float(s)
    if not v.is_integer() or v < 1:
        raise argparse.ArgumentTypeError(f"invalid trial count {s!r}")
    return int(v)


def _experiment_args(p):
    p.add_argument("--config", help="JSON experiment file")
    p.add_argument("--snr-db", dest="snr_db", help="forward snr in dB, or 'derived' (default)")
    p.add_argument("--dsnr-db", dest="dsnr_db", type=float)
    p.add_argument("--rate", type=float, help="bits per channel use")
    p.add_argument("--n", dest="n_rounds", type=int, help="rounds N")
    p.add_argument("--pe", dest="target_pe", type=float, help="target error probability")
    p.add_argument("--trials", type=_trials_arg)
    p.add_argument("--seed", dest="master_seed", type=lambda s: int(s, 0))
    p.add_argument("--workers", type=int)
    p.add_argument("--output", dest="output_path")
    p.add_argument("--fast", action="store_true", help="CI preset: pe=1e-4, 30/pe trials")
    p.add_argument("--backend", choices=("numba", "numpy"))


def _load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON ({e.msg} at line {e.lineno} column {e.colno})",
                              "config")
        except OSError as e:
            raise ConfigError(f"cannot read {args.config}: {e.strerror}", "config")
    cfg = ExperimentConfig.from_mapping(data)
    if getattr(args, "fast", False):
        cfg.target_pe = 1e-4
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            if f.name == "snr_db" and v != "derived":
                try:
                    v = float(v)
                except ValueError:
                    raise ConfigError(f"must be a number or 'derived', got {v!r}", "snr_db")
            setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


def _system(cfg: ExperimentConfig):
    dsnr = 10 ** (cfg.dsnr_db / 10)
    if cfg.baseline == "sk":
        snr = 10 ** (cfg.snr_db / 10) if cfg.snr_db != "derived" else _sk_snr(cfg)
        return SystemParams.from_snr(snr, max(dsnr, 2.0), cfg.n_rounds), None
    if cfg.snr_db == "derived":
        snr = analysis.snr_for_target_rate(cfg.rate, cfg.n_rounds, cfg.target_pe, dsnr)
    else:
        snr = 10 ** (cfg.snr_db / 10)
    sys_ = SystemParams.from_snr(snr, dsnr, cfg.n_rounds)
    if cfg.n_rounds == 1:
        sp = analysis.scheme_params_for_looseness(sys_, min(1.0, 0.5 * sys_.snr_fb))
    else:
        sp = analysis.derive_scheme_params(sys_, cfg.target_pe)
    return sys_, sp


def _sk_snr(cfg) -> float:
    """Smallest snr where the noiseless-feedback decision bound meets pe."""
    lo, hi = -20.0, 80.0
    f = lambda s_db: analysis._decision_bound(
        math.log(10 ** (s_db / 10)) + (cfg.n_rounds - 1) * math.log1p(10 ** (s_db / 10)),
        cfg.n_rounds * cfg.rate)
    if f(hi) > cfg.target_pe:
        raise InfeasibleParametersError("no snr in bracket meets the target")
    while hi - lo > 1e-4:
        m = 0.5 * (lo + hi)
        lo, hi = (lo, m) if f(m) <= cfg.target_pe else (m, hi)
    return 10 ** (hi / 10)


def _plan(cfg, mode=None, collect=None, cpl_shift=0) -> montecarlo.TrialPlan:
    sys_, sp = _system(cfg)
    m = "sk" if cfg.baseline == "sk" else (mode or cfg.mode)
    col = collect or {"ser", "ber", "aliasing_per_round"}
    return montecarlo.TrialPlan(cfg.seed(), cfg.trials or cfg.default_trials(), sys_, sp,
                                cfg.rate, m, frozenset(col), cpl_shift=cpl_shift)


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    col = {"ser", "ber", "aliasing_per_round"}
    if args.power:
        col.add("power")
    if args.moments:
        col.add("moments")
    plan = _plan(cfg, collect=col)
    rep = montecarlo.estimate(plan, cfg.workers, args.backend)
    d = rep.to_dict()
    d["target_pe"] = cfg.target_pe
    d["meets_target"] = rep.ser_ci[0] <= cfg.target_pe
    _emit(json.dumps(d, indent=2, sort_keys=True) + "\n", cfg.output_path)
    if args.error_log:
        with open(args.error_log, "w") as f:
            f.write(rep.error_log_csv())
    print(f"{rep.trials} trials in {rep.wallclock:.2f} s "
          f"({rep.trials / max(rep.wallclock, 1e-9):.3g}/s, {rep.backend})", file=sys.stderr)
    return EXIT_OK


def cmd_gap_sweep(args) -> int:
    if args.n_min < 1 or args.n_max < args.n_min:
        raise ConfigError("need 1 <= n-min <= n-max", "n_range")
    if not 0 < args.pe < 1:
        raise ConfigError("must lie in (0, 1)", "pe")
    rows = analysis.gap_sweep(args.rate, args.dsnr_db, args.pe, range(args.n_min, args.n_max + 1))
    _emit(analysis.sweep_csv(rows), args.output)
    return EXIT_OK


EXPONENT_COLUMNS = ("rate", "e_sp", "e_r", "e_fb", "k_star", "l_star", "e_cl_zero_rate",
                    "above_capacity", "dsnr_db")


def exponent_rows(snr: float, dsnr: float, rates, k_max: int = 64):
    cl = exponents.chance_love_zero_rate(snr, dsnr)
    rows = []
    for r in rates:
        if exponents.above_capacity(snr, r):
            rows.append((r, 0.0, 0.0, 0.0, 0, math.nan, cl, 1))
            continue
        res = exponents.e_fb(r, snr, dsnr, k_max)
        er = exponents._e_r(snr, r)
        rows.append((r, exponents.e_sp(snr, r), er, res.value, res.k_star, res.l_star, cl, 0))
    return rows


def cmd_exponent(args) -> int:
    snr = 10 ** (args.snr_db / 10)
    c = capacity(snr)
    if args.rates:
        rates = [float(x) for x in args.rates.split(",")]
    else:
        if args.points < 2:
            raise ConfigError("need at least 2 points", "points")
        rates = list(np.linspace(0.0, args.max_fraction * c, args.points))
    lines = [",".join(EXPONENT_COLUMNS)]
    for dsnr_db in args.dsnr_db:
        for row in exponent_rows(snr, 10 ** (dsnr_db / 10), rates, args.k_max):
            lines.append(",".join(_fmt(v) for v in row + (float(dsnr_db),)))
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isnan(v):
        return "nan"
    return repr(float(v))


def cmd_audit(args) -> int:
    cfg = _load_config(args)
    if cfg.trials is None:
        cfg.trials = 1_000_000
    plan = _plan(cfg, mode="both", collect={"ser", "aliasing_per_round", "power"},
                 cpl_shift=1_000_003 if args.negative_control else 0)
    res = montecarlo.coupling_audit(plan, cfg.workers, args.backend)
    pw = res.report.power
    P, P_fb = plan.system.P, plan.system.P_fb
    b_ok = abs(pw.terminal_b_active - P_fb) <= 3 * pw.terminal_b_active_se
    a_excess = pw.excess_db(P)
    a_ok = a_excess <= 1e-3
    out = res.to_dict()
    out["power"] = pw.to_dict()
    out["checks"] = {
        "coupling": res.passed,
        "terminal_b_power_within_3se": bool(b_ok),
        "terminal_a_excess_db": a_excess,
        "terminal_a_excess_ok": bool(a_ok),
    }
    ok = res.passed and b_ok and a_ok
    out["passed"] = bool(ok)
    _emit(json.dumps(out, indent=2, sort_keys=True) + "\n", cfg.output_path)
    print("audit " + ("passed" if ok else "FAILED"), file=sys.stderr)
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_replay(args) -> int:
    cfg = _load_config(args)
    plan = _plan(cfg)
    if args.index < 0:
        raise ConfigError("must be nonnegative", "index")
    tr = montecarlo.replay(cfg.seed(), args.index, plan, args.backend)
    data = [t.to_dict() for t in tr] if isinstance(tr, tuple) else tr.to_dict()
    _emit(json.dumps(data, indent=2) + "\n", cfg.output_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="noisyfb", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("simulate", help="Monte Carlo error rate of one operating point")
    _experiment_args(s)
    s.add_argument("--mode", choices=("modulo", "coupled", "both"))
    s.add_argument("--baseline", choices=("sk",), help="noiseless-feedback baseline instead")
    s.add_argument("--power", action="store_true", help="include power statistics")
    s.add_argument("--moments", action="store_true", help="include per-round error variances")
    s.add_argument("--error-log", help="write per-error CSV here")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gap-sweep", help="capacity gap versus rounds (CSV)")
    g.add_argument("--rate", type=float, default=4.0)
    g.add_argument("--dsnr-db", type=float, nargs="+", default=[10.0, 20.0, 30.0])
    g.add_argument("--pe", type=float, default=1e-6)
    g.add_argument("--n-min", type=int, default=1)
    g.add_argument("--n-max", type=int, default=40)
    g.add_argument("--output")
    g.set_defaults(func=cmd_gap_sweep)

    e = sub.add_parser("exponent", help="error exponents versus rate (CSV)")
    e.add_argument("--snr-db", type=float, default=20.0)
    e.add_argument("--dsnr-db", type=float, nargs="+", default=[20.0])
    e.add_argument("--points", type=int, default=21)
    e.add_argument("--max-fraction", type=float, default=1.0, help="grid end as a fraction of C")
    e.add_argument("--rates", help="explicit comma-separated rates (bits)")
    e.add_argument("--k-max", type=int, default=64)
    e.add_argument("--output")
    e.set_defaults(func=cmd_exponent)

    a = sub.add_parser("audit", help="coupling, power and dither checks")
    _experiment_args(a)
    a.add_argument("--negative-control", action="store_true",
                   help="feed the coupled twin a different tape (must fail)")
    a.set_defaults(func=cmd_audit, mode=None, baseline=None)

    r = sub.add_parser("replay", help="trace of one trial (JSON)")
    _experiment_args(r)
    r.add_argument("--index", type=int, required=True)
    r.add_argument("--mode", choices=("modulo", "coupled", "both"))
    r.add_argument("--baseline", choices=("sk",))
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"noisyfb: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleParametersError, OutOfRegimeError) as e:
        print(f"noisyfb: infeasible parameters: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())

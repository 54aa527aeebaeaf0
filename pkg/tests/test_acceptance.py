"""Acceptance criteria, one test each.

Every test appends a PASS/FAIL line to the session summary and prints it.
Run directly (``python tests/test_acceptance.py``) or through pytest.
"""

import json
import math
import sys
import time

import numpy as np
import pytest

import conftest
from conftest import operating_point
from noisyfb import analysis, exponents as ex, montecarlo
from noisyfb.cli import main as cli_main
from noisyfb.numerics import capacity, gamma0
from noisyfb.montecarlo import TrialPlan

# same N range as the gap-sweep command's default
SWEEP_N = range(1, 41)


def record(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def sweep_point(rate, dsnr_db, pe):
    rows = analysis.gap_sweep(rate, [dsnr_db], pe, SWEEP_N)
    return rows, analysis.n_opt(rows, dsnr_db)


def check_point(rate, dsnr_db, gap_ref, n_ref, pe=1e-6):
    """Gap at the marked optimum; feedback iterations are N - 1 rounds."""
    rows, best = sweep_point(rate, dsnr_db, pe)
    at_ref = next(r for r in rows if r.N == n_ref)
    ok = abs(best.gap_db - gap_ref) <= 0.15 and abs((best.N - 1) - n_ref) <= 1
    txt = (f"R={rate:g} dsnr={dsnr_db:g} dB: n_opt={best.N} ({best.N - 1} iterations, "
           f"want {n_ref}+-1), gap {best.gap_db:.3f} dB (want {gap_ref}+-0.15); "
           f"gap at N={n_ref} is {at_ref.gap_db:.3f} dB")
    return ok, txt, best


def test_c01_uncoded_pam_gap():
    g = gamma0(1e-6)
    record(1, "uncoded PAM gap", abs(g - 9.0) <= 0.05, f"gamma0(1e-6) = {g:.4f} dB (9.0 +- 0.05)")


@pytest.mark.slow
def test_c02_operating_point_a():
    ok, txt, best = check_point(4.0, 20.0, 0.8, 19)
    sys_, sp = operating_point(4.0, 20.0, 1e-6, best.N)
    t0 = time.perf_counter()
    rep = montecarlo.estimate(TrialPlan(20021, 300_000_000, sys_, sp, 4.0, "modulo"))
    dt = time.perf_counter() - t0
    mc_ok = rep.ser_ci[1] <= 1.2e-6
    record(2, "operating point A", ok and mc_ok,
           f"{txt}; MC 3e8 trials at N={best.N}, snr {best.snr_db:.3f} dB: SER {rep.ser:.3e}, "
           f"95% upper {rep.ser_ci[1]:.3e} (<= 1.2e-6), {dt:.0f} s")


@pytest.mark.parametrize("rate,dsnr_db,gap,n", [(4.0, 10.0, 3.5, 11), (1.0, 10.0, 4.2, 12),
                                                (1.0, 20.0, 1.1, 22)], ids=["B", "C", "D"])
def test_c03_operating_points_b_to_d(rate, dsnr_db, gap, n):
    ok, txt, _ = check_point(rate, dsnr_db, gap, n)
    record(3, "operating points B-D", ok, txt)


@pytest.mark.slow
def test_c04_fast_tier_grid():
    pe, trials = 1e-4, 10_000_000
    t0 = time.perf_counter()
    parts, ok = [], True
    for dsnr_db in (10.0, 20.0, 30.0):
        for rate in (1.0, 2.0, 4.0):
            _, best = sweep_point(rate, dsnr_db, pe)
            sys_, sp = operating_point(rate, dsnr_db, pe, best.N)
            rep = montecarlo.estimate(TrialPlan(40000 + len(parts), trials, sys_, sp, rate))
            lo, hi = rep.ser_ci
            # exceeding the target would need the whole interval above it
            ok &= lo <= pe
            parts.append(f"({dsnr_db:g},{rate:g},N={best.N}) SER {rep.ser:.3g} "
                         f"[{lo:.3g},{hi:.3g}]")
    dt = time.perf_counter() - t0
    ok &= dt <= 60.0
    record(4, "fast tier 3x3 grid", ok, "; ".join(parts) + f"; total {dt:.1f} s (<= 60 s)")


@pytest.fixture(scope="module")
def audit_a(point_a):
    s, sp = point_a
    t0 = time.perf_counter()
    res = montecarlo.coupling_audit(TrialPlan(50005, 1_000_000, s, sp, 4.0, "both",
                                              frozenset({"ser", "aliasing_per_round", "power"})))
    return res, time.perf_counter() - t0


def test_c05_coupling_audit(audit_a):
    res, dt = audit_a
    bad = res.union_mismatches + res.path_mismatches + res.clean_mismatches
    record(5, "coupling audit at A", res.passed and bad == 0 and dt <= 10.0,
           f"1e6 paired trials: union {res.union_mismatches}, path {res.path_mismatches}, "
           f"clean {res.clean_mismatches} violations; {dt:.2f} s (<= 10 s)")


def test_c06_variance_recursion(point_a):
    s, sp = point_a
    rep = montecarlo.estimate(TrialPlan(60006, 1_000_000, s, sp, 4.0, "coupled",
                                        frozenset({"ser", "moments"})))
    m = rep.moments["coupled"]
    z = [(v - t * t) / se for v, t, se in zip(m["mean_sq"], sp.sigma_n, m["se"])]
    sk = montecarlo.estimate(TrialPlan(60007, 1_000_000, s, None, 4.0, "sk",
                                       frozenset({"ser", "moments"})))
    ms = sk.moments["coupled"]
    theory = [1 / (s.snr * (1 + s.snr) ** (n - 1)) for n in range(1, s.N + 1)]
    zs = [(v - t) / se for v, t, se in zip(ms["mean_sq"], theory, ms["se"])]
    ok = max(map(abs, z)) <= 3 and max(map(abs, zs)) <= 3 and len(z) == 19
    worst = int(np.argmax(np.abs(z))) + 1
    record(6, "variance recursion", ok,
           f"coupled max|z| {max(map(abs, z)):.2f} at n={worst} of 1..{len(z)} "
           f"({sum(abs(v) > 3 for v in z)} rounds beyond 3 sigma); "
           f"noiseless baseline max|z| {max(map(abs, zs)):.2f} (<= 3)")


@pytest.mark.slow
def test_c07_aliasing_calibration():
    pe, N = 1e-4, 10
    sys_, sp = operating_point(4.0, 10.0, pe, N)
    rep = montecarlo.estimate(TrialPlan(70007, 100_000_000, sys_, sp, 4.0, "coupled"))
    p = pe / (2 * N)
    sd = math.sqrt(p * (1 - p) / rep.trials)
    z = [(k / rep.trials - p) / sd for k in rep.per_round_alias_counts]
    record(7, "aliasing calibration", max(map(abs, z)) <= 3,
           f"1e8 coupled trials, dsnr 10 dB R=4 N={N}: p_m={p:.3g}, per-round counts "
           f"{rep.per_round_alias_counts}, max|z| {max(map(abs, z)):.2f} (<= 3)")


def test_c08_power(audit_a, point_a):
    s, _ = point_a
    pw = audit_a[0].report.power
    zb = (pw.terminal_b_active - s.P_fb) / pw.terminal_b_active_se
    exc = pw.excess_db(s.P)
    record(8, "power", abs(zb) <= 3 and exc <= 1e-3,
           f"terminal B {pw.terminal_b_active:.6f} vs {s.P_fb:g} (z {zb:.2f}, <= 3); "
           f"terminal A excess {exc:.2e} dB (<= 1e-3)")


def test_c09_exponent_algebra():
    worst = {}
    ep4 = ex.poltyrev_ep(4.0)
    worst["poltyrev"] = max(abs(ex.poltyrev_ep(np.nextafter(x, 0)) - ex.poltyrev_ep(np.nextafter(x, 9)))
                            for x in (2.0, 4.0))
    er = []
    sp_c = []
    for snr in (1.0, 10.0, 100.0):
        r = ex.regions(snr)
        er.append(abs(ex.e_rc(snr, r.r_cr) - ex.e_sp(snr, r.r_cr)))
        er.append(abs(ex.e_ex(snr, r.r_ex) - ex.e_rc(snr, r.r_ex)))
        for x in (r.r_cr, r.r_ex):
            er.append(abs(ex.e_r(snr, np.nextafter(x, 0)) - ex.e_r(snr, np.nextafter(x, 99))))
        sp_c.append(abs(ex.e_sp(snr, capacity(snr))))
    ok = worst["poltyrev"] <= 1e-12 and ep4 == pytest.approx(0.5, abs=1e-15) \
        and max(er) <= 1e-9 and max(sp_c) <= 1e-9
    record(9, "exponent algebra", ok,
           f"Poltyrev jump {worst['poltyrev']:.1e} (<= 1e-12), E_p(4)={ep4!r}; "
           f"e_r jump at R_cr/R_ex {max(er):.1e} (<= 1e-9); e_sp(C) {max(sp_c):.1e} (<= 1e-9)")


def test_c10_feedback_exponent_properties():
    snr = 100.0
    c = capacity(snr)
    grid = np.linspace(0, c, 22)[1:-1]
    t0 = time.perf_counter()
    margin = min(ex.e_fb(r, snr, d).value - ex.e_r(snr, r) / 2 for d in (100.0, 1000.0)
                 for r in grid)
    wide = np.linspace(0.1 * c, 0.8 * c, 20)
    strong = min(ex.e_fb(r, snr, 1000.0).value - ex.e_sp(snr, r) for r in wide)
    weak = sum(ex.e_fb(r, snr, 100.0).value > ex.e_sp(snr, r) for r in grid)
    dt = time.perf_counter() - t0
    ok = margin >= -1e-12 and strong > 0 and weak >= 1 and dt <= 10
    record(10, "feedback exponent properties", ok,
           f"min e_fb - e_r/2 = {margin:.3g} on 20 rates; dsnr 30 dB min e_fb - e_sp "
           f"on [0.1C, 0.8C] = {strong:.3g} (> 0); dsnr 20 dB beats e_sp at {weak}/20 rates; "
           f"{dt:.1f} s")


def test_c11_zero_rate():
    z = ex.e_fb_zero_rate_asymptotics(1e4, 100.0)
    opt = ex.e_fb(0.0, 1e4, 100.0).value
    cl = ex.chance_love_zero_rate(10.0, 10 ** 2.3)
    ours = ex.e_fb(0.0, 10.0, 10 ** 2.3).value
    ok = opt >= z.feasible_value and z.k_star == 3 and cl > ours
    record(11, "zero-rate asymptotics", ok,
           f"e_fb(0)={opt:.6g} >= balanced point {z.feasible_value:.6g} at K*={z.k_star}, "
           f"L*={z.l_star:.4g}; concatenated {cl:.6g} > e_fb(0)={ours:.6g} at snr 10 dB")


def test_c12_cli_determinism(tmp_path, capsys):
    outs = []
    t0 = time.perf_counter()
    for w in (1, 8):
        path = tmp_path / f"w{w}.json"
        log = tmp_path / f"w{w}.csv"
        code = cli_main(["simulate", "--fast", "--seed", "12", "--workers", str(w),
                         "--output", str(path), "--error-log", str(log)])
        assert code == 0
        outs.append((path.read_bytes(), log.read_bytes()))
    capsys.readouterr()
    dt = time.perf_counter() - t0
    same = outs[0] == outs[1]
    trials = json.loads(outs[0][0])["trials"]
    record(12, "CLI determinism", same and dt <= 60,
           f"simulate --fast ({trials} trials) JSON and error CSV byte-identical for workers "
           f"1 and 8: {same}; {dt:.1f} s")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))

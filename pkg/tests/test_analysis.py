import math

import numpy as np
import pytest

from noisyfb import analysis
from noisyfb.errors import InfeasibleParametersError, OutOfRegimeError
from noisyfb.modulation import pam_ser_bound
from noisyfb.numerics import capacity_gap, gamma0, qinv
from noisyfb.schemes import SystemParams


def test_looseness_example():
    ref = qinv(1e-6 / 76) ** 2 / 3
    assert analysis.looseness(1e-6, 19) == pytest.approx(ref, rel=1e-12)
    # quoted as about 10.33; the oracle value is 10.3206
    assert analysis.looseness(1e-6, 19) == pytest.approx(10.33, abs=0.015)


def test_derived_parameters():
    s = SystemParams.from_db(25.0, 20.0, 19)
    sp = analysis.derive_scheme_params(s, 1e-6)
    assert sp.sigma_n[0] == pytest.approx(1 / math.sqrt(s.snr), rel=1e-14)
    assert np.all(np.diff(sp.sigma_n) < 0)
    assert sp.alpha == pytest.approx(math.sqrt(sp.L * s.P / s.P_fb))
    assert sp.d == pytest.approx(math.sqrt(12 * s.P_fb))
    L, sf = sp.L, s.snr_fb
    n = np.arange(1, 20)
    expect = (1 / s.snr) * (1 + s.snr * (1 - L / sf) / (1 + L / s.dsnr)) ** (1 - n)
    np.testing.assert_allclose(sp.sigma_n ** 2, expect, rtol=1e-12)
    np.testing.assert_allclose(sp.gamma, np.sqrt(s.P_fb / L - s.sigma2_fb) / sp.sigma_n[:-1])
    assert np.all(np.isfinite(sp.beta)) and np.all(sp.beta > 0)


def test_infeasible_looseness():
    s = SystemParams.from_db(-5.0, 3.0, 19)
    with pytest.raises(InfeasibleParametersError):
        analysis.derive_scheme_params(s, 1e-6)


def test_total_error_bound_pieces():
    s = SystemParams.from_db(25.0, 20.0, 19)
    sp = analysis.derive_scheme_params(s, 1e-6)
    first = (s.N - 1) * analysis.per_round_alias_probability(sp.L)
    assert first == pytest.approx((s.N - 1) * 1e-6 / (2 * s.N), rel=1e-10)
    assert first < 0.5e-6
    snr = analysis.snr_for_target_rate(4.0, 19, 1e-6, 100.0)
    s2 = SystemParams.from_snr(snr, 100.0, 19)
    assert analysis.total_error_bound(s2, analysis.derive_scheme_params(s2, 1e-6), 4.0) <= 1e-6


@pytest.mark.parametrize("rate,dsnr_db,n_quoted,gap_quoted", [
    (4.0, 20.0, 19, 0.8), (4.0, 10.0, 11, 3.5), (1.0, 10.0, 12, 4.2), (1.0, 20.0, 22, 1.1)])
def test_quoted_operating_points(rate, dsnr_db, n_quoted, gap_quoted):
    rows = analysis.gap_sweep(rate, [dsnr_db], 1e-6)
    best = analysis.n_opt(rows, dsnr_db)
    # quoted counts are feedback iterations, i.e. N - 1 rounds
    assert abs((best.N - 1) - n_quoted) <= 1
    assert best.gap_db == pytest.approx(gap_quoted, abs=0.15)


def test_n_opt_marking_rule():
    rows = analysis.gap_sweep(4.0, [20.0], 1e-6)
    feas = [r for r in rows if r.feasible]
    best = min(r.gap_db for r in feas)
    marked = [r for r in rows if r.n_opt]
    assert len(marked) == 1
    m = marked[0]
    assert m.gap_db <= best + 0.2
    assert all(r.gap_db > best + 0.2 for r in feas if r.N < m.N)


def test_sweep_shape_and_csv():
    rows = analysis.gap_sweep(4.0, [10.0, 20.0, 30.0], 1e-6, range(1, 41))
    text = analysis.sweep_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0].split(",")[:7] == ["N", "dsnr_db", "snr_db", "rate", "gap_bound_db",
                                       "gap_approx_db", "feasible"]
    assert len(lines) == 1 + 120
    for d in (10.0, 20.0, 30.0):
        g = [r.gap_db for r in rows if r.dsnr_db == d]
        assert g[1] < g[0]  # feedback helps right away
    at30 = {r.N: r for r in rows if r.dsnr_db == 30.0}
    # high dsnr approaches the noiseless-feedback curve gamma0(pe/2)/N
    assert at30[40].gap_approx_db - gamma0(0.5e-6) / 40 < 0.5
    for r in rows:
        if r.feasible:
            assert capacity_gap(10 ** (r.snr_db / 10), r.rate) == pytest.approx(r.gap_db, abs=1e-9)


def test_gap_bound_near_sweep_at_point_a():
    snr = analysis.snr_for_target_rate(4.0, 19, 1e-6, 100.0)
    rep = analysis.theorem1_gap_bound(SystemParams.from_snr(snr, 100.0, 19), 1e-6)
    assert rep.gap_bound_db == pytest.approx(0.8, abs=0.15)
    assert rep.penalties.psi1 >= 1 and rep.penalties.psi2 >= 1 and rep.penalties.psi3_db >= 0


def test_high_snr_approx():
    assert analysis.high_snr_gap_approx(100.0, 1e-6, 1) == pytest.approx(gamma0(0.5e-6))
    rep = analysis.theorem1_gap_bound(SystemParams.from_db(60.0, 20.0, 19), 1e-6)
    assert abs(rep.gap_bound_db - analysis.high_snr_gap_approx(100.0, 1e-6, 19)) <= 0.3
    for snr_db in (40.0, 50.0, 60.0):
        r = analysis.theorem1_gap_bound(SystemParams.from_db(snr_db, 20.0, 19), 1e-6)
        assert r.gap_bound_db >= r.gap_approx_db - 0.5
    with pytest.raises(InfeasibleParametersError):
        analysis.high_snr_gap_approx(5.0, 1e-6, 19)


def test_penalties_vanish_with_dsnr():
    for pe, N in ((1e-6, 10), (1e-4, 5)):
        big = analysis.penalties(SystemParams.from_snr(1e3, 1e12, N), pe)
        assert big.psi1_db < 1e-8 and big.psi2_db < 1e-8
        b = analysis.theorem1_gap_bound(SystemParams.from_snr(1e3, 1e12, N), pe).gap_bound_db
        assert b == pytest.approx(gamma0(pe / 2) / N + big.psi3_db, abs=1e-6)


def test_bound_decreasing_in_dsnr():
    v = [analysis.theorem1_gap_bound(SystemParams.from_db(30.0, d, 12), 1e-6).gap_bound_db
         for d in np.linspace(12, 40, 30)]
    assert all(a > b for a, b in zip(v, v[1:]))


def test_psi3_order_one_over_snr():
    prods = []
    for snr_db in np.linspace(30, 80, 26):
        s = SystemParams.from_db(snr_db, 20.0, 10)
        prods.append(analysis.penalties(s, 1e-6).psi3_db * s.snr)
    assert max(prods) < 2 * min(prods)


def test_psi3_out_of_regime():
    with pytest.raises(OutOfRegimeError):
        analysis.penalties(SystemParams.from_db(-3.0, 30.0, 10), 1e-6)


def test_snr_search_single_round_inverts_pam_bound():
    for rate in (1.0, 2.0, 4.0):
        snr = analysis.snr_for_target_rate(rate, 1, 1e-6, 100.0)
        assert pam_ser_bound(snr, rate) <= 1e-6
        assert pam_ser_bound(snr * 10 ** (-2e-4 / 10), rate) > 1e-6


def test_snr_search_monotone_in_pe():
    assert (analysis.snr_for_target_rate(4.0, 10, 2e-6, 100.0)
            < analysis.snr_for_target_rate(4.0, 10, 1e-6, 100.0))


def test_snr_search_no_solution():
    with pytest.raises(InfeasibleParametersError):
        analysis.snr_for_target_rate(4.0, 10, 1e-6, 100.0, hi_db=5.0)


def test_concatenated_snr():
    s, loss = analysis.concatenated_snr(1.0, 1.0)
    assert s == pytest.approx(1 / 3)
    s, loss = analysis.concatenated_snr(7.0, 1e12)
    assert s == pytest.approx(7.0, rel=1e-10)
    s, loss = analysis.concatenated_snr(10.0, 1000.0)
    assert 10 * math.log10(loss) == pytest.approx(10 * math.log10(1.011), abs=1e-12)
    assert 10 * math.log10(loss) == pytest.approx(0.0475, abs=1e-4)
    assert 10.0 / loss == pytest.approx(10.0 * 1000 / 1011)


def test_bandwidth_tradeoff():
    assert analysis.bandwidth_tradeoff(5.0, 0.0, 3.0).crossover_snr_db == pytest.approx(9.0, abs=0.1)
    assert analysis.bandwidth_tradeoff(5.0, 0.0, 9.0).crossover_snr_db == pytest.approx(23.4, abs=0.1)
    t = analysis.bandwidth_tradeoff(5.0, 0.0, 3.0)
    assert t.interactive_wins and t.rate_interactive > t.rate_split
    same = analysis.bandwidth_tradeoff(20.0, 2.0, 2.0)
    assert same.crossover_snr_db == -math.inf and not same.interactive_wins
    for x in (1.0, 10.0, 30.0):
        e = analysis.bandwidth_tradeoff(x, 1.0, 1.0 - 3.0)
        assert e.rate_split > e.rate_interactive

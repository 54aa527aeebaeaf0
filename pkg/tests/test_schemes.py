import json
import math

import numpy as np
import pytest

from conftest import operating_point
from noisyfb import analysis, montecarlo
from noisyfb.errors import ConfigError
from noisyfb.lattice import CubicLattice
from noisyfb.modulation import PamConstellation, gray_encode
from noisyfb.numerics import qfunc, shannon_snr
from noisyfb.schemes import (BlockCodebook, BlockTape, NoiseTape, RoundTrace, SystemParams,
                             block_schedule, lattice_for, measure_power, message_bits,
                             run_interlaced_block, run_noisy_fb, run_sk)

SMALL = operating_point(2.0, 20.0, 1e-4, 6)


def impulse_response(run, N, which, k, message):
    """Final error for a tape whose only nonzero entry is a unit impulse."""
    t = NoiseTape.zeros(message, N)
    getattr(t, which)[k] = 1.0
    return run(t).eps


def linear_variance(run, N, sigma, sigma_fb, message):
    """Exact ensemble variance of every eps_n by linearity in the noises."""
    var = np.zeros(N)
    for k in range(N):
        var += (sigma * impulse_response(run, N, "z", k, message)) ** 2
    for k in range(N - 1):
        var += (sigma_fb * impulse_response(run, N, "z_fb", k, message)) ** 2
    return var


def test_system_params_validation():
    s = SystemParams.from_db(10.0, 20.0, 5)
    assert s.snr == pytest.approx(10.0) and s.dsnr == pytest.approx(100.0)
    assert s.snr_fb == pytest.approx(1000.0)
    with pytest.raises(ConfigError, match="dsnr"):
        SystemParams.from_snr(10.0, 1.0, 5)
    with pytest.raises(ConfigError, match="N"):
        SystemParams.from_snr(10.0, 10.0, 0)
    with pytest.raises(ConfigError, match="sigma2"):
        SystemParams(1.0, 1.0, -1.0, 0.1, 3)


def test_message_bits():
    assert message_bits(19, 4) == 76
    assert message_bits(4, 0.25) == 1
    with pytest.raises(ConfigError, match="rate"):
        message_bits(3, 0.5)
    with pytest.raises(ConfigError, match="rate"):
        message_bits(3, -1)


def test_sk_variance_exact():
    for snr, N in ((1.0, 2), (10.0, 5), (3.0, 8)):
        s = SystemParams.from_snr(snr, 10.0, N)
        var = linear_variance(lambda t: run_sk(s, 1.0, t), N, s.sigma, 0.0, 0)
        expect = [1 / (snr * (1 + snr) ** (n - 1)) for n in range(1, N + 1)]
        np.testing.assert_allclose(var, expect, rtol=1e-10)
    s = SystemParams.from_snr(1.0, 10.0, 2)
    var = linear_variance(lambda t: run_sk(s, 1.0, t), 2, s.sigma, 0.0, 0)
    assert 1 / var[-1] == pytest.approx(2.0)


def test_sk_variance_monte_carlo():
    s = SystemParams.from_snr(10.0, 10.0, 5)
    plan = montecarlo.TrialPlan(3, 1_000_000, s, None, 1.0, "sk", frozenset({"moments"}))
    m = montecarlo.estimate(plan).moments["coupled"]
    v, se = m["mean_sq"][-1], m["se"][-1]
    assert abs(v - 1 / 146410) <= 3 * se


def test_sk_decision_error_below_bound():
    snr, N, rate = 10 ** 0.6, 4, 1.0
    s = SystemParams.from_snr(snr, 10.0, N)
    snr_n = snr * (1 + snr) ** (N - 1)
    bound = 2 * qfunc(math.sqrt(3 * snr_n / shannon_snr(N * rate)))
    assert 1e-3 < bound < 0.05
    rep = montecarlo.estimate(montecarlo.TrialPlan(5, 400_000, s, None, rate, "sk"))
    assert rep.ser_ci[1] <= bound


def test_coupled_variance_matches_recursion():
    s, sp = SMALL
    run = lambda t: run_noisy_fb(s, sp, 2.0, t, "coupled")
    var = linear_variance(run, s.N, s.sigma, s.sigma_fb, 5)
    np.testing.assert_allclose(var, sp.sigma_n ** 2, rtol=1e-9)
    assert np.all(np.diff(sp.sigma_n) < 0)
    assert sp.sigma_n[0] == pytest.approx(1 / math.sqrt(s.snr))


def test_zero_noise_tape():
    s, sp = SMALL
    for w in (0, 1, 77, (1 << 12) - 1):
        for mode in ("modulo", "coupled"):
            t = run_noisy_fb(s, sp, 2.0, NoiseTape.zeros(w, s.N), mode)
            assert np.all(t.eps == 0) and not t.any_alias
            assert t.decoded == w and not t.error
        t = run_sk(s, 2.0, NoiseTape.zeros(w, s.N))
        assert t.decoded == w and np.all(t.eps == 0)


def test_modulo_symbols_in_range():
    s, sp = SMALL
    for i in range(200):
        t = run_noisy_fb(s, sp, 2.0, NoiseTape.generate(1, i, s, 12, sp.d), "modulo")
        assert np.all(np.abs(t.x_fb) <= sp.d / 2)
        np.testing.assert_allclose(t.y_fb - t.x_fb, NoiseTape.generate(1, i, s, 12, sp.d).z_fb,
                                   atol=1e-15)


def test_both_mode_sample_paths():
    s = SystemParams.from_snr(30.0, 30.0, 6)
    sp = analysis.scheme_params_for_looseness(s, 2.0)  # loose: many aliasing events
    seen = 0
    for i in range(400):
        tape = NoiseTape.generate(2, i, s, 6, sp.d)
        m, c = run_noisy_fb(s, sp, 1.0, tape, "both")
        assert m.union_event == c.union_event
        first = np.flatnonzero(m.alias)
        upto = first[0] + 1 if first.size else s.N
        np.testing.assert_array_equal(m.eps[:upto], c.eps[:upto])
        np.testing.assert_array_equal(m.alias[:upto - 1], c.alias[:upto - 1])
        seen += first.size > 0
    assert seen > 20


def test_exact_arithmetic_agrees_with_fast_path():
    s = SystemParams.from_snr(20.0, 50.0, 7)
    sp = analysis.scheme_params_for_looseness(s, 3.0)
    for i in range(25):
        tape = NoiseTape.generate(4, i, s, 14, sp.d)
        for f, e in zip(run_noisy_fb(s, sp, 2.0, tape, "both"),
                        run_noisy_fb(s, sp, 2.0, tape, "both", arithmetic="exact")):
            assert f.decoded == e.decoded and f.alias.tolist() == e.alias.tolist()
            np.testing.assert_allclose(f.eps, e.eps, rtol=1e-9, atol=1e-12 * sp.sigma_n[-1])
    t = NoiseTape.generate(4, 0, s, 14, sp.d)
    f, e = run_sk(s, 2.0, t), run_sk(s, 2.0, t, arithmetic="exact")
    assert f.decoded == e.decoded
    np.testing.assert_allclose(f.eps, e.eps, rtol=1e-9)


def test_exact_path_at_long_messages():
    s, sp = operating_point(4.0, 20.0, 1e-6, 19)
    tape = NoiseTape.generate(5, 3, s, 76, sp.d)
    f = run_noisy_fb(s, sp, 4.0, tape, "modulo")
    e = run_noisy_fb(s, sp, 4.0, tape, "modulo", arithmetic="exact")
    assert f.decoded == e.decoded == tape.message
    np.testing.assert_allclose(f.eps / sp.sigma_n, e.eps / sp.sigma_n, atol=1e-9)


def test_trace_json_round_trip():
    s, sp = SMALL
    t = run_noisy_fb(s, sp, 2.0, NoiseTape.generate(6, 1, s, 12, sp.d), "modulo")
    back = RoundTrace.from_dict(json.loads(t.to_json()))
    assert back.same_as(t)
    d = t.to_dict()
    for key in ("X", "Y", "X_fb", "Y_fb", "eps", "eps_fb", "theta_hat", "alias"):
        assert isinstance(d[key], list)


def test_errors_on_bad_inputs():
    s, sp = SMALL
    with pytest.raises(ConfigError, match="mode"):
        run_noisy_fb(s, sp, 2.0, NoiseTape.zeros(0, s.N), "neither")
    with pytest.raises(ConfigError):
        run_noisy_fb(s.with_rounds(5), sp, 2.4, NoiseTape.zeros(0, 5))
    with pytest.raises(ConfigError, match="tape"):
        run_noisy_fb(s, sp, 2.0, NoiseTape.zeros(1 << 12, s.N))


def test_power_from_traces():
    s, sp = SMALL
    pairs = [run_noisy_fb(s, sp, 2.0, NoiseTape.generate(7, i, s, 12, sp.d), "both")
             for i in range(20_000)]
    rep = measure_power(pairs)
    assert abs(rep.terminal_b_active - s.P_fb) <= 3 * rep.terminal_b_active_se
    assert rep.terminal_b == pytest.approx(rep.terminal_b_active * (s.N - 1) / s.N)
    assert abs(rep.terminal_a_excess) <= 3 * rep.terminal_a_excess_se + 1e-12
    coupled = measure_power([c for _, c in pairs])
    assert abs(coupled.terminal_a - s.P) <= 3 * coupled.terminal_a_se


def test_coupled_terminal_a_power_exact():
    # every round sends alpha*(gamma*eps + z_fb): mean square alpha^2 (P_fb/L) = P
    s, sp = SMALL
    per_round = sp.alpha ** 2 * (sp.gamma ** 2 * sp.sigma_n[:-1] ** 2 + s.sigma2_fb)
    np.testing.assert_allclose(per_round, s.P, rtol=1e-12)


# -- interlaced block scheme


def block_setup(K, dim=4, bits=8, snr_db=3.0, dsnr_db=20.0, L=8.0):
    s = SystemParams.from_db(snr_db, dsnr_db, K)
    lat = lattice_for(s, dim)
    sp = analysis.scheme_params_for_looseness(s, L)
    return s, lat, BlockCodebook.gaussian(bits, dim, 1), sp


def test_schedule():
    sch = block_schedule(3)
    assert len(sch) == 2 * 3 + 2 * 2
    assert max(b for b, *_ in sch) == 6
    ff = sorted((b, s) for b, d, s, _ in sch if d == "ff")
    assert [b for b, _ in ff] == list(range(1, 7))
    with pytest.raises(ConfigError):
        block_schedule(0)


def test_codebook():
    c = BlockCodebook.gaussian(10, 6, 3)
    assert c.size == 1024 and c.dim == 6
    assert np.mean(c.codewords ** 2) == pytest.approx(1.0)
    np.testing.assert_array_equal(c.decode(c.codewords), np.arange(1024))
    with pytest.raises(ConfigError):
        BlockCodebook.gaussian(21, 2, 0)


def test_block_k1_is_plain_coding():
    s, lat, code, sp = block_setup(1)
    g = np.random.default_rng(0)
    for i in range(50):
        tapes = [BlockTape.generate(9, i, k, s, lat, code.size) for k in (1, 2)]
        pair = run_interlaced_block(s, lat, code, 1, tapes, sp)
        for tr, tp in zip(pair.streams, tapes):
            direct = code.decode(code.codewords[tp.message] + tp.z[0] / math.sqrt(s.P))[0]
            assert tr.decoded == direct
    rep = montecarlo.simulate_block(s, lat, code, sp, 100_000, 3)
    n = 200_000
    direct = montecarlo.awgn_ml_errors(code, s.snr, n, 4) / n
    pooled = 0.5 * (rep.error_rate + direct)
    assert abs(rep.error_rate - direct) <= 3 * math.sqrt(2 * pooled * (1 - pooled) / n)


def test_block_zero_noise():
    s, lat, code, sp = block_setup(3)
    for w in (0, 5, 255):
        tapes = [BlockTape.zeros(w, 3, 4), BlockTape.zeros(255 - w, 3, 4)]
        pair = run_interlaced_block(s, lat, code, 3, tapes, sp, "both")
        for tr in pair.streams + pair.coupled:
            assert not tr.error and not tr.alias.any()
    rep = montecarlo.simulate_block(s, lat, code, sp, 1000, 1, zero_noise=True)
    assert rep.errors == [0, 0] and sum(rep.alias_counts) == 0


def test_block_matches_vectorized_simulator_law():
    s, lat, code, sp = block_setup(3)
    rep = montecarlo.simulate_block(s, lat, code, sp, 100_000, 5, mode="coupled")
    target = math.exp(-analysis.log_snr_n(s.snr, s.dsnr, sp.L, 3))
    for v, se in zip(rep.var_eps, rep.var_eps_se):
        assert abs(v - target) <= 3 * se


def test_block_modulo_symbols_in_cell():
    s, lat, code, sp = block_setup(3)
    tapes = [BlockTape.generate(3, 0, k, s, lat, code.size) for k in (1, 2)]
    for tr in run_interlaced_block(s, lat, code, 3, tapes, sp).streams:
        assert np.all(np.abs(tr.x_fb) <= lat.cell_side / 2)


def test_block_config_errors():
    s, lat, code, sp = block_setup(2)
    tapes = [BlockTape.zeros(0, 2, 4)] * 2
    with pytest.raises(ConfigError):
        run_interlaced_block(s, CubicLattice(3, lat.cell_side), code, 2, tapes, sp)
    with pytest.raises(ConfigError):
        run_interlaced_block(s, lat, code, 3, tapes, sp)
    with pytest.raises(ConfigError):
        run_interlaced_block(s, lat, code, 2, tapes[:1], sp)

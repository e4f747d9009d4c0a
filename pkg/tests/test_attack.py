"""Eve's correlators, decision rule and the validated closed-form oracle."""
import math

import numpy as np
import pytest

from kljnsim import circuit, harness
from kljnsim.attack import (
    AttackResult,
    InjectionSpec,
    analytic_ideal_success_probability,
    correlate,
    eve_decide,
    reference_rms_channel_current,
    success_probability,
    synth_injection,
)
from kljnsim.exceptions import ConfigError, ShapeMismatchError
from kljnsim.noise import K_BOLTZMANN, NoiseSpec, Waveform, synth_band_limited_gaussian
from kljnsim.protocol import BitClass

T_EFF = 7.25e16
BW = 250.0
R_L, R_H = 1000.0, 9000.0


def test_reference_rms_channel_current_value():
    # oracle: generator mean square 4kT(R_L+R_H)B over the loop resistance squared
    expected = math.sqrt(4.0 * 1.380649e-23 * T_EFF * BW / 10_000.0)
    got = reference_rms_channel_current(R_L, R_H, T_EFF, BW)
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(3.16e-4, abs=5e-7)


def test_reference_rms_scaling_and_limit():
    base = reference_rms_channel_current(R_L, R_H, T_EFF, BW)
    assert reference_rms_channel_current(R_L, R_H, 2 * T_EFF, BW) == pytest.approx(
        base * math.sqrt(2.0), rel=1e-12
    )
    assert reference_rms_channel_current(1e30, 1e30, T_EFF, BW) < 1e-12
    with pytest.raises(ValueError):
        reference_rms_channel_current(-1.0, R_H, T_EFF, BW)


def test_injection_spec_validation():
    with pytest.raises(ConfigError):
        InjectionSpec(0.0, BW)
    with pytest.raises(ConfigError):
        InjectionSpec(1.0, BW)
    with pytest.raises(ConfigError):
        InjectionSpec(0.1, -1.0)


def _noise(rms_v, seed, duration=0.1):
    return synth_band_limited_gaussian(
        NoiseSpec(BW, 2000.0, duration, rms_v, seed)
    )


def test_correlate_self_is_mean_square():
    w = _noise(2.5e-5, 17)
    assert correlate(w, w) == pytest.approx(float(np.mean(w.samples**2)), rel=1e-14)


def test_correlate_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        correlate(_noise(1e-5, 1), _noise(1e-5, 2, duration=0.2))


def test_correlate_independent_inputs_within_variance_bound():
    tau = 0.1
    bound_hits = 0
    trials = 200
    for k in range(trials):
        a = _noise(1.0, 3000 + k)
        b = _noise(1.0, 9000 + k)
        bound = 4.0 / math.sqrt(2.0 * BW * tau)
        if abs(correlate(a, b)) < bound:
            bound_hits += 1
    assert bound_hits >= 0.95 * trials


def test_correlate_mixed_signal_expectation():
    # i_ch = 0.9 * i_inj + independent noise; expectation 0.9 * <i_inj^2>
    sigma = 3e-5
    vals = []
    for k in range(1000):
        inj = _noise(sigma, 100_000 + k)
        other = _noise(sigma, 500_000 + k)
        mixed = Waveform(0.9 * inj.samples + other.samples, inj.sample_rate_hz)
        vals.append(correlate(inj, mixed))
    vals = np.array(vals)
    expected = 0.9 * sigma**2
    sem = np.std(vals) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - expected) <= 3.0 * sem


def test_eve_decide_rule_and_ties():
    assert eve_decide(0.9, 0.1) is BitClass.SECURE_LH
    assert eve_decide(0.1, 0.9) is BitClass.SECURE_HL
    rng = np.random.default_rng(5)
    flips = [eve_decide(0.5, 0.5, tie_rng=rng) is BitClass.SECURE_LH for _ in range(2000)]
    assert 0.45 <= np.mean(flips) <= 0.55
    with pytest.raises(ValueError):
        eve_decide(0.5, 0.5)


def test_success_probability_trivials():
    p, se = success_probability(np.ones(10))
    assert p == 1.0 and se == 0.0
    p, se = success_probability(np.array([1, 0, 1, 0]))
    assert p == 0.5
    assert se == pytest.approx(math.sqrt(0.25 / 4), rel=1e-12)
    with pytest.raises(ValueError):
        success_probability(np.array([]))


def test_attack_result_invariants():
    r = AttackResult(rho_a=[0.5, 0.1], rho_b=[0.1, 0.5], q=[1, 0])
    np.testing.assert_allclose(r.rho, [0.4, -0.4])
    assert r.p_e == 0.5
    assert r.n == 2
    with pytest.raises(ValueError):
        AttackResult(rho_a=[0.5], rho_b=[0.1, 0.2], q=[1])


def test_synth_injection_level_scaling():
    ref = reference_rms_channel_current(R_L, R_H, T_EFF, BW)
    spec = InjectionSpec(0.1, BW, seed=4)
    w = synth_injection(spec, ref, 2000.0, 10.0)
    measured = math.sqrt(float(np.mean(w.samples**2)))
    assert measured == pytest.approx(0.1 * ref, rel=0.03)


def _run_fixed_arrangement(r_a, r_b, level, n_bits, master):
    """Direct mini-pipeline over the ideal loop at a pinned arrangement."""
    ref = reference_rms_channel_current(R_L, R_H, T_EFF, BW)
    rhos = []
    from kljnsim.noise import johnson_rms_voltage

    for i in range(n_bits):
        streams = harness.derive_bit_streams(master, i)
        u_a = _noise(johnson_rms_voltage(r_a, T_EFF, BW), streams.alice_noise_seed)
        u_b = _noise(johnson_rms_voltage(r_b, T_EFF, BW), streams.bob_noise_seed)
        inj = _noise(level * ref, streams.eve_noise_seed)
        cfg = circuit.LoopConfig(r_a, r_b)
        out = circuit.solve_ideal_loop(
            u_a, u_b, cfg, inj, convention=circuit.SignConvention.DIVIDER_FROM_INJECTION
        )
        rhos.append(correlate(inj, out.i_cha) - correlate(inj, out.i_chb))
    return np.array(rhos)


def test_side_symmetry_of_correlator_difference():
    n = 400
    rho_lh = _run_fixed_arrangement(R_L, R_H, 0.1, n, master=42)
    rho_hl = _run_fixed_arrangement(R_H, R_L, 0.1, n, master=42)
    sigma = reference_rms_channel_current(R_L, R_H, T_EFF, BW)
    expected = 0.8 * (0.1 * sigma) ** 2  # divider asymmetry times injected power
    sem = np.std(rho_lh) / math.sqrt(n)
    assert np.mean(rho_lh) == pytest.approx(expected, abs=3 * sem)
    assert np.mean(rho_hl) == pytest.approx(-expected, abs=3 * sem)


def test_closed_form_against_normal_cdf_oracle():
    scipy_stats = pytest.importorskip("scipy.stats")
    for level in (0.001, 0.01, 0.1):
        z = 0.8 * level * math.sqrt(2 * BW * 0.1) / 2.0
        assert analytic_ideal_success_probability(
            level, R_L, R_H, BW, 0.1
        ) == pytest.approx(float(scipy_stats.norm.cdf(z)), rel=1e-12)
    # frozen values from the derivation
    assert analytic_ideal_success_probability(0.001, R_L, R_H, BW, 0.1) == pytest.approx(0.50113, abs=1e-4)
    assert analytic_ideal_success_probability(0.01, R_L, R_H, BW, 0.1) == pytest.approx(0.51128, abs=1e-4)
    assert analytic_ideal_success_probability(0.1, R_L, R_H, BW, 0.1) == pytest.approx(0.61135, abs=1e-4)


def test_closed_form_matches_monte_carlo():
    cfg = harness.SimConfig(n_bits=4000, master_seed=77)
    cell = harness.run_attack_cell(harness._cell_config(cfg, circuit.Ideal(), 0.1))
    predicted = analytic_ideal_success_probability(0.1, R_L, R_H, BW, 0.1)
    assert abs(cell.p_e - predicted) <= 3.0 * math.sqrt(predicted * (1 - predicted) / cell.n)


def test_success_monotone_in_level():
    cfg = harness.SimConfig(n_bits=2500, master_seed=88)
    p_small = harness.run_attack_cell(harness._cell_config(cfg, circuit.Ideal(), 0.01)).p_e
    p_large = harness.run_attack_cell(harness._cell_config(cfg, circuit.Ideal(), 0.1)).p_e
    assert p_large - p_small > 0.06


def test_zero_injection_is_a_coin_flip():
    cfg = harness.SimConfig(n_bits=2000, master_seed=99)
    cell = harness.run_attack_cell(harness._cell_config(cfg, circuit.Ideal(), 0.0))
    assert abs(cell.p_e - 0.5) <= 3.0 * math.sqrt(0.25 / cell.n)
    assert np.all(cell.rho_a == 0.0) and np.all(cell.rho_b == 0.0)

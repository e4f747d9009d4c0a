"""Detection defenses: ideal comparison, model-based residuals, calibration."""
import math

import numpy as np
import pytest

from kljnsim import circuit, harness
from kljnsim.attack import InjectionSpec, reference_rms_channel_current
from kljnsim.circuit import Cable, Ideal, LoopConfig, SignConvention
from kljnsim.defense import (
    DetectionConfig,
    DetectionVerdict,
    calibrate_threshold,
    compare_instantaneous_ideal,
    model_based_detect,
    simulate_expected_currents,
)
from kljnsim.exceptions import ConfigError, ShapeMismatchError
from kljnsim.noise import NoiseSpec, Waveform, synth_band_limited_gaussian

T_EFF = 7.25e16
BW = 250.0
FS = 2000.0
R_L, R_H = 1000.0, 9000.0


def _noise(rms_v, seed, duration=0.1):
    return synth_band_limited_gaussian(NoiseSpec(BW, FS, duration, rms_v, seed))


def _johnson(r):
    return math.sqrt(4 * 1.380649e-23 * T_EFF * r * BW)


def _ideal_signals(seed, level=0.0):
    u_a, u_b = _noise(_johnson(R_L), seed), _noise(_johnson(R_H), seed + 1)
    inj = None
    if level > 0:
        ref = reference_rms_channel_current(R_L, R_H, T_EFF, BW)
        inj = _noise(level * ref, seed + 2)
    out = circuit.solve_ideal_loop(u_a, u_b, LoopConfig(R_L, R_H), inj)
    return out, inj


def test_ideal_comparison_clean_loop_is_silent():
    out, _ = _ideal_signals(60)
    cfg = DetectionConfig(threshold=1e-12)
    verdict = compare_instantaneous_ideal(out.i_cha, out.i_chb, cfg)
    assert not verdict.attacked
    assert verdict.first_detection_sample is None
    assert verdict.max_residual < 1e-16


def test_ideal_comparison_residual_is_the_injected_current():
    out, inj = _ideal_signals(61, level=0.1)
    cfg = DetectionConfig(threshold=float(np.sqrt(np.mean(inj.samples**2))))
    verdict = compare_instantaneous_ideal(out.i_cha, out.i_chb, cfg)
    np.testing.assert_allclose(
        verdict.residual_trace.samples, inj.samples, rtol=0, atol=1e-16
    )
    # oracle: first sample where the injected current magnitude crosses
    expected_first = int(np.flatnonzero(np.abs(inj.samples) > cfg.threshold)[0])
    assert verdict.attacked
    assert verdict.first_detection_sample == expected_first


def test_ideal_comparison_miss_when_threshold_above_peak():
    out, inj = _ideal_signals(62, level=0.1)
    cfg = DetectionConfig(threshold=2.0 * float(np.max(np.abs(inj.samples))))
    verdict = compare_instantaneous_ideal(out.i_cha, out.i_chb, cfg)
    assert not verdict.attacked


def test_detection_config_validation():
    with pytest.raises(ConfigError):
        DetectionConfig(threshold=0.0)
    with pytest.raises(ConfigError):
        DetectionConfig(threshold=1.0, consecutive_samples=0)


def test_verdict_consistency_enforced():
    with pytest.raises(ValueError):
        DetectionVerdict(
            attacked=True,
            first_detection_sample=None,
            max_residual=0.0,
            residual_trace=Waveform(np.zeros(4), FS),
        )


def _cable_records(seed, level, variant=Cable(1000.0, 10)):
    cfg = harness.SimConfig(
        n_bits=4, variant=variant, selection_mode="fixed_lh", master_seed=seed
    )
    inj = InjectionSpec(level, BW, seed) if level > 0 else None
    from kljnsim import protocol

    rec = protocol.run_bit_exchange(
        cfg, 0, harness.derive_bit_streams(cfg.master_seed, 0), inj
    )
    return cfg, rec


def test_model_self_consistency_on_clean_run():
    cfg, rec = _cable_records(70, 0.0)
    model = circuit.model_for_variant(cfg.variant)
    loop_cfg = LoopConfig(R_L, R_H, cfg.variant)
    star_a, star_b = simulate_expected_currents(
        model, loop_cfg, rec.signals.u_cha, rec.signals.u_chb
    )
    i_rms = float(np.sqrt(np.mean(rec.signals.i_cha.samples**2)))
    res_a = rec.signals.i_cha.samples - star_a.samples
    res_b = rec.signals.i_chb.samples - star_b.samples
    assert math.sqrt(np.mean(res_a**2)) <= 1e-6 * i_rms
    assert math.sqrt(np.mean(res_b**2)) <= 1e-6 * i_rms


def test_model_residual_visible_under_attack():
    cfg, rec = _cable_records(71, 0.1)
    model = circuit.model_for_variant(cfg.variant)
    loop_cfg = LoopConfig(R_L, R_H, cfg.variant)
    star_a, _ = simulate_expected_currents(
        model, loop_cfg, rec.signals.u_cha, rec.signals.u_chb
    )
    res_a = rec.signals.i_cha.samples - star_a.samples
    inj_rms = float(np.sqrt(np.mean(rec.injected.samples**2)))
    assert math.sqrt(np.mean(res_a**2)) > 0.2 * inj_rms


def test_residual_sum_reconstructs_injected_current():
    # the two end residuals are the injection split by the cable alone;
    # their difference in the loop convention recovers the injected waveform
    cfg, rec = _cable_records(72, 0.1)
    model = circuit.model_for_variant(cfg.variant)
    loop_cfg = LoopConfig(R_L, R_H, cfg.variant)
    star_a, star_b = simulate_expected_currents(
        model, loop_cfg, rec.signals.u_cha, rec.signals.u_chb
    )
    res_a = rec.signals.i_cha.samples - star_a.samples
    res_b = rec.signals.i_chb.samples - star_b.samples
    recon = res_a - res_b
    err = np.sqrt(np.mean((recon - rec.injected.samples) ** 2))
    assert err <= 0.05 * np.sqrt(np.mean(rec.injected.samples**2))


def test_simulate_expected_currents_zero_in_zero_out():
    model = circuit.build_cable_model(1000.0, 10)
    loop_cfg = LoopConfig(R_L, R_H, Cable(1000.0, 10))
    zero = Waveform(np.zeros(100), FS)
    star_a, star_b = simulate_expected_currents(model, loop_cfg, zero, zero)
    assert np.all(star_a.samples == 0.0)
    assert np.all(star_b.samples == 0.0)


def test_simulate_expected_currents_rejects_ideal():
    model = circuit.build_cable_model(1000.0, 10)
    zero = Waveform(np.zeros(8), FS)
    with pytest.raises(ConfigError):
        simulate_expected_currents(model, LoopConfig(R_L, R_H, Ideal()), zero, zero)


def test_model_based_detect_trivial_equality():
    cfg, rec = _cable_records(73, 0.0)
    sim = (rec.signals.i_cha, rec.signals.i_chb)
    verdict = model_based_detect(rec.signals, sim, DetectionConfig(threshold=1e-9))
    assert not verdict.attacked
    assert verdict.max_residual == 0.0


def test_model_based_detect_fires_fast_under_attack():
    cfg, rec = _cable_records(74, 0.1)
    model = circuit.model_for_variant(cfg.variant)
    loop_cfg = LoopConfig(R_L, R_H, cfg.variant)
    sim = simulate_expected_currents(model, loop_cfg, rec.signals.u_cha, rec.signals.u_chb)
    det = DetectionConfig(threshold=3.2e-13)
    verdict = model_based_detect(rec.signals, sim, det)
    assert verdict.attacked
    assert verdict.latency_fraction <= 0.01


def test_detection_power_ordering_at_fixed_threshold():
    det = DetectionConfig(threshold=2e-5)  # between the 1% and 10% residual scales
    rates = []
    for level in (0.1, 0.01, 0.001):
        detected = 0
        n = 20
        for k in range(n):
            cfg, rec = _cable_records(200 + k, level)
            model = circuit.model_for_variant(cfg.variant)
            loop_cfg = LoopConfig(R_L, R_H, cfg.variant)
            sim = simulate_expected_currents(
                model, loop_cfg, rec.signals.u_cha, rec.signals.u_chb
            )
            detected += model_based_detect(rec.signals, sim, det).attacked
        rates.append(detected / n)
    assert rates[0] >= rates[1] >= rates[2]
    assert rates[0] > rates[2]


def test_calibrate_threshold_contract():
    with pytest.raises(ConfigError):
        calibrate_threshold([np.zeros(10)], multiplier=0.0)
    with pytest.raises(ValueError):
        calibrate_threshold([])
    # zero residuals (ideal system): threshold is an epsilon above zero
    det = calibrate_threshold([np.zeros(100) for _ in range(10)])
    assert 0.0 < det.threshold < 1e-300
    # with a channel reference the numerical floor engages
    det = calibrate_threshold(
        [np.zeros(100) for _ in range(10)], reference_rms=3.16e-4
    )
    assert det.threshold == pytest.approx(1e-9 * 3.16e-4, rel=1e-12)
    # a genuinely noisy pool dominates the floor
    rng = np.random.default_rng(0)
    noisy = [rng.standard_normal(100) * 1e-6 for _ in range(10)]
    det = calibrate_threshold(noisy, multiplier=5.0, reference_rms=3.16e-4)
    pooled = np.concatenate(noisy)
    assert det.threshold == pytest.approx(5.0 * np.sqrt(np.mean(pooled**2)), rel=1e-12)


def test_consecutive_sample_requirement():
    residual = np.zeros(50)
    residual[10] = 1.0  # isolated spike
    residual[20:23] = 1.0  # sustained crossing
    from kljnsim.defense import detect_residuals

    det1 = detect_residuals([residual], DetectionConfig(0.5, 1), FS)
    det3 = detect_residuals([residual], DetectionConfig(0.5, 3), FS)
    assert det1.first_detection_sample == 10
    assert det3.first_detection_sample == 22

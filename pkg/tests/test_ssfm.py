import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gosnrmon import InvalidConfigError
from gosnrmon.link import compile_link, cumulative_beta2, link_from_config
from gosnrmon.receiver import compensate_dispersion
from gosnrmon.ssfm import (
    MANAKOV,
    SsfmConfig,
    channel_select,
    dispersion_step,
    effective_length,
    nonlinear_step,
    propagate,
    wdm_multiplex,
)
from gosnrmon.waveform import (
    ComplexWaveform,
    average_power,
    frequency_grid,
    generate_symbols,
    set_average_power,
    shape_pulse,
)

from conftest import small_link


def rms(x):
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def qpsk_wave(n=2**12, pol=2, seed=1, p_dbm=0.0, sps=2):
    return set_average_power(shape_pulse(generate_symbols(n, pol, seed), 0.1, sps), p_dbm)


def single_span(length_km=40.0, launch_dbm=0.0, **fiber):
    return compile_link(link_from_config({
        "launch_power_dbm": launch_dbm, "fiber": fiber, "spans": [{"length_km": length_km}]}))


# --- dispersion ---------------------------------------------------------------


def test_dispersion_zero_is_identity():
    w = qpsk_wave()
    np.testing.assert_array_equal(dispersion_step(w, 0.0).samples, w.samples)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5e4, 5e4), st.integers(0, 2**31))
def test_dispersion_unitary_and_invertible(b, seed):
    g = np.random.default_rng(seed)
    w = ComplexWaveform(g.standard_normal((2, 1024)) + 1j * g.standard_normal((2, 1024)), 136e9)
    out = dispersion_step(w, b)
    e_in, e_out = np.sum(np.abs(w.samples) ** 2), np.sum(np.abs(out.samples) ** 2)
    assert abs(e_out - e_in) <= 1e-12 * e_in
    back = dispersion_step(out, -b)
    assert rms(back.samples - w.samples) <= 1e-12 * rms(w.samples)


def test_gaussian_pulse_matches_closed_form():
    t0, b = 10.0, 200.0  # ps, ps^2
    fs, n = 1e12, 8192
    t = (np.arange(n) - n // 2) / fs * 1e12
    w = ComplexWaveform(np.exp(-t**2 / (2 * t0**2)), fs)
    out = dispersion_step(w, b).samples[0]
    q = t0**2 - 1j * b
    expected = t0 / np.sqrt(q) * np.exp(-t**2 / (2 * q))
    assert np.max(np.abs(out - expected)) / np.max(np.abs(expected)) < 1e-6
    intensity = np.abs(out) ** 2
    width = np.sqrt(2 * np.sum(t**2 * intensity) / np.sum(intensity))
    assert width == pytest.approx(t0 * np.sqrt(1 + (b / t0**2) ** 2), rel=1e-6)


# --- nonlinearity -------------------------------------------------------------


def test_nonlinear_gamma_zero_is_identity():
    w = qpsk_wave()
    np.testing.assert_array_equal(nonlinear_step(w, 0.0, 10.0, True).samples, w.samples)


@pytest.mark.parametrize("manakov", [False, True])
def test_nonlinear_cw_phase(manakov):
    p_mw, gamma, leff = 10.0, 1.3, 21.5
    w = ComplexWaveform(np.full((1, 64), np.sqrt(p_mw), complex), 1e11)
    out = nonlinear_step(w, gamma, leff, manakov).samples
    phi = (MANAKOV if manakov else 1.0) * gamma * p_mw * 1e-3 * leff
    np.testing.assert_allclose(np.angle(out), -phi, rtol=0, atol=1e-12)
    np.testing.assert_allclose(np.abs(out), np.sqrt(p_mw), rtol=1e-15)


def test_nonlinear_preserves_magnitude():
    w = qpsk_wave(p_dbm=10.0)
    out = nonlinear_step(w, 1.3, 20.0, True)
    np.testing.assert_allclose(np.abs(out.samples), np.abs(w.samples), rtol=1e-14, atol=0)


def test_effective_length():
    a = 0.2 * np.log(10) / 10
    assert effective_length(a, 80.0) == pytest.approx((1 - np.exp(-a * 80)) / a, rel=1e-14)
    assert effective_length(0.0, 7.0) == 7.0


def test_propagate_cw_spm_phase():
    plan = single_span(80.0, launch_dbm=10.0, dispersion_ps_nm_km=17.0)
    w = ComplexWaveform(np.full((1, 256), np.sqrt(10.0), complex), 68e9)
    out = propagate(w, plan, SsfmConfig(step_km=2.0, manakov=False)).samples
    seg = plan.segments[0]
    phi = 1.3 * 10.0 * 1e-3 * effective_length(seg.alpha_per_km, 80.0)
    np.testing.assert_allclose(np.angle(out), -phi, rtol=0, atol=1e-9)
    np.testing.assert_allclose(np.abs(out) ** 2, 10.0 * 10 ** (-16 / 10), rtol=1e-9)


# --- propagate ----------------------------------------------------------------


def test_linear_limit_equals_dispersion_plus_loss():
    plan = compile_link(small_link(fiber={"gamma_per_w_km": 0.0}))
    w = qpsk_wave()
    out = propagate(w, plan, SsfmConfig(step_km=5.0))
    # the last span's loss is not restored (no amplifier after it)
    expected = dispersion_step(w, cumulative_beta2(plan, plan.total_length_km)) * 10 ** (-8.0 / 20)
    assert rms(out.samples - expected.samples) < 1e-12 * rms(expected.samples)


def test_step_halving_converges_monotonically():
    plan = single_span(40.0, launch_dbm=5.0, alpha_db_per_km=0.0)
    w = qpsk_wave(n=2**10)
    ref = propagate(w, plan, SsfmConfig(step_km=40 / 256)).samples
    errs = [rms(propagate(w, plan, SsfmConfig(step_km=40 / n)).samples - ref) for n in (4, 8, 16, 32, 64)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # second-order scheme: each halving cuts the error roughly fourfold
    assert errs[-2] / errs[-1] > 3.0


def test_step_halving_small_change_at_low_power():
    plan = single_span(40.0, launch_dbm=-10.0, alpha_db_per_km=0.0)
    w = qpsk_wave(n=2**10, p_dbm=-10.0)
    a = propagate(w, plan, SsfmConfig(step_km=0.5)).samples
    b = propagate(w, plan, SsfmConfig(step_km=0.25)).samples
    assert rms(a - b) < 1e-6 * rms(a)


def test_linear_regime_equivalence():
    plan = compile_link(small_link(launch_dbm=-20.0))
    w = qpsk_wave(p_dbm=-20.0)
    full = propagate(w, plan, SsfmConfig(step_km=2.0))
    lin = propagate(w, plan, SsfmConfig(step_km=2.0, nonlinear=False))
    assert rms(full.samples - lin.samples) < 1e-3 * rms(lin.samples)


def test_phase_limited_steps_agree_with_uniform_steps():
    plan = single_span(40.0, launch_dbm=5.0)
    w = qpsk_wave(n=2**10, p_dbm=5.0)
    fine = propagate(w, plan, SsfmConfig(step_km=0.1)).samples
    linear = propagate(w, plan, SsfmConfig(step_km=5.0, nonlinear=False)).samples
    adaptive = propagate(w, plan, SsfmConfig(step_km=5.0, max_phase_rad=5e-3)).samples
    assert rms(adaptive - fine) < 0.05 * rms(fine - linear)


def test_step_longer_than_span_rejected():
    with pytest.raises(InvalidConfigError):
        propagate(qpsk_wave(), single_span(1.0), SsfmConfig(step_km=2.0))
    with pytest.raises(InvalidConfigError):
        SsfmConfig(step_km=0.0)


def test_noise_needs_seed_and_is_deterministic():
    plan = compile_link(small_link(amps=[{"before_span": 2, "set_snr_db": 20.0}]))
    cfg = SsfmConfig(step_km=5.0, reference_bandwidth_hz=68e9)
    w = qpsk_wave()
    with pytest.raises(InvalidConfigError):
        propagate(w, plan, cfg)
    a = propagate(w, plan, cfg, seed=3).samples
    b = propagate(w, plan, cfg, seed=3).samples
    assert a.tobytes() == b.tobytes()
    c = propagate(w, plan, cfg, seed=4).samples
    assert not np.array_equal(a, c)


def test_set_snr_injection_measured_in_band():
    spec = small_link(spans=6, length_km=80.0, noise_injections=[{"before_span": 4, "set_snr_db": 20.0}])
    plan = compile_link(spec)
    w = qpsk_wave(n=2**14)
    cfg = SsfmConfig(step_km=5.0, max_phase_rad=5e-3, reference_bandwidth_hz=68e9)
    noisy = propagate(w, plan, cfg, seed=11)
    clean = propagate(w, plan, cfg.__class__(**{**cfg.__dict__, "noise": False}))
    diff = channel_select(noisy - clean, 0.0, 68e9)
    snr_db = 10 * np.log10(average_power(clean) / average_power(diff))
    assert snr_db == pytest.approx(20.0, abs=0.3)


# --- WDM ----------------------------------------------------------------------


def test_multiplex_single_channel_identity():
    w = qpsk_wave()
    out = wdm_multiplex([(w, 0.0)])
    assert rms(out.samples - w.samples) < 1e-15 * 1e3


def test_multiplex_select_recovers_channel_and_adds_power():
    a = qpsk_wave(seed=1, sps=8)
    b = qpsk_wave(seed=2, sps=8, p_dbm=3.0)
    mux = wdm_multiplex([(a, 0.0), (b, 150e9)])
    assert average_power(mux) == pytest.approx(average_power(a) + average_power(b), rel=1e-9)
    rec = channel_select(mux, 0.0, 1.1 * 68e9)
    assert rms(rec.samples - a.samples) < 1e-6 * rms(a.samples)
    rec_b = channel_select(mux, 150e9, 1.1 * 68e9)
    assert rms(rec_b.samples - b.samples) < 1e-6 * rms(b.samples)


def test_multiplex_overflow_rejected():
    w = qpsk_wave(sps=2)
    with pytest.raises(InvalidConfigError):
        wdm_multiplex([(w, 0.0), (w, 100e9)])


def test_channel_select_decimates_exactly():
    w = qpsk_wave(sps=8)
    narrow = channel_select(w, 0.0, 1.1 * 68e9, out_sample_rate=2 * 68e9)
    direct = qpsk_wave(sps=2)
    assert narrow.sample_rate == 2 * 68e9
    assert rms(narrow.samples - direct.samples) < 1e-9 * rms(direct.samples)
    f = frequency_grid(w.n_samples, w.sample_rate)
    assert f.max() < w.sample_rate / 2

from dataclasses import replace

import numpy as np
import pytest

from spcradar.errors import InvalidScenario
from spcradar.frames import IQ_PAIR, load_frames, save_frames
from spcradar.iqcorr import combine_iq, irr, measured_irr
from spcradar.model import (DistributionSpec, ImbalanceSpec, OscillatorDefects, PhaseNoiseSpec,
                            load_preset)
from spcradar.synth import (draw_defects, leakage_frequency, synth_aspc_iq_frames,
                            synth_balanced_frames, synth_homodyne_iq_frames, synth_iq_frames,
                            synth_spc_frames)

from conftest import RATE, aspc_scenario, homodyne_scenario, spc_scenario, target


def peak_hz(x, rate, nfft, complex_=False):
    if complex_:
        p = np.abs(np.fft.fft(x, nfft))
        k = int(np.argmax(p))
        return rate * (k - nfft if k > nfft // 2 else k) / nfft
    return rate * int(np.argmax(np.abs(np.fft.rfft(x, nfft)))) / nfft


def test_determinism():
    s = replace(load_preset("table1_aspc"), sweep=replace(load_preset("table1_aspc").sweep, chirps=4))
    i1, q1 = synth_aspc_iq_frames(s)
    i2, q2 = synth_aspc_iq_frames(s)
    assert np.array_equal(i1.data, i2.data) and np.array_equal(q1.data, q2.data)
    i3, _ = synth_aspc_iq_frames(s.with_seed(99))
    assert not np.array_equal(i1.data, i3.data)


def test_shapes_and_metadata():
    t1 = load_preset("table1")
    s = replace(t1, sweep=replace(t1.sweep, chirps=3))
    f = synth_spc_frames(s)
    assert f.data.shape == (3, 8192) and not f.is_complex
    assert f.rate == 10e6 and f.sample_offset == 608
    assert f.scenario_hash == s.digest()
    assert np.all(np.isfinite(f.data))


def test_energy_is_sum_of_half_squares():
    s = spc_scenario(targets=[target(20, 1.0, 0.3), target(45, -2.0, 0.2)])
    x = synth_spc_frames(s).data
    expect = (1.0 + 0.3 ** 2 + 0.2 ** 2) / 2
    np.testing.assert_allclose(np.mean(x ** 2, axis=-1), expect, rtol=1e-6)


def test_zero_defect_single_tone_peak():
    s = spc_scenario()
    x = synth_spc_frames(s).data[0]
    assert peak_hz(x, RATE, 1 << 16) == pytest.approx(RATE / 4 + 6e3, abs=RATE / (1 << 16))


def test_table1_leakage_peak():
    t1 = load_preset("table1")
    s = replace(t1, sweep=replace(t1.sweep, chirps=2), thermal_noise_floor=None)
    f = synth_spc_frames(s)
    bin_hz = f.rate / f.samples
    assert f.samples == 8192
    assert peak_hz(f.data[0], f.rate, f.samples) == pytest.approx(2.5e6 + 6e3, abs=bin_hz)


def test_target_line_separation():
    s = spc_scenario(leak_hz=6e3, targets=[target(100, amplitude=0.5)])
    x = synth_spc_frames(s).data[0]
    nfft = 1 << 16
    spec = np.abs(np.fft.rfft(x, nfft))
    f = np.fft.rfftfreq(nfft, 1 / RATE)
    k1 = int(np.argmax(spec))
    spec2 = spec.copy()
    spec2[max(0, k1 - 200):k1 + 200] = 0
    k2 = int(np.argmax(spec2))
    expect = 2 * 100 * s.sweep.bandwidth / (3e8 * s.sweep.sweep_period)
    assert abs(f[k2] - f[k1]) == pytest.approx(expect, abs=RATE / nfft)


def test_imbalance_identity():
    s = aspc_scenario(targets=[target(30, 2.0)], imbalance=ImbalanceSpec(1.0, 0.0),
                      defects=OscillatorDefects(37.0, DistributionSpec("uniform", 200.0)))
    i, q = synth_aspc_iq_frames(s)
    z = synth_balanced_frames(s)
    np.testing.assert_allclose(combine_iq(i, q).data, z.data, rtol=0, atol=1e-14)


def test_image_ratio_matches_analytic_irr():
    s = aspc_scenario(imbalance=ImbalanceSpec(1.01, 0.01))
    i, q = synth_aspc_iq_frames(s)
    z = (i.data + 1j * q.data)[0]
    spec = np.abs(np.fft.fft(z)) ** 2
    k = int(np.argmax(spec))
    ratio = 10 * np.log10(spec[k] / spec[-k % z.size])
    assert ratio == pytest.approx(irr(1.01, 0.01), abs=1.0)
    assert measured_irr(combine_iq(i, q)) == pytest.approx(irr(1.01, 0.01), abs=1.0)


def test_quarter_turn_phase_makes_q_a_cosine():
    s = aspc_scenario(imbalance=ImbalanceSpec(1.0, np.pi / 2))
    i, q = synth_aspc_iq_frames(s)
    np.testing.assert_allclose(q.data, i.data, atol=1e-12)


def test_common_mode_draws():
    s = aspc_scenario(chirps=16, targets=[target(40)],
                      defects=OscillatorDefects(0.0, DistributionSpec("gaussian", 500.0),
                                                DistributionSpec("uniform", 50.0), 4))
    d = draw_defects(s)
    assert d.f_random_ft.shape == (16,) and np.std(d.f_random_ft) > 0
    np.testing.assert_allclose(leakage_frequency(s, d), 100e3 + 6e3 + d.f_random_ft)
    # One shared draw per chirp: the leakage line moves, the spacing to the target does not.
    z = synth_balanced_frames(s).data
    nfft = 1 << 16
    f = np.fft.fftfreq(nfft, 1 / RATE)
    lines = []
    for row in z:
        spec = np.abs(np.fft.fft(row * np.hanning(row.size), nfft))
        k1 = int(np.argmax(spec))
        spec[max(0, k1 - 200):k1 + 200] = 0
        lines.append((f[k1], f[int(np.argmax(spec))]))
    lines = np.array(lines)
    assert np.ptp(lines[:, 0]) > 100.0
    np.testing.assert_allclose(lines[:, 1] - lines[:, 0], 40e3, atol=RATE / nfft)


def test_homodyne_zero_defect_line():
    s = homodyne_scenario(leak_hz=12e3)
    i, q = synth_homodyne_iq_frames(s)
    z = i.data[0] + 1j * q.data[0]
    assert peak_hz(z, RATE, 1 << 16, True) == pytest.approx(12e3, abs=RATE / (1 << 16))


def test_table3_shapes():
    t3 = load_preset("table3")
    s = replace(t3, sweep=replace(t3.sweep, chirps=2), targets=())
    i, q = synth_iq_frames(s)
    assert i.data.shape == q.data.shape == (2, 2048)
    assert i.rate == 5e6


def test_homodyne_target_offset():
    s = homodyne_scenario(leak_hz=12e3, targets=[target(50, amplitude=0.5)])
    i, q = synth_homodyne_iq_frames(s)
    z = i.data[0] + 1j * q.data[0]
    nfft = 1 << 16
    spec = np.abs(np.fft.fft(z, nfft))
    f = np.fft.fftfreq(nfft, 1 / RATE)
    k1 = int(np.argmax(spec))
    spec[max(0, k1 - 200):k1 + 200] = 0
    k2 = int(np.argmax(spec))
    expect = 2 * 50 * s.sweep.bandwidth / (3e8 * s.sweep.sweep_period)
    assert f[k2] - f[k1] == pytest.approx(expect, abs=RATE / nfft)


def test_wrong_architecture_or_plan_rejected():
    with pytest.raises(InvalidScenario):
        synth_spc_frames(aspc_scenario())
    with pytest.raises(InvalidScenario):
        synth_homodyne_iq_frames(aspc_scenario())


def test_phase_noise_spreads_the_line():
    pn = PhaseNoiseSpec(((1e3, -60.0), (1e5, -100.0)))
    s = spc_scenario(chirps=2)
    noisy = replace(s, leakage=replace(s.leakage, phase_noise=pn))
    a = np.abs(np.fft.rfft(synth_spc_frames(s).data[0])) ** 2
    b = np.abs(np.fft.rfft(synth_spc_frames(noisy).data[0])) ** 2
    k = int(np.argmax(a))
    assert np.median(b[k + 20:k + 200]) > 1e3 * np.median(a[k + 20:k + 200])


def test_frame_dump_round_trip(tmp_path):
    s = aspc_scenario(chirps=3, targets=[target(10)], thermal_noise_floor=-120.0)
    i, q = synth_aspc_iq_frames(s)
    save_frames(tmp_path / "iq.bin", i, q)
    i2, q2 = load_frames(tmp_path / "iq.bin")
    assert np.array_equal(i.data, i2.data) and np.array_equal(q.data, q2.data)
    assert i2.sample_offset == i.sample_offset and i2.scenario_hash == i.scenario_hash
    z = synth_balanced_frames(s)
    save_frames(tmp_path / "z.bin", z)
    z2 = load_frames(tmp_path / "z.bin")
    assert z2.is_complex and np.array_equal(z.data, z2.data)
    raw = (tmp_path / "iq.bin").read_bytes()
    assert raw[:8] == b"FMCWFRM\x00" and IQ_PAIR.encode() in raw[:400]

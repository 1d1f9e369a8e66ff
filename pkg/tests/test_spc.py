from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spcradar.aspc import aspc_mur
from spcradar.conventional import downconvert
from spcradar.errors import BandEmpty, EmptyFrame
from spcradar.frames import REAL, FrameCube
from spcradar.model import DistributionSpec, OscillatorDefects, load_preset
from spcradar.spc import (LeakageEstimate, estimate_leakage_spc, expected_phase_error,
                          make_nco_spc, process_spc, run_spc, search_band, spc_mur)
from spcradar.spectra import range_doppler_map
from spcradar.synth import leakage_frequency, synth_spc_frames

from conftest import N, RATE, spc_scenario, target


def tone(k, theta, n=N, amp=1.0, nfft=N):
    t = np.arange(n)
    return FrameCube(amp * np.cos(2 * np.pi * k * t / nfft + theta), RATE, REAL)


def estimate(f, theta, rate=RATE):
    f = np.atleast_1d(np.asarray(f, float))
    return LeakageEstimate(np.zeros(f.size, int), f, np.full(f.size, theta), N, rate,
                           np.zeros(f.size))


def test_search_band_endpoints():
    assert search_band(1 << 20) == (131072, 393214)
    assert search_band(1024) == (128, 382)
    lo, hi = search_band(2)
    assert hi < lo


def test_exact_bin_tone():
    est = estimate_leakage_spc(tone(300, 0.3), N)
    assert est.k_index[0] == 300
    assert est.theta_hat[0] == pytest.approx(0.3, abs=1e-9)
    assert est.f_hat[0] == RATE * 300 / N
    padded = estimate_leakage_spc(tone(300, 0.3), 8 * N)
    assert padded.k_index[0] == 2400
    assert padded.theta_hat[0] == pytest.approx(0.3, abs=1e-9)


def test_ties_go_to_lowest_bin():
    # An impulse has a perfectly flat spectrum: every searched bin ties.
    x = np.zeros((1, N))
    x[0, 0] = 1.0
    assert estimate_leakage_spc(FrameCube(x, RATE, REAL), N).k_index[0] == search_band(N)[0]


def test_table1_estimate_within_one_spacing():
    t1 = load_preset("table1")
    s = replace(t1, sweep=replace(t1.sweep, chirps=3),
                defects=replace(t1.defects, f_random_ft=DistributionSpec("uniform", 300.0)))
    frames = synth_spc_frames(s)
    nfft = 1 << 20
    assert frames.rate / nfft == pytest.approx(9.5367, abs=1e-4)
    est = estimate_leakage_spc(frames, nfft)
    truth = leakage_frequency(s)
    assert np.all(np.abs(est.f_hat - truth) <= frames.rate / nfft)


def test_out_of_band_tone_is_flagged():
    rng = np.random.default_rng(1)
    x = tone(N // 16, 0.0).data + 1e-4 * rng.standard_normal((1, N))
    est = estimate_leakage_spc(FrameCube(x, RATE, REAL), N)
    lo, hi = search_band(N)
    assert lo <= est.k_index[0] <= hi
    full = int(np.argmax(np.abs(np.fft.rfft(x[0]))))
    assert full == N // 16 != est.k_index[0]
    good = estimate_leakage_spc(FrameCube(tone(N // 4, 0.0).data + 1e-4 * rng.standard_normal((1, N)),
                                          RATE, REAL), N)
    assert est.peak_to_median_db[0] < 15.0 < good.peak_to_median_db[0] - 30.0


def test_errors():
    with pytest.raises(BandEmpty):
        estimate_leakage_spc(FrameCube(np.ones((1, 2)), RATE, REAL), 2)
    with pytest.raises(EmptyFrame):
        estimate_leakage_spc(FrameCube(np.zeros((1, 0)), RATE, REAL), 8)
    with pytest.raises(ValueError):
        estimate_leakage_spc(tone(10, 0.0), N // 2)


def test_nco_examples():
    np.testing.assert_array_equal(make_nco_spc(estimate(0.0, 0.0), 16, RATE).data, np.ones((1, 16)))
    q = make_nco_spc(estimate(RATE / 4, 0.0), 8, RATE).data[0]
    np.testing.assert_allclose(q, [1, 0, -1, 0, 1, 0, -1, 0], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, N // 2 - 1), theta=st.floats(-np.pi, np.pi))
def test_nco_rms(k, theta):
    nco = make_nco_spc(estimate(RATE * k / N, theta), N, RATE).data
    assert np.sqrt(np.mean(nco ** 2)) == pytest.approx(1 / np.sqrt(2), abs=1e-9)


def test_leakage_only_output_dc_is_half_amplitude():
    s = spc_scenario(chirps=4)
    out = run_spc(synth_spc_frames(s), 1 << 16)
    np.testing.assert_allclose(out.data.mean(axis=-1), 0.5, atol=1e-6)


def test_sum_term_is_kept():
    s = spc_scenario(chirps=1)
    res = process_spc(synth_spc_frames(s), N)
    spec = np.abs(np.fft.rfft(res.output.data[0])) / N
    k2 = N - int(round(2 * res.estimate.f_hat[0] * N / RATE))  # 524 kHz folds to 500 kHz
    assert spec[k2] == pytest.approx(0.25, rel=1e-9)


def test_output_matches_closed_form_difference_and_sum_terms():
    tg = [target(20, 1.5, 0.2, 0.7), target(47, -3.0, 0.05, -1.1)]
    s = spc_scenario(chirps=6, targets=tg)
    out = run_spc(synth_spc_frames(s), N).data
    # Closed form: the NCO equals the leakage, so every term splits into a
    # difference part at f_beat and a sum part at 2 f_L + f_beat.
    t = np.arange(N) / RATE
    m = np.arange(6)[:, None]
    fl = s.sampling.if_carrier + s.leakage.beat_frequency
    lam = s.sweep.wavelength
    ref = 0.5 * np.ones((6, N)) + 0.5 * np.cos(2 * (2 * np.pi * fl * t + 2 * np.pi * fl * 1e-3 * m + 0.4))
    for tr in tg:
        fb = 1000.0 * tr.range_m
        rot = 2 * np.pi * (2 * tr.radial_velocity / lam) * 1e-3 * m
        dphi = 2 * np.pi * fb * t + rot + tr.theta - 0.4
        sphi = 2 * np.pi * (2 * fl + fb) * t + 2 * 2 * np.pi * fl * 1e-3 * m + rot + tr.theta + 0.4
        ref = ref + 0.5 * tr.amplitude * (np.cos(dphi) + np.cos(sphi))
    assert np.max(np.abs(out - ref)) <= 1e-9


def _rd_peak(frames, band):
    rd = range_doppler_map(frames, range_band=band)
    i, j = np.unravel_index(np.argmax(rd.power_db), rd.power_db.shape)
    return int(i), int(j), rd


def test_f_offset_rotation_is_cancelled():
    tg = [target(40, 2.0, 0.1)]
    clean = spc_scenario(chirps=32, targets=tg)
    dirty = replace(clean, defects=OscillatorDefects(500.0))
    band = (30.0, 50.0)
    ref = _rd_peak(run_spc(synth_spc_frames(clean), 1 << 16), band)
    got = _rd_peak(run_spc(synth_spc_frames(dirty), 1 << 16), band)
    assert got[:2] == ref[:2]
    # The fixed-LO receiver keeps f_offset * T * M = 16 bins of rotation.
    frames = synth_spc_frames(dirty)
    none = _rd_peak(downconvert(frames, dirty.sampling.if_carrier), band)
    assert abs(none[1] - ref[1]) == 16


@pytest.mark.parametrize("f_offset,width,leak", [(0.0, 0.0, 6e3), (700.0, 0.0, 6e3),
                                                 (0.0, 400.0, 6e3), (250.0, 150.0, 31e3)])
def test_frequency_cancellation(f_offset, width, leak):
    tg = [target(25, 0.0, 0.1), target(60, 0.0, 0.05)]
    base = spc_scenario(chirps=2, targets=tg)
    moved = replace(spc_scenario(chirps=2, leak_hz=leak, targets=tg),
                    defects=OscillatorDefects(f_offset, DistributionSpec("uniform", width),
                                              DistributionSpec("uniform", width), 9))
    nfft = 1 << 16

    def lines(s):
        out = run_spc(synth_spc_frames(s), nfft).data
        spec = np.abs(np.fft.rfft(out * np.hanning(N), 4 * N, axis=-1))
        band = slice(4 * 15, 4 * 80)
        found = []
        for row in spec:
            r = row[band].copy()
            k1 = int(np.argmax(r))
            r[max(0, k1 - 20):k1 + 20] = 0
            found.append(sorted([k1, int(np.argmax(r))]))
        return np.array(found)

    assert np.all(np.abs(lines(moved) - lines(base)) <= 1)


@settings(max_examples=60, deadline=None)
@given(f=st.floats(RATE / 8 + 2e3, 3 * RATE / 8 - 2e3), theta=st.floats(-np.pi, np.pi))
def test_estimation_accuracy(f, theta):
    nfft = 16 * N
    x = FrameCube(np.cos(2 * np.pi * f * np.arange(N) / RATE + theta), RATE, REAL)
    est = estimate_leakage_spc(x, nfft)
    assert abs(est.f_hat[0] - f) <= RATE / nfft
    # Phase referenced to the first sample.
    err = np.angle(np.exp(1j * (est.theta_hat[0] - theta)))
    assert abs(err) <= expected_phase_error(nfft, N)


def test_spc_mur_ideal_and_shifted():
    plan = load_preset("table1").sampling
    rate = plan.effective_rate
    assert spc_mur(plan) == rate / 4
    ideal = estimate(np.full(4, rate / 4), 0.0, rate)
    assert spc_mur(plan, ideal) == rate / 4
    shifted = estimate(np.full(4, rate / 4 + 10e3), 0.0, rate)
    assert spc_mur(plan, shifted) < rate / 4
    assert aspc_mur(plan) / spc_mur(plan, shifted) > 2
    assert spc_mur(plan, estimate([rate / 4 - 30e3, rate / 4 + 5e3], 0.0, rate)) == pytest.approx(
        rate / 4 - 30e3)

"""Colored Gaussian phase-noise synthesis from a piecewise log-log PSD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import BreakpointBandExceedsRate
from .model import PhaseNoiseSpec


@dataclass(frozen=True)
class PhaseNoiseRealization:
    samples: np.ndarray  # (chirps, count) radians
    rms: float


def one_sided_psd(spec: PhaseNoiseSpec, freqs) -> np.ndarray:
    """Evaluate the one-sided PSD of ``spec`` [rad^2/Hz] at ``freqs``; zero at DC."""
    f = np.abs(np.asarray(freqs, dtype=float))
    pts = spec.psd_breakpoints
    if not pts:
        return np.zeros_like(f)
    logf = np.log10([p[0] for p in pts])
    lev = np.array([p[1] for p in pts]) / 10.0
    out = np.zeros_like(f)
    pos = f > 0
    lf = np.log10(f[pos])
    logs = np.interp(lf, logf, lev)
    if len(pts) >= 2:
        slope = (lev[-1] - lev[-2]) / (logf[-1] - logf[-2])
        beyond = lf > logf[-1]
        logs[beyond] = lev[-1] + slope * (lf[beyond] - logf[-1])
    out[pos] = 10.0 ** logs
    if spec.rce_enabled:
        out *= 4.0 * np.sin(np.pi * f * spec.rce_delay_tau) ** 2
    return out


def expected_rms(spec: PhaseNoiseSpec, count: int, rate: float) -> float:
    """RMS phase a length-``count`` realization carries (DC bin excluded)."""
    f = sfft.rfftfreq(count, 1.0 / rate)
    s = one_sided_psd(spec, f)
    # Discrete variance of the shaped process: sum of per-bin powers.
    weights = np.full(f.size, 2.0)
    weights[0] = 0.0
    if count % 2 == 0:
        weights[-1] = 1.0
    return float(np.sqrt(np.sum(weights * s * rate / 2.0) / count))


def scale_to_rms(spec: PhaseNoiseSpec, rms: float, count: int, rate: float) -> PhaseNoiseSpec:
    """Shift every breakpoint level so a realization has the requested RMS."""
    now = expected_rms(spec, count, rate)
    return spec.shifted(20.0 * np.log10(rms / now))


def synth_phase_noise(spec: PhaseNoiseSpec, count: int, rate: float, seed,
                      chirps: int = 1) -> PhaseNoiseRealization:
    """Draw ``chirps`` independent phase-noise sequences of ``count`` samples.

    White Gaussian noise is shaped in the frequency domain by
    sqrt(S(f) * rate / 2), which maps the unit-variance white PSD (2/rate,
    one-sided) onto S(f).  The DC bin is zeroed so each sequence is zero mean.
    """
    pts = spec.psd_breakpoints
    if pts and rate <= 2.0 * pts[-1][0]:
        raise BreakpointBandExceedsRate(
            f"rate {rate:g} Hz must exceed twice the last breakpoint {pts[-1][0]:g} Hz")
    if not pts:
        return PhaseNoiseRealization(np.zeros((chirps, count)), 0.0)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((chirps, count))
    shape = np.sqrt(one_sided_psd(spec, sfft.rfftfreq(count, 1.0 / rate)) * rate / 2.0)
    phi = sfft.irfft(sfft.rfft(white, axis=-1) * shape, n=count, axis=-1)
    return PhaseNoiseRealization(phi, float(np.sqrt(np.mean(phi ** 2))))

"""
Advanced SPC on complex (quadrature) frames.

The leakage line is found by an unrestricted argmax over the complex
zero-padded spectrum, so its frequency may be negative.  The frame is
multiplied by the conjugate of a unit complex NCO and the real part is kept.
Complex mixing produces no sum terms, so the usable band is the whole positive
half of the spectrum regardless of where the leakage sits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .frames import COMPLEX, REAL, FrameCube
from .iqcorr import ImbalanceEstimate, combine_iq, correct_iq, estimate_imbalance
from .model import SamplingPlan
from .spc import LeakageEstimate, _chunks, _nco_phase


def estimate_leakage_aspc(frames: FrameCube, nfft: int) -> LeakageEstimate:
    """Per-chirp complex leakage line; frequency signed in (-rate/2, rate/2]."""
    frames.require_nonempty()
    nfft = int(nfft)
    if nfft < frames.samples:
        raise ValueError(f"nfft {nfft} shorter than frame ({frames.samples} samples)")
    m = frames.chirps
    k = np.empty(m, dtype=np.int64)
    theta = np.empty(m)
    ptm = np.empty(m)
    for sl in _chunks(m, nfft):
        spec = sfft.fft(frames.data[sl], n=nfft, axis=-1)
        power = spec.real ** 2 + spec.imag ** 2
        kk = np.argmax(power, axis=-1)
        rows = np.arange(kk.size)
        k[sl] = kk
        theta[sl] = np.angle(spec[rows, kk])
        with np.errstate(divide="ignore"):
            ptm[sl] = 10 * np.log10(power[rows, kk] / np.median(power, axis=-1))
    signed = np.where(k > nfft // 2, k - nfft, k)
    return LeakageEstimate(k, frames.rate * signed / nfft, theta, nfft, frames.rate, ptm)


def make_nco_aspc(estimate: LeakageEstimate, samples: int, rate: float) -> FrameCube:
    """Unit-modulus complex exponential NCO, one row per chirp."""
    return FrameCube(np.exp(1j * _nco_phase(estimate, samples, rate)), rate, COMPLEX,
                     path="aspc-nco")


def mix_aspc(frames: FrameCube, estimate: LeakageEstimate) -> tuple[FrameCube, FrameCube]:
    """Conjugate-NCO mix; returns (real output, complex pre-real product)."""
    if estimate.chirps != frames.chirps:
        raise ValueError(f"estimate has {estimate.chirps} chirps, frame has {frames.chirps}")
    nco = make_nco_aspc(estimate, frames.samples, frames.rate)
    prod = frames.data * np.conj(nco.data)
    return (frames.with_data(prod.real, kind=REAL, path="aspc-output"),
            frames.with_data(prod, kind=COMPLEX, path="aspc-complex"))


@dataclass(frozen=True, eq=False)
class AspcResult:
    output: FrameCube
    complex_output: FrameCube
    corrected: FrameCube
    estimate: LeakageEstimate
    imbalance: ImbalanceEstimate | None


def process_aspc(i: FrameCube, q: FrameCube | None, nfft: int,
                 use_iq_correction: bool = True, **calib) -> AspcResult:
    """Full chain.  ``q=None`` means ``i`` is already a complex frame."""
    if q is None:
        if not i.is_complex:
            raise ValueError("single-frame input must be complex")
        z, imb = i, None
    elif use_iq_correction:
        imb = estimate_imbalance(i, q, **calib)
        z = correct_iq(i, q, imb)
    else:
        z, imb = combine_iq(i, q), None
    est = estimate_leakage_aspc(z, nfft)
    out, cplx = mix_aspc(z, est)
    return AspcResult(out, cplx, z, est, imb)


def run_aspc(i: FrameCube, q: FrameCube | None, nfft: int, use_iq_correction: bool = True) -> FrameCube:
    return process_aspc(i, q, nfft, use_iq_correction).output


def aspc_mur(plan: SamplingPlan) -> float:
    """Alias-free beat extent of the A-SPC output: half the sampling rate [Hz]."""
    return 0.5 * plan.effective_rate

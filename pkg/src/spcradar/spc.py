"""
Stationary-point concentration on real oversampled IF frames.

Each chirp is searched for the leakage line with a windowless zero-padded FFT,
a real cosine NCO is built at the estimated frequency and phase, and the frame
is multiplied by it.  Leakage phase noise then rides on cos(phi) around DC,
which suppresses it to second order.  The sum terms produced by the real mix
are kept in the output.

Bin indices are stored 0-based.  The search band written with 1-based indices
as NFFT/8 < k < 3*NFFT/8 becomes floor(NFFT/8) <= k0 <= ceil(3*NFFT/8) - 2,
and f_hat = rate * k0 / NFFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import BandEmpty, EmptyFrame
from .frames import REAL, FrameCube
from .model import SamplingPlan

_CHUNK_ELEMS = 1 << 23  # cap on spectrum elements held at once


@dataclass(frozen=True, eq=False)
class LeakageEstimate:
    """Per-chirp leakage line estimate.

    ``k_index`` is 0-based into the NFFT-point spectrum; for complex frames
    ``f_hat`` is signed in (-rate/2, rate/2].  ``peak_to_median_db`` compares
    the chosen bin against the median of the searched bins and flags chirps
    where the argmax landed on noise.
    """

    k_index: np.ndarray
    f_hat: np.ndarray
    theta_hat: np.ndarray
    nfft_used: int
    rate: float
    peak_to_median_db: np.ndarray

    @property
    def chirps(self) -> int:
        return self.f_hat.size


def search_band(nfft: int) -> tuple[int, int]:
    """Inclusive 0-based bin range equivalent to the open 1-based band (NFFT/8, 3NFFT/8)."""
    lo = nfft // 8
    hi = -(-3 * nfft // 8) - 2
    return lo, hi


def _chunks(chirps: int, nfft: int):
    step = max(1, _CHUNK_ELEMS // max(nfft, 1))
    for start in range(0, chirps, step):
        yield slice(start, min(chirps, start + step))


def estimate_leakage_spc(frames: FrameCube, nfft: int) -> LeakageEstimate:
    """Per-chirp leakage frequency and phase from the restricted zero-padded FFT."""
    frames.require_nonempty()
    if frames.is_complex:
        raise ValueError("SPC estimation needs a real frame")
    nfft = int(nfft)
    if nfft < frames.samples:
        raise ValueError(f"nfft {nfft} shorter than frame ({frames.samples} samples)")
    lo, hi = search_band(nfft)
    if hi < lo:
        raise BandEmpty(f"no bins inside the SPC search band for nfft={nfft}")
    m = frames.chirps
    k = np.empty(m, dtype=np.int64)
    theta = np.empty(m)
    ptm = np.empty(m)
    for sl in _chunks(m, nfft):
        spec = sfft.rfft(frames.data[sl], n=nfft, axis=-1)[:, lo:hi + 1]
        power = spec.real ** 2 + spec.imag ** 2
        kk = np.argmax(power, axis=-1)  # first maximum: lowest index wins ties
        rows = np.arange(kk.size)
        peak = power[rows, kk]
        med = np.median(power, axis=-1)
        k[sl] = kk + lo
        theta[sl] = np.angle(spec[rows, kk])
        with np.errstate(divide="ignore"):
            ptm[sl] = 10.0 * np.log10(peak / med)
    return LeakageEstimate(k, frames.rate * k / nfft, theta, nfft, frames.rate, ptm)


def _nco_phase(estimate: LeakageEstimate, samples: int, rate: float) -> np.ndarray:
    n = np.arange(samples)
    # Cycle count reduced mod 1 first so long chirps keep full phase precision.
    cycles = np.mod(np.outer(estimate.f_hat / rate, n), 1.0)
    return 2.0 * np.pi * cycles + estimate.theta_hat[:, None]


def make_nco_spc(estimate: LeakageEstimate, samples: int, rate: float) -> FrameCube:
    """Real cosine NCO, one row per chirp."""
    return FrameCube(np.cos(_nco_phase(estimate, samples, rate)), rate, REAL, path="spc-nco")


def mix_spc(frames: FrameCube, estimate: LeakageEstimate) -> FrameCube:
    if estimate.chirps != frames.chirps:
        raise ValueError(f"estimate has {estimate.chirps} chirps, frame has {frames.chirps}")
    nco = make_nco_spc(estimate, frames.samples, frames.rate)
    return frames.with_data(frames.data * nco.data, path="spc-output")


@dataclass(frozen=True, eq=False)
class SpcResult:
    output: FrameCube
    estimate: LeakageEstimate


def process_spc(frames: FrameCube, nfft: int) -> SpcResult:
    est = estimate_leakage_spc(frames, nfft)
    return SpcResult(mix_spc(frames, est), est)


def run_spc(frames: FrameCube, nfft: int) -> FrameCube:
    """Estimate, build the NCO and mix; sum terms are left in the output."""
    return process_spc(frames, nfft).output


def _fold(f, rate):
    return np.abs(np.mod(f + rate / 2.0, rate) - rate / 2.0)


def spc_mur(plan: SamplingPlan, estimate: LeakageEstimate | None = None) -> float:
    """Alias-free beat-frequency extent of the SPC output [Hz].

    A target at f_hat + f_b leaves two lines after the real mix: the wanted
    one at f_b and the folded sum term at fold(2*f_hat) - f_b.  They meet at
    fold(2*f_hat)/2, and the target itself leaves the first Nyquist zone at
    rate/2 - f_hat.  The MUR is the smaller of the two, minimized over chirps;
    it equals rate/4 when f_hat sits on the quarter point and shrinks as the
    leakage moves off it.
    """
    rate = plan.effective_rate
    f = np.atleast_1d(plan.if_carrier if estimate is None else estimate.f_hat).astype(float)
    zone = rate / 2.0 - np.abs(f)
    mirror = _fold(2.0 * f, rate) / 2.0
    return float(max(0.0, np.min(np.minimum(zone, mirror))))


def expected_phase_error(nfft: int, samples: int) -> float:
    """Worst-case wrapped phase error of an on-grid estimate, pi*samples/nfft [rad]."""
    return math.pi * samples / nfft

"""
Conventional last down-conversion (the "no technique" reference path).

A fixed LO at the nominal IF carrier removes the carrier and nothing else:
f_offset, the per-chirp random terms and the leakage beat all stay in the
output.  The LO runs on absolute time t = m*T + t_fast, so the carrier's own
slow-time rotation cancels while the offset's does not.
"""

from __future__ import annotations

import numpy as np

from .frames import REAL, FrameCube


def _lo_phase(frames: FrameCube, f_lo: float) -> np.ndarray:
    if f_lo == 0.0:
        return np.zeros((frames.chirps, frames.samples))
    m = np.arange(frames.chirps)
    slow = np.mod(f_lo * frames.sweep_period * m, 1.0)
    fast = np.mod(f_lo * frames.fast_time(), 1.0)
    return 2.0 * np.pi * (slow[:, None] + fast[None, :])


def downconvert(frames: FrameCube, f_lo: float) -> FrameCube:
    """Real frames: x * cos(2 pi f_lo t).  Complex frames: Re(x * exp(-j 2 pi f_lo t))."""
    ph = _lo_phase(frames, f_lo)
    if frames.is_complex:
        out = (frames.data * np.exp(-1j * ph)).real
    else:
        out = frames.data * np.cos(ph)
    return frames.with_data(out, kind=REAL, path="conventional")

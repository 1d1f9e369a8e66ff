"""
Reporting-domain processing: averaged power spectra, range-Doppler maps,
noise floors, SNR and improvement curves.

Power is normalized by the window's coherent gain, |X|^2 / (sum w)^2, so a
unit complex exponential on a bin reads 0 dB and a unit real cosine reads
-6.02 dB on each of its two lines.  Real frames are shown one-sided (bins 0 to
NFFT/2), complex frames two-sided with the axis fftshifted.  All claims built
on these numbers are differential, so the dB reference is arbitrary.

CSV columns are fixed: spectra ``freq_hz,range_m,power_db``; range-Doppler
maps ``range_m,velocity_mps,power_db`` (long format); improvement curves
``freq_hz,range_m,improvement_db``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft as sfft
from scipy import signal as ssig
from scipy.ndimage import maximum_filter, uniform_filter1d

from .errors import AxisMismatch, BandEmpty, PeakNotFound, TooFewChirps
from .frames import FrameCube
from .model import TargetSpec


def _window(name: str, n: int) -> np.ndarray:
    if name in ("rect", "rectangular", "boxcar", "none"):
        return np.ones(n)
    return ssig.get_window(name, n)


def _db(p):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p)


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    freqs: np.ndarray
    power_db: np.ndarray
    ranges: np.ndarray | None
    n_averaged: int
    window: str
    nfft: int
    rate: float
    two_sided: bool
    floor_estimate: float = float("nan")

    @property
    def bin_width(self) -> float:
        return self.rate / self.nfft

    def band_mask(self, band=None) -> np.ndarray:
        if band is None:
            return np.ones(self.freqs.size, dtype=bool)
        lo, hi = band
        return (self.freqs >= lo) & (self.freqs <= hi)

    def crop(self, band) -> "PowerSpectrum":
        """Restrict to ``band`` so spectra taken at different rates can be compared bin by bin."""
        sel = self.band_mask(band)
        if not sel.any():
            raise BandEmpty(f"no bins in band {band}")
        return replace(self, freqs=self.freqs[sel], power_db=self.power_db[sel],
                       ranges=None if self.ranges is None else self.ranges[sel])


@dataclass(frozen=True)
class Peak:
    range_m: float
    velocity: float
    power_db: float
    snr_db: float


@dataclass(frozen=True, eq=False)
class RangeDopplerMap:
    """``power_db[i, j]``: range bin i, Doppler bin j (Doppler fftshifted)."""

    power_db: np.ndarray
    range_axis: np.ndarray
    velocity_axis: np.ndarray
    floor_db: float
    peaks: tuple[Peak, ...]
    window: str
    nfft_range: int

    @property
    def range_spacing(self) -> float:
        return float(self.range_axis[1] - self.range_axis[0])

    @property
    def velocity_spacing(self) -> float:
        return float(self.velocity_axis[1] - self.velocity_axis[0])


def _fast_fft(frames: FrameCube, win: np.ndarray, nfft: int):
    x = frames.data * win
    if frames.is_complex:
        spec = sfft.fftshift(sfft.fft(x, n=nfft, axis=-1), axes=-1)
        freqs = sfft.fftshift(sfft.fftfreq(nfft, 1.0 / frames.rate))
    else:
        spec = sfft.rfft(x, n=nfft, axis=-1)
        freqs = sfft.rfftfreq(nfft, 1.0 / frames.rate)
    return spec, freqs


def power_spectrum(frames: FrameCube, window: str = "hann", nfft: int | None = None,
                   n_avg: int | None = None, floor_band=None, guard_bins: int = 5) -> PowerSpectrum:
    """Per-chirp windowed periodogram, averaged linearly over ``n_avg`` chirps."""
    frames.require_nonempty()
    n_avg = frames.chirps if n_avg is None else int(n_avg)
    if n_avg < 1 or n_avg > frames.chirps:
        raise TooFewChirps(f"n_avg={n_avg} but frame has {frames.chirps} chirps")
    nfft = int(nfft or frames.samples)
    win = _window(window, frames.samples)
    sub = frames.with_data(frames.data[:n_avg])
    spec, freqs = _fast_fft(sub, win, nfft)
    power = np.mean(spec.real ** 2 + spec.imag ** 2, axis=0) / np.sum(win) ** 2
    rph = frames.range_per_hz
    ps = PowerSpectrum(freqs, _db(power), None if rph is None else freqs * rph, n_avg, window,
                       nfft, frames.rate, frames.is_complex)
    try:
        fl = noise_floor(ps, floor_band, guard_bins)
    except BandEmpty:
        fl = float("nan")
    return replace(ps, floor_estimate=fl)


def _peak_mask(p_db: np.ndarray, threshold_db: float, guard: int) -> np.ndarray:
    """True for bins kept by the floor estimator (outside every peak guard)."""
    med = np.median(p_db)
    left = np.r_[-np.inf, p_db[:-1]]
    right = np.r_[p_db[1:], -np.inf]
    peaks = np.flatnonzero((p_db >= left) & (p_db >= right) & (p_db > med + threshold_db))
    keep = np.ones(p_db.size, dtype=bool)
    for k in peaks:
        keep[max(0, k - guard):k + guard + 1] = False
    return keep


def noise_floor(spectrum: PowerSpectrum, band=None, guard_bins: int = 5,
                threshold_db: float = 10.0) -> float:
    """Median power [dB] over ``band`` (Hz pair, inclusive) outside peak guards."""
    sel = spectrum.band_mask(band)
    p = spectrum.power_db[sel]
    if p.size == 0:
        raise BandEmpty(f"no bins in band {band}")
    keep = _peak_mask(p, threshold_db, guard_bins)
    if not keep.any():
        raise BandEmpty("every bin in the band lies inside a peak guard")
    return float(np.median(p[keep]))


def improvement_curve(before: PowerSpectrum, after: PowerSpectrum,
                      smooth_window: int | None = None, band=None) -> np.ndarray:
    """Smoothed per-bin dB reduction from ``before`` to ``after``.

    Smoothing is a centered moving average whose default width is 1% of the
    bins considered.  With ``band`` only the in-band bins are returned.
    """
    if before.freqs.shape != after.freqs.shape or not np.allclose(before.freqs, after.freqs,
                                                                  rtol=0, atol=1e-9 * before.rate):
        raise AxisMismatch("spectra are on different frequency axes")
    sel = before.band_mask(band)
    diff = before.power_db[sel] - after.power_db[sel]
    if smooth_window is None:
        smooth_window = max(1, int(round(0.01 * diff.size)))
    if smooth_window <= 1:
        return diff
    return uniform_filter1d(diff, smooth_window, mode="nearest")


def _parabolic(y_m, y_0, y_p):
    den = y_m - 2 * y_0 + y_p
    if not np.isfinite(den) or den >= 0:
        return 0.0, y_0
    d = 0.5 * (y_m - y_p) / den
    return d, y_0 - 0.25 * (y_m - y_p) * d


@dataclass(frozen=True)
class PeakMeasurement:
    power_db: float
    snr_db: float
    index: tuple[int, ...]
    location: tuple[float, ...]


def _truth(target):
    if isinstance(target, TargetSpec):
        return target.range_m, target.radial_velocity
    t = tuple(float(v) for v in np.atleast_1d(target))
    return t if len(t) == 2 else (t[0], 0.0)


def measure_peak(obj, target, window: int = 2, floor_db: float | None = None,
                 min_snr_db: float = 3.0) -> PeakMeasurement:
    """Strongest bin within +-``window`` bins of the truth location.

    ``target`` is a TargetSpec or a (range_m[, velocity]) pair.  Peak power is
    refined by a parabola through the dB values (separately per axis on maps).
    """
    rng, vel = _truth(target)
    if isinstance(obj, RangeDopplerMap):
        surf = obj.power_db
        fl = obj.floor_db if floor_db is None else floor_db
        i0 = int(np.argmin(np.abs(obj.range_axis - rng)))
        j0 = int(np.argmin(np.abs(obj.velocity_axis - vel)))
        r0, r1 = max(0, i0 - window), min(surf.shape[0], i0 + window + 1)
        c0, c1 = max(0, j0 - window), min(surf.shape[1], j0 + window + 1)
        box = surf[r0:r1, c0:c1]
        di, dj = np.unravel_index(int(np.argmax(box)), box.shape)
        i, j = r0 + di, c0 + dj
        pk = surf[i, j]
        p = pk
        loc_r, loc_v = obj.range_axis[i], obj.velocity_axis[j]
        if 0 < i < surf.shape[0] - 1:
            d, p_r = _parabolic(surf[i - 1, j], pk, surf[i + 1, j])
            loc_r += d * obj.range_spacing
            p += p_r - pk
        if 0 < j < surf.shape[1] - 1:
            d, p_v = _parabolic(surf[i, j - 1], pk, surf[i, j + 1])
            loc_v += d * obj.velocity_spacing
            p += p_v - pk
        index, location = (int(i), int(j)), (float(loc_r), float(loc_v))
    else:
        if obj.ranges is None:
            raise ValueError("spectrum has no range axis")
        p_db = obj.power_db
        fl = obj.floor_estimate if floor_db is None else floor_db
        k0 = int(np.argmin(np.abs(obj.ranges - rng)))
        lo, hi = max(0, k0 - window), min(p_db.size, k0 + window + 1)
        k = lo + int(np.argmax(p_db[lo:hi]))
        pk = p_db[k]
        d, p = (0.0, pk)
        if 0 < k < p_db.size - 1:
            d, p = _parabolic(p_db[k - 1], pk, p_db[k + 1])
        step = obj.ranges[1] - obj.ranges[0]
        index, location = (k,), (float(obj.ranges[k] + d * step),)
    if not np.isfinite(fl) or not pk > fl + min_snr_db:
        raise PeakNotFound(f"no peak {min_snr_db} dB above floor {fl:.1f} dB near {rng:g} m")
    return PeakMeasurement(float(p), float(p - fl), index, location)


def measure_snr(obj, target, window: int = 2, floor_db: float | None = None) -> float:
    """Peak-to-floor ratio [dB] at the truth location of a spectrum or r-D map."""
    return measure_peak(obj, target, window, floor_db).snr_db


def _floor_2d(p_db: np.ndarray, peaks_idx, guard) -> float:
    keep = np.ones(p_db.shape, dtype=bool)
    gi, gj = guard
    for i, j in peaks_idx:
        keep[max(0, i - gi):i + gi + 1, max(0, j - gj):j + gj + 1] = False
    if not keep.any():
        raise BandEmpty("every map cell lies inside a peak guard")
    return float(np.median(p_db[keep]))


def range_doppler_map(frames: FrameCube, window: str = "hann", nfft_range: int | None = None,
                      threshold_db: float = 10.0, guard=(3, 3), max_peaks: int = 16,
                      exclude_dc_range: int = 0, range_band=None) -> RangeDopplerMap:
    """Fast-time FFT per chirp, then slow-time FFT per range bin (both windowed).

    The Doppler axis is fftshifted and converted to velocity by lambda/2, so
    it starts at -lambda/(4T) and spans lambda/(2T).  The 2-D floor is the
    median of the map outside the peak guards.  Range bins closer than
    ``exclude_dc_range`` to zero are skipped when listing peaks.  ``range_band``
    (m, inclusive) crops the map to the desired band before anything else.
    """
    frames.require_nonempty()
    m = frames.chirps
    if m < 2:
        raise TooFewChirps("range-Doppler map needs at least 2 chirps")
    if frames.sweep_period is None or frames.range_per_hz is None:
        raise ValueError("frame lacks sweep metadata for r-D axes")
    nfft_range = int(nfft_range or frames.samples)
    wf = _window(window, frames.samples)
    ws = _window(window, m)
    fast, freqs = _fast_fft(frames, wf, nfft_range)
    if range_band is not None:
        r = freqs * frames.range_per_hz
        sel = (r >= range_band[0]) & (r <= range_band[1])
        if not sel.any():
            raise BandEmpty(f"no range bins in {range_band}")
        fast, freqs = fast[:, sel], freqs[sel]
    slow = sfft.fftshift(sfft.fft(fast * ws[:, None], axis=0), axes=0)
    power = (slow.real ** 2 + slow.imag ** 2) / (np.sum(wf) * np.sum(ws)) ** 2
    p_db = _db(power.T)
    ranges = freqs * frames.range_per_hz
    fd = sfft.fftshift(sfft.fftfreq(m, frames.sweep_period))
    vel = fd * frames.wavelength / 2.0

    med = np.median(p_db)
    is_max = (p_db == maximum_filter(p_db, size=3, mode="nearest")) & (p_db > med + threshold_db)
    cand = np.argwhere(is_max)
    order = np.argsort(-p_db[is_max])
    cand = [tuple(int(v) for v in cand[o]) for o in order]
    floor = _floor_2d(p_db, cand, guard)
    listed = [c for c in cand if abs(ranges[c[0]]) >= exclude_dc_range * abs(ranges[1] - ranges[0])]
    peaks = tuple(Peak(float(ranges[i]), float(vel[j]), float(p_db[i, j]), float(p_db[i, j] - floor))
                  for i, j in listed[:max_peaks] if p_db[i, j] > floor + threshold_db)
    return RangeDopplerMap(p_db, ranges, vel, floor, peaks, window, nfft_range)


def band_floor_2d(rd: RangeDopplerMap, range_band=None, guard=(3, 3)) -> float:
    """2-D floor restricted to a range band (m, inclusive)."""
    sel = np.ones(rd.range_axis.size, dtype=bool)
    if range_band is not None:
        sel = (rd.range_axis >= range_band[0]) & (rd.range_axis <= range_band[1])
    sub = rd.power_db[sel]
    if sub.size == 0:
        raise BandEmpty(f"no range bins in {range_band}")
    idx = np.flatnonzero(sel)
    pk = [(int(np.searchsorted(idx, np.argmin(np.abs(rd.range_axis - p.range_m)))),
           int(np.argmin(np.abs(rd.velocity_axis - p.velocity)))) for p in rd.peaks]
    return _floor_2d(sub, pk, guard)


# ---------------------------------------------------------------------------
# CSV export


def write_spectrum_csv(path, spectrum: PowerSpectrum) -> None:
    ranges = spectrum.ranges if spectrum.ranges is not None else np.full(spectrum.freqs.size, np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "range_m", "power_db"])
        for row in zip(spectrum.freqs, ranges, spectrum.power_db):
            w.writerow([f"{v:.10g}" for v in row])


def write_rdmap_csv(path, rd: RangeDopplerMap) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["range_m", "velocity_mps", "power_db"])
        for i, r in enumerate(rd.range_axis):
            for j, v in enumerate(rd.velocity_axis):
                w.writerow([f"{r:.10g}", f"{v:.10g}", f"{rd.power_db[i, j]:.10g}"])


def write_curve_csv(path, freqs, ranges, curve) -> None:
    ranges = ranges if ranges is not None else np.full(len(freqs), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "range_m", "improvement_db"])
        for row in zip(freqs, ranges, curve):
            w.writerow([f"{v:.10g}" for v in row])

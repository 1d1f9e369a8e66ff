"""
Frame container and the on-disk frame dump format.

Dump layout (all integers little-endian)::

    magic        8 bytes   b"FMCWFRM\\x00"
    version      uint16    currently 1
    header_len   uint32    byte length of the JSON header that follows
    header       UTF-8 JSON object:
                   kind           "real" | "complex" | "iq_pair"
                   chirps, samples
                   rate           Hz
                   scenario_hash  16 hex chars ("" if unknown)
                   path           processing tag, e.g. "spc-output"
                   sweep_period, bandwidth, center_frequency, sample_offset
    payload      float64 little-endian, row-major [chirp][sample];
                 complex and iq_pair payloads interleave two values per
                 sample ([re, im] or [I, Q]).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyFrame, FrameFormatError
from .model import SPEED_OF_LIGHT, RadarScenario

MAGIC = b"FMCWFRM\x00"
VERSION = 1
REAL, COMPLEX, IQ_PAIR = "real", "complex", "iq_pair"


@dataclass(frozen=True, eq=False)
class FrameCube:
    """Sampled beat signal, ``data[m, n]`` = chirp m, kept fast-time sample n.

    ``sample_offset`` is the number of samples discarded at the start of each
    chirp, so the absolute fast time of sample n is (n + sample_offset)/rate.
    The sweep fields are optional and only needed for range/velocity axes.
    """

    data: np.ndarray
    rate: float
    kind: str = REAL
    sweep_period: float | None = None
    bandwidth: float | None = None
    center_frequency: float | None = None
    sample_offset: int = 0
    scenario_hash: str = ""
    path: str = ""

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValueError("frame data must be 2-D [chirp, sample]")
        if self.kind == REAL and np.iscomplexobj(data):
            raise ValueError("real frame holds complex data")
        data = data.astype(np.complex128 if self.kind == COMPLEX else np.float64, copy=False)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def chirps(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]

    @property
    def is_complex(self) -> bool:
        return self.kind == COMPLEX

    @property
    def range_per_hz(self) -> float | None:
        if self.sweep_period is None or self.bandwidth is None:
            return None
        return SPEED_OF_LIGHT * self.sweep_period / (2.0 * self.bandwidth)

    @property
    def wavelength(self) -> float | None:
        if self.center_frequency is None:
            return None
        return SPEED_OF_LIGHT / self.center_frequency

    def with_data(self, data, kind: str | None = None, path: str | None = None) -> "FrameCube":
        return replace(self, data=data, kind=kind or self.kind, path=path or self.path)

    def fast_time(self) -> np.ndarray:
        """Absolute fast time of each kept sample within its chirp [s]."""
        return (np.arange(self.samples) + self.sample_offset) / self.rate

    def require_nonempty(self):
        if self.data.size == 0:
            raise EmptyFrame("frame has no samples")


def cube_for(scenario: RadarScenario, data, kind: str, path: str) -> FrameCube:
    sw = scenario.sweep
    return FrameCube(data=data, rate=scenario.rate, kind=kind, sweep_period=sw.sweep_period,
                     bandwidth=sw.bandwidth, center_frequency=sw.center_frequency,
                     sample_offset=sw.discarded, scenario_hash=scenario.digest(), path=path)


def _header(cube: FrameCube, kind: str) -> dict:
    return {
        "kind": kind,
        "chirps": cube.chirps,
        "samples": cube.samples,
        "rate": cube.rate,
        "scenario_hash": cube.scenario_hash,
        "path": cube.path,
        "sweep_period": cube.sweep_period,
        "bandwidth": cube.bandwidth,
        "center_frequency": cube.center_frequency,
        "sample_offset": cube.sample_offset,
    }


def save_frames(path, cube: FrameCube, q: FrameCube | None = None) -> None:
    """Write one cube, or an I/Q pair when ``q`` is given."""
    if q is not None:
        if q.data.shape != cube.data.shape:
            raise ValueError("I and Q cubes differ in shape")
        kind = IQ_PAIR
        payload = np.stack([cube.data, q.data], axis=-1)
    elif cube.kind == COMPLEX:
        kind = COMPLEX
        payload = np.stack([cube.data.real, cube.data.imag], axis=-1)
    else:
        kind = REAL
        payload = cube.data
    header = json.dumps(_header(cube, kind), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def load_frames(path):
    """Read a dump; returns a FrameCube, or an (I, Q) tuple for I/Q pairs."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise FrameFormatError(f"{path}: bad magic")
    version, hlen = struct.unpack("<HI", raw[8:14])
    if version != VERSION:
        raise FrameFormatError(f"{path}: unsupported version {version}")
    hdr = json.loads(raw[14:14 + hlen].decode())
    values = np.frombuffer(raw[14 + hlen:], dtype="<f8")
    m, n, kind = hdr["chirps"], hdr["samples"], hdr["kind"]
    width = 1 if kind == REAL else 2
    if values.size != m * n * width:
        raise FrameFormatError(f"{path}: payload size {values.size} != {m}x{n}x{width}")
    meta = {k: hdr[k] for k in ("rate", "sweep_period", "bandwidth", "center_frequency",
                                "sample_offset", "scenario_hash", "path")}
    if kind == REAL:
        return FrameCube(data=values.reshape(m, n), kind=REAL, **meta)
    pairs = values.reshape(m, n, 2)
    if kind == COMPLEX:
        return FrameCube(data=pairs[..., 0] + 1j * pairs[..., 1], kind=COMPLEX, **meta)
    if kind == IQ_PAIR:
        return (FrameCube(data=pairs[..., 0].copy(), kind=REAL, **meta),
                FrameCube(data=pairs[..., 1].copy(), kind=REAL, **meta))
    raise FrameFormatError(f"{path}: unknown kind {kind!r}")

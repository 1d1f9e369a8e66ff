"""
Beat-signal synthesis at the deramped stage.

All randomness for a scenario is drawn up front from independent streams of
one seed sequence (per-chirp frequency draws, one phase-noise realization per
term, thermal noise per channel), then the chirps are filled with vectorized
arithmetic.  Every path (real SPC, imbalanced I/Q, balanced complex, homodyne)
is built from the same table of per-term phase arguments, so the I/Q pair and
its balanced twin share every draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import COMPLEX, REAL, FrameCube, cube_for
from .model import ASPC, HETERODYNE, HOMODYNE, SPC, RadarScenario, validate_scenario
from .phase_noise import synth_phase_noise

_DEFECT_STREAM = 0
_LEAKAGE_PN_STREAM = 1
_THERMAL_I_STREAM = 2
_THERMAL_Q_STREAM = 3
_TARGET_PN_STREAM0 = 16


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


@dataclass(frozen=True)
class DefectDraws:
    """Per-chirp random frequency components (the truth ledger)."""

    f_random_ft: np.ndarray
    f_random_st: np.ndarray


def draw_defects(scenario: RadarScenario) -> DefectDraws:
    rng = _stream(scenario.seed, _DEFECT_STREAM)
    m = scenario.sweep.chirps
    ft = scenario.defects.f_random_ft.draw(rng, m)
    st = scenario.defects.f_random_st.draw(rng, m)
    return DefectDraws(ft, st)


def carrier_terms(scenario: RadarScenario) -> float:
    """f_IF carrier + f_offset; both vanish in a homodyne receiver."""
    if scenario.architecture == HOMODYNE:
        return 0.0
    return scenario.sampling.if_carrier + scenario.defects.f_offset


def leakage_frequency(scenario: RadarScenario, draws: DefectDraws | None = None) -> np.ndarray:
    """True per-chirp leakage beat frequency at the sampler input [Hz]."""
    draws = draws or draw_defects(scenario)
    return carrier_terms(scenario) + draws.f_random_ft + scenario.leakage.beat_frequency


def _cycles_mod1(x):
    return np.mod(x, 1.0)


@dataclass(frozen=True)
class _Terms:
    amplitudes: np.ndarray      # (terms,)
    phases: np.ndarray          # (terms, chirps, samples) full chirp, radians


def _phase_table(scenario: RadarScenario) -> _Terms:
    sw = scenario.sweep
    rate = scenario.rate
    n_full, m_count = sw.samples_per_chirp, sw.chirps
    t = np.arange(n_full) / rate
    m = np.arange(m_count)
    draws = draw_defects(scenario)
    f_leak = leakage_frequency(scenario, draws)
    carrier = carrier_terms(scenario)

    # Fast-time cycles are reduced mod 1 before scaling by 2*pi to keep the
    # large carrier phases exact to ~1e-12 rad.
    def fast(freq_per_chirp):
        return 2 * np.pi * _cycles_mod1(freq_per_chirp[:, None] * t[None, :])

    slow_cycles = (carrier + draws.f_random_st) * sw.sweep_period * m
    slow = 2 * np.pi * _cycles_mod1(slow_cycles)

    seed = scenario.seed
    lk = scenario.leakage
    phi_leak = synth_phase_noise(lk.phase_noise, n_full, rate,
                                 np.random.SeedSequence(seed, spawn_key=(_LEAKAGE_PN_STREAM,)),
                                 chirps=m_count).samples
    amps = [lk.amplitude]
    phases = [fast(f_leak) + slow[:, None] + lk.theta + phi_leak]
    for r, tg in enumerate(scenario.targets):
        f_bt = scenario.beat_frequency(tg)
        f_d = scenario.doppler(tg)
        if tg.phase_noise.correlated_with_leakage:
            phi = phi_leak
        else:
            phi = synth_phase_noise(tg.phase_noise, n_full, rate,
                                    np.random.SeedSequence(seed, spawn_key=(_TARGET_PN_STREAM0 + r,)),
                                    chirps=m_count).samples
        slow_t = slow + 2 * np.pi * _cycles_mod1(f_d * sw.sweep_period * m)
        amps.append(tg.amplitude)
        phases.append(fast(f_leak + f_bt) + slow_t[:, None] + tg.theta + phi)
    return _Terms(np.asarray(amps), np.stack(phases))


def _thermal(scenario: RadarScenario, stream: int) -> np.ndarray | float:
    if scenario.thermal_noise_floor is None:
        return 0.0
    sw = scenario.sweep
    sigma = np.sqrt(10.0 ** (scenario.thermal_noise_floor / 10.0) * scenario.rate / 2.0)
    rng = _stream(scenario.seed, stream)
    return sigma * rng.standard_normal((sw.chirps, sw.samples_per_chirp))


def _keep(scenario: RadarScenario, x: np.ndarray) -> np.ndarray:
    return x[:, scenario.sweep.discarded:]


def _check(scenario: RadarScenario, pipeline: str, architecture: str):
    report = validate_scenario(scenario, pipeline)
    report.raise_if_invalid()
    if scenario.architecture != architecture:
        from .errors import InvalidScenario
        from .model import Violation
        raise InvalidScenario([Violation("architecture",
                                         f"expected {architecture}, got {scenario.architecture}")])


def synth_spc_frames(scenario: RadarScenario) -> FrameCube:
    """Real oversampled IF beat signal for the SPC chain."""
    _check(scenario, SPC, HETERODYNE)
    terms = _phase_table(scenario)
    x = np.einsum("t,tmn->mn", terms.amplitudes, np.cos(terms.phases))
    x = x + _thermal(scenario, _THERMAL_I_STREAM)
    return cube_for(scenario, _keep(scenario, x), REAL, "spc-input")


def _iq(scenario: RadarScenario):
    terms = _phase_table(scenario)
    imb = scenario.imbalance
    i = np.einsum("t,tmn->mn", terms.amplitudes, np.cos(terms.phases))
    q = imb.amplitude * np.einsum("t,tmn->mn", terms.amplitudes, np.sin(terms.phases + imb.theta))
    i = i + _thermal(scenario, _THERMAL_I_STREAM)
    q = q + _thermal(scenario, _THERMAL_Q_STREAM)
    return _keep(scenario, i), _keep(scenario, q)


def synth_aspc_iq_frames(scenario: RadarScenario) -> tuple[FrameCube, FrameCube]:
    """Heterodyne I/Q pair with quadrature imbalance on Q."""
    _check(scenario, ASPC, HETERODYNE)
    i, q = _iq(scenario)
    return cube_for(scenario, i, REAL, "aspc-i"), cube_for(scenario, q, REAL, "aspc-q")


def synth_homodyne_iq_frames(scenario: RadarScenario) -> tuple[FrameCube, FrameCube]:
    """Baseband I/Q pair of a homodyne receiver (no IF carrier, no f_offset)."""
    _check(scenario, ASPC, HOMODYNE)
    i, q = _iq(scenario)
    return cube_for(scenario, i, REAL, "bb-i"), cube_for(scenario, q, REAL, "bb-q")


def synth_iq_frames(scenario: RadarScenario) -> tuple[FrameCube, FrameCube]:
    if scenario.architecture == HOMODYNE:
        return synth_homodyne_iq_frames(scenario)
    return synth_aspc_iq_frames(scenario)


def synth_balanced_frames(scenario: RadarScenario) -> FrameCube:
    """Ideal complex beat signal with perfect quadrature; shares all draws with the I/Q pair."""
    validate_scenario(scenario, ASPC).raise_if_invalid()
    terms = _phase_table(scenario)
    x = np.einsum("t,tmn->mn", terms.amplitudes.astype(complex), np.exp(1j * terms.phases))
    x = x + _thermal(scenario, _THERMAL_I_STREAM) + 1j * _thermal(scenario, _THERMAL_Q_STREAM)
    return cube_for(scenario, _keep(scenario, x), COMPLEX, "balanced")

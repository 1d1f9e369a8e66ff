"""
Scenario model for the FMCW beat-signal simulator.

Every parameter the synthesizer and the processing chains need lives here as
an immutable dataclass.  Scenarios serialize to a YAML tree that mirrors the
field names one-to-one, so a file written by :func:`dump_scenario` reads back
to an identical object.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidScenario

# The preset resolutions (1.074 m, 1.221 m, 0.0462 m/s) come out to the printed
# digits with c = 3e8; 299792458 misses the table3 value by 1.1 mm.
SPEED_OF_LIGHT = 3.0e8

HETERODYNE = "heterodyne"
HOMODYNE = "homodyne"
SPC = "spc"
ASPC = "aspc"

PRESET_NAMES = ("table1", "table1_aspc", "table2", "table3")


@dataclass(frozen=True)
class SweepParams:
    f_start: float
    bandwidth: float
    sweep_period: float
    samples_per_chirp: int
    samples_kept: int
    chirps: int

    @property
    def center_frequency(self) -> float:
        return self.f_start + 0.5 * self.bandwidth

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.center_frequency

    @property
    def discarded(self) -> int:
        return self.samples_per_chirp - self.samples_kept

    @property
    def apparent_range_resolution(self) -> float:
        """Range resolution after discarding the early part of each chirp [m]."""
        kept_fraction = self.samples_kept / self.samples_per_chirp
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth * kept_fraction)

    @property
    def range_per_hz(self) -> float:
        """Beat frequency to range slope, c*T/(2*BW) [m/Hz]."""
        return SPEED_OF_LIGHT * self.sweep_period / (2.0 * self.bandwidth)


@dataclass(frozen=True)
class SamplingPlan:
    """ADC plan.

    ``oversampling`` is kept as a Fraction so the quarter-point placement
    Q*Fs*(4N+1)/4 can be evaluated without rounding.  ``effective_rate`` is
    Q*Fs for both techniques; A-SPC plans normally use Q = 1.
    """

    min_rate: float
    oversampling: Fraction = Fraction(1)
    undersampling: int = 0
    if_carrier: float = 0.0
    technique: str = ASPC
    desired_bandwidth: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "oversampling", Fraction(self.oversampling))

    @property
    def effective_rate(self) -> float:
        return float(self.oversampling * Fraction(self.min_rate))

    @property
    def sample_interval(self) -> float:
        return 1.0 / self.effective_rate

    @property
    def quarter_point(self) -> float:
        q = self.oversampling * Fraction(self.min_rate)
        return float(q * (4 * self.undersampling + 1) / 4)

    @property
    def band(self) -> float:
        """Desired digital bandwidth, defaulting to half the minimum rate."""
        if self.desired_bandwidth is None:
            return 0.5 * self.min_rate
        return self.desired_bandwidth

    @classmethod
    def strategic(cls, min_rate, oversampling, undersampling=0, desired_bandwidth=None):
        """SPC plan with the IF carrier on the quarter point."""
        plan = cls(min_rate, Fraction(oversampling), int(undersampling), 0.0, SPC,
                   desired_bandwidth)
        return replace(plan, if_carrier=plan.quarter_point)


@dataclass(frozen=True)
class DistributionSpec:
    """Zero-mean per-chirp draw; ``width`` is the half-width (uniform) or sigma (gaussian)."""

    kind: str = "none"
    width: float = 0.0

    def draw(self, rng, count: int):
        if self.kind == "none" or self.width == 0.0:
            return np.zeros(count)
        if self.kind == "uniform":
            return rng.uniform(-self.width, self.width, count)
        if self.kind == "gaussian":
            return rng.normal(0.0, self.width, count)
        raise ValueError(f"unknown distribution kind {self.kind!r}")


@dataclass(frozen=True)
class OscillatorDefects:
    f_offset: float = 0.0
    f_random_ft: DistributionSpec = field(default_factory=DistributionSpec)
    f_random_st: DistributionSpec = field(default_factory=DistributionSpec)
    rng_seed: int = 0


@dataclass(frozen=True)
class PhaseNoiseSpec:
    """Piecewise log-log one-sided phase PSD.

    ``psd_breakpoints`` holds (offset Hz, level dB rad^2/Hz) pairs.  The PSD is
    held flat below the first breakpoint and continues the last segment's
    slope beyond the final one.  With ``rce_enabled`` the PSD is multiplied by
    4*sin^2(pi*f*tau), the self-mixing factor of a short delay tau.
    """

    psd_breakpoints: tuple[tuple[float, float], ...] = ()
    rce_enabled: bool = False
    rce_delay_tau: float = 0.0
    correlated_with_leakage: bool = False

    def __post_init__(self):
        pts = tuple((float(f), float(lv)) for f, lv in self.psd_breakpoints)
        object.__setattr__(self, "psd_breakpoints", pts)

    @property
    def enabled(self) -> bool:
        return len(self.psd_breakpoints) > 0

    def shifted(self, delta_db: float) -> "PhaseNoiseSpec":
        pts = tuple((f, lv + delta_db) for f, lv in self.psd_breakpoints)
        return replace(self, psd_breakpoints=pts)


@dataclass(frozen=True)
class LeakageSpec:
    amplitude: float = 1.0
    beat_frequency: float = 0.0
    theta: float = 0.0
    phase_noise: PhaseNoiseSpec = field(default_factory=PhaseNoiseSpec)


@dataclass(frozen=True)
class TargetSpec:
    """One point target.  Positive ``radial_velocity`` means approaching (+f_d)."""

    amplitude: float
    range_m: float
    radial_velocity: float = 0.0
    theta: float = 0.0
    phase_noise: PhaseNoiseSpec = field(default_factory=PhaseNoiseSpec)


@dataclass(frozen=True)
class ImbalanceSpec:
    amplitude: float = 1.0
    theta: float = 0.0


@dataclass(frozen=True)
class RadarScenario:
    architecture: str
    sweep: SweepParams
    sampling: SamplingPlan
    defects: OscillatorDefects = field(default_factory=OscillatorDefects)
    leakage: LeakageSpec = field(default_factory=LeakageSpec)
    targets: tuple[TargetSpec, ...] = ()
    imbalance: ImbalanceSpec = field(default_factory=ImbalanceSpec)
    # One-sided white noise density per receiver channel, dB(V^2/Hz); None disables it.
    thermal_noise_floor: float | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))

    @property
    def seed(self) -> int:
        return self.defects.rng_seed

    @property
    def rate(self) -> float:
        return self.sampling.effective_rate

    def beat_frequency(self, target: TargetSpec) -> float:
        sw = self.sweep
        return 2.0 * target.range_m * sw.bandwidth / (SPEED_OF_LIGHT * sw.sweep_period)

    def doppler(self, target: TargetSpec) -> float:
        return 2.0 * target.radial_velocity / self.sweep.wavelength

    def with_seed(self, seed: int) -> "RadarScenario":
        return replace(self, defects=replace(self.defects, rng_seed=int(seed)))

    def digest(self) -> str:
        return scenario_hash(self)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    """``violations`` is empty iff the scenario can be synthesized and processed.

    ``warnings`` collect conditions that are legal to simulate but produce
    ambiguous results, such as a target beyond the unambiguous range.
    """

    violations: tuple[Violation, ...]
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def raise_if_invalid(self):
        if self.violations:
            raise InvalidScenario(self.violations)


def _check_phase_noise(tag, spec, rate, errors):
    pts = spec.psd_breakpoints
    offsets = [f for f, _ in pts]
    if any(b <= a for a, b in zip(offsets, offsets[1:])):
        errors.append(Violation("phase_noise_breakpoints", f"{tag}: offsets must increase strictly"))
    if any(not math.isfinite(lv) for _, lv in pts) or any(f <= 0 for f in offsets):
        errors.append(Violation("phase_noise_breakpoints", f"{tag}: offsets > 0 and finite levels required"))
    if offsets and rate <= 2.0 * offsets[-1]:
        errors.append(Violation("phase_noise_band",
                                f"{tag}: rate {rate:g} Hz must exceed twice the last breakpoint"))
    if spec.rce_enabled and spec.rce_delay_tau < 0:
        errors.append(Violation("phase_noise_rce", f"{tag}: negative RCE delay"))


def validate_scenario(scenario: RadarScenario, pipeline: str | None = None) -> ValidationReport:
    """Check a scenario against the model invariants.

    ``pipeline`` selects the processing chain the scenario is meant for
    (``"spc"`` or ``"aspc"``); it defaults to ``scenario.sampling.technique``.
    The quarter-point rule is only enforced for SPC.
    """
    errors: list[Violation] = []
    warnings: list[Violation] = []
    sw, plan, dfx = scenario.sweep, scenario.sampling, scenario.defects
    pipeline = pipeline or plan.technique

    if scenario.architecture not in (HETERODYNE, HOMODYNE):
        errors.append(Violation("architecture", f"unknown architecture {scenario.architecture!r}"))
    if pipeline not in (SPC, ASPC):
        errors.append(Violation("technique", f"unknown technique {pipeline!r}"))

    if sw.samples_per_chirp <= 0 or sw.samples_kept <= 0:
        errors.append(Violation("sweep_samples", "sample counts must be positive"))
    elif sw.samples_kept > sw.samples_per_chirp:
        errors.append(Violation("sweep_samples", "samples_kept exceeds samples_per_chirp"))
    if sw.chirps <= 0:
        errors.append(Violation("sweep_chirps", "chirps_per_frame must be positive"))
    if sw.bandwidth <= 0 or sw.sweep_period <= 0 or sw.f_start <= 0:
        errors.append(Violation("sweep_values", "f_start, bandwidth and sweep period must be positive"))

    if plan.min_rate <= 0 or plan.oversampling <= 0:
        errors.append(Violation("sampling_rate", "F_s and Q must be positive"))
    if plan.undersampling < 0 or int(plan.undersampling) != plan.undersampling:
        errors.append(Violation("sampling_undersampling", "N must be a non-negative integer"))
    if not errors:
        rate = plan.effective_rate
        if abs(rate * sw.sweep_period - sw.samples_per_chirp) > 1.0:
            errors.append(Violation("sweep_samples",
                                    f"samples_per_chirp {sw.samples_per_chirp} != rate*T "
                                    f"{rate * sw.sweep_period:.1f}"))
        if pipeline == SPC and abs(plan.if_carrier - plan.quarter_point) > 1e-9 * rate:
            errors.append(Violation("strategic_frequency_planning",
                                    f"IF carrier {plan.if_carrier:g} Hz is not Q*Fs*(4N+1)/4 "
                                    f"= {plan.quarter_point:g} Hz"))
        if plan.band <= 0 or plan.band > 0.5 * rate:
            errors.append(Violation("sampling_band", "desired bandwidth outside (0, rate/2]"))
    else:
        rate = float("nan")

    if scenario.architecture == HOMODYNE:
        if plan.if_carrier != 0.0:
            errors.append(Violation("homodyne_if_carrier", "homodyne forbids an IF carrier"))
        if dfx.f_offset != 0.0:
            errors.append(Violation("homodyne_f_offset", "homodyne forbids f_offset"))
        if pipeline == SPC:
            errors.append(Violation("homodyne_spc", "SPC needs an IF stage; homodyne is A-SPC only"))

    for tag, dist in (("f_random_ft", dfx.f_random_ft), ("f_random_st", dfx.f_random_st)):
        if dist.kind not in ("none", "uniform", "gaussian") or dist.width < 0:
            errors.append(Violation("defect_distribution", f"{tag}: bad distribution {dist}"))

    lk = scenario.leakage
    if not lk.amplitude > 0:
        errors.append(Violation("leakage_amplitude", "leakage amplitude must be positive"))
    if math.isfinite(rate) and not (0.0 <= lk.beat_frequency < 0.5 * rate):
        errors.append(Violation("leakage_beat", "f_beat_leakage must lie in [0, rate/2)"))
    if math.isfinite(rate):
        _check_phase_noise("leakage", lk.phase_noise, rate, errors)

    imb = scenario.imbalance
    if not imb.amplitude > 0:
        errors.append(Violation("imbalance_amplitude", "A_E must be positive"))

    if scenario.thermal_noise_floor is not None and not math.isfinite(scenario.thermal_noise_floor):
        errors.append(Violation("thermal_noise", "thermal noise floor must be finite or null"))

    if not errors:
        axes = derive_axes(scenario, pipeline=pipeline, _validated=True)
        for i, tg in enumerate(scenario.targets):
            if tg.amplitude < 0:
                errors.append(Violation("target_amplitude", f"target {i}: negative amplitude"))
            _check_phase_noise(f"target {i}", tg.phase_noise, rate, errors)
            if not (0.0 <= tg.range_m < axes.max_unambiguous_range):
                warnings.append(Violation("target_range",
                                          f"target {i}: {tg.range_m:g} m outside MUR "
                                          f"{axes.max_unambiguous_range:.1f} m"))
            if abs(tg.radial_velocity) >= axes.max_unambiguous_velocity:
                warnings.append(Violation("target_velocity",
                                          f"target {i}: |v| >= {axes.max_unambiguous_velocity:.3f} m/s"))
    return ValidationReport(tuple(errors), tuple(warnings))


# ---------------------------------------------------------------------------
# axes


@dataclass(frozen=True)
class AxisSet:
    """Bin spacings and unambiguous extents of a scenario.

    ``range_bin_spacing`` is c*rate/(2*BW*nfft_range)*T, i.e. the FFT bin width
    rate/nfft_range mapped through the beat-to-range slope.  With
    ``nfft_range = samples_kept`` it equals the apparent range resolution.
    """

    range_bin_spacing: float
    apparent_range_resolution: float
    velocity_resolution: float
    max_unambiguous_range: float
    max_unambiguous_velocity: float
    max_detectable_range: float
    range_per_hz: float
    nfft_range: int


def derive_axes(scenario: RadarScenario, nfft_range: int | None = None,
                pipeline: str | None = None, _validated: bool = False) -> AxisSet:
    if not _validated:
        validate_scenario(scenario, pipeline).raise_if_invalid()
    sw, plan = scenario.sweep, scenario.sampling
    pipeline = pipeline or plan.technique
    rate = plan.effective_rate
    nfft_range = int(nfft_range or sw.samples_kept)
    per_hz = sw.range_per_hz
    # Ideal quarter-point geometry for SPC; half the rate for complex processing.
    mur_hz = 0.25 * rate if pipeline == SPC else 0.5 * rate
    return AxisSet(
        range_bin_spacing=per_hz * rate / nfft_range,
        apparent_range_resolution=sw.apparent_range_resolution,
        velocity_resolution=sw.wavelength / (2.0 * sw.chirps * sw.sweep_period),
        max_unambiguous_range=per_hz * mur_hz,
        max_unambiguous_velocity=sw.wavelength / (4.0 * sw.sweep_period),
        max_detectable_range=per_hz * plan.band,
        range_per_hz=per_hz,
        nfft_range=nfft_range,
    )


# ---------------------------------------------------------------------------
# serialization


def _fraction_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def scenario_to_dict(scenario: RadarScenario) -> dict:
    d = asdict(scenario)
    d["sampling"]["oversampling"] = _fraction_text(scenario.sampling.oversampling)
    d["targets"] = list(d["targets"])

    def fix_pn(pn):
        pn["psd_breakpoints"] = [list(p) for p in pn["psd_breakpoints"]]

    fix_pn(d["leakage"]["phase_noise"])
    for t in d["targets"]:
        fix_pn(t["phase_noise"])
    return d


def _pn_from(d) -> PhaseNoiseSpec:
    d = dict(d or {})
    d["psd_breakpoints"] = tuple(tuple(p) for p in d.get("psd_breakpoints", ()))
    return PhaseNoiseSpec(**d)


def scenario_from_dict(d: dict) -> RadarScenario:
    d = dict(d)
    sampling = dict(d["sampling"])
    sampling["oversampling"] = Fraction(str(sampling.get("oversampling", 1)))
    defects = dict(d.get("defects") or {})
    for key in ("f_random_ft", "f_random_st"):
        defects[key] = DistributionSpec(**(defects.get(key) or {}))
    leakage = dict(d.get("leakage") or {})
    leakage["phase_noise"] = _pn_from(leakage.get("phase_noise"))
    targets = []
    for t in d.get("targets") or ():
        t = dict(t)
        t["phase_noise"] = _pn_from(t.get("phase_noise"))
        targets.append(TargetSpec(**t))
    return RadarScenario(
        architecture=d["architecture"],
        sweep=SweepParams(**d["sweep"]),
        sampling=SamplingPlan(**sampling),
        defects=OscillatorDefects(**defects),
        leakage=LeakageSpec(**leakage),
        targets=tuple(targets),
        imbalance=ImbalanceSpec(**(d.get("imbalance") or {})),
        thermal_noise_floor=d.get("thermal_noise_floor"),
        name=d.get("name", ""),
    )


def dumps_scenario(scenario: RadarScenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False)


def loads_scenario(text: str) -> RadarScenario:
    return scenario_from_dict(yaml.safe_load(text))


def dump_scenario(scenario: RadarScenario, path) -> None:
    Path(path).write_text(dumps_scenario(scenario))


def load_scenario(source) -> RadarScenario:
    """Load a scenario from a YAML path or a shipped preset name."""
    name = str(source)
    if name in PRESET_NAMES:
        return load_preset(name)
    return loads_scenario(Path(source).read_text())


def load_preset(name: str) -> RadarScenario:
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    text = resources.files("spcradar").joinpath("presets", f"{name}.yaml").read_text()
    return loads_scenario(text)


def scenario_hash(scenario: RadarScenario) -> str:
    blob = json.dumps(scenario_to_dict(scenario), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


"""Small hand-sized scenarios shared by the unit tests.

The base geometry keeps every tone on an integer DFT bin: 1024 samples at
1.024 MHz give 1 kHz bins, and with BW = 150 MHz, T = 1 ms one metre of range
is exactly 1 kHz of beat frequency.
"""

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from spcradar.model import (ASPC, HETERODYNE, HOMODYNE, SPC, LeakageSpec, RadarScenario,
                            SamplingPlan, SweepParams, TargetSpec)

RATE = 1.024e6
N = 1024


def small_sweep(chirps=8):
    return SweepParams(f_start=14.35e9, bandwidth=150e6, sweep_period=1e-3,
                       samples_per_chirp=N, samples_kept=N, chirps=chirps)


def spc_scenario(chirps=8, leak_hz=6e3, targets=(), **kw) -> RadarScenario:
    plan = SamplingPlan.strategic(RATE / 4, 4, 0)
    return RadarScenario(HETERODYNE, small_sweep(chirps), plan,
                         leakage=LeakageSpec(1.0, leak_hz, 0.4), targets=tuple(targets), **kw)


def aspc_scenario(chirps=8, leak_hz=6e3, targets=(), if_carrier=100e3, **kw) -> RadarScenario:
    plan = SamplingPlan(RATE, Fraction(1), 0, if_carrier, ASPC)
    return RadarScenario(HETERODYNE, small_sweep(chirps), plan,
                         leakage=LeakageSpec(1.0, leak_hz, 0.4), targets=tuple(targets), **kw)


def homodyne_scenario(chirps=8, leak_hz=6e3, targets=(), **kw) -> RadarScenario:
    s = aspc_scenario(chirps, leak_hz, targets, if_carrier=0.0, **kw)
    return replace(s, architecture=HOMODYNE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def target(range_m, velocity=0.0, amplitude=0.1, theta=0.0):
    return TargetSpec(amplitude, range_m, velocity, theta)


__all__ = ["RATE", "N", "spc_scenario", "aspc_scenario", "homodyne_scenario", "target",
           "small_sweep", "SPC", "ASPC"]


# Acceptance lines collected by test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

"""FMCW leakage-mitigation simulator: SPC and A-SPC pipelines with IQ calibration."""

__version__ = "0.1.0"

from .aspc import aspc_mur, estimate_leakage_aspc, make_nco_aspc, process_aspc, run_aspc
from .frames import FrameCube, load_frames, save_frames
from .iqcorr import (EllipseFit, ImbalanceEstimate, correct_iq, estimate_imbalance,
                     fit_ellipse_taubin, irr, measured_irr, refine_ellipse_lm)
from .model import (AxisSet, ImbalanceSpec, LeakageSpec, OscillatorDefects, PhaseNoiseSpec,
                    RadarScenario, SamplingPlan, SweepParams, TargetSpec, derive_axes,
                    load_preset, load_scenario, validate_scenario)
from .phase_noise import synth_phase_noise
from .spc import LeakageEstimate, estimate_leakage_spc, make_nco_spc, run_spc, spc_mur
from .spectra import (PowerSpectrum, RangeDopplerMap, improvement_curve, measure_snr, noise_floor,
                      power_spectrum, range_doppler_map)
from .synth import (synth_aspc_iq_frames, synth_balanced_frames, synth_homodyne_iq_frames,
                    synth_spc_frames)

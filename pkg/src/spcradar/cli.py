"""Command-line entry point: ``spcradar <subcommand> ...``.

Exit status is 0 on success (and, for ``experiment``, only if every claim
passes), 1 when a claim or validation fails, 2 on usage or processing errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .aspc import process_aspc
from .errors import SpcRadarError
from .experiments import DESK, FULL, ExperimentConfig, run_experiment
from .frames import FrameCube, load_frames, save_frames
from .iqcorr import combine_iq, correct_iq, estimate_imbalance, irr, measured_irr
from .model import ASPC, HOMODYNE, SPC, derive_axes, dump_scenario, load_scenario, validate_scenario
from .spc import process_spc
from .spectra import (power_spectrum, range_doppler_map, write_curve_csv, write_rdmap_csv,
                      write_spectrum_csv)
from .synth import synth_iq_frames, synth_spc_frames

DEFAULT_NFFT = {SPC: 1 << 20, ASPC: 1 << 18, HOMODYNE: 1 << 19}


def _scenario(args):
    s = load_scenario(args.scenario)
    if args.seed is not None:
        s = s.with_seed(args.seed)
    return s


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _nfft(args, s) -> int:
    if args.nfft:
        return args.nfft
    if s.sampling.technique == SPC:
        return DEFAULT_NFFT[SPC]
    return DEFAULT_NFFT[HOMODYNE if s.architecture == HOMODYNE else ASPC]


def _write_estimate(path: Path, est) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chirp", "k_index", "f_hat_hz", "theta_hat_rad", "peak_to_median_db"])
        for m, row in enumerate(zip(est.k_index, est.f_hat, est.theta_hat, est.peak_to_median_db)):
            w.writerow([m, int(row[0])] + [f"{v:.12g}" for v in row[1:]])


def _imbalance_text(est, before: float, after: float) -> str:
    return (f"A_E_hat = {est.A_E_hat:.10g}\n"
            f"theta_E_hat_rad = {est.theta_E_hat:.10g}\n"
            f"irr_analytic_of_estimate_db = {irr(est.A_E_hat, est.theta_E_hat):.4f}\n"
            f"irr_measured_before_db = {before:.4f}\n"
            f"irr_measured_after_db = {after:.4f}\n"
            f"fit_geometric_rms = {est.source_fit.geometric_rms:.6g}\n"
            f"fit_iterations = {est.source_fit.iterations}\n"
            f"fit_converged = {est.source_fit.converged}\n")


def _processed(args) -> FrameCube:
    """Frame for spectrum/rdmap: a dump if given, else the scenario's processed output."""
    if args.frames:
        obj = load_frames(args.frames)
        return combine_iq(*obj) if isinstance(obj, tuple) else obj
    s = _scenario(args)
    if s.sampling.technique == SPC:
        out = process_spc(synth_spc_frames(s), _nfft(args, s)).output
        return out.with_data(2.0 * out.data)
    i, q = synth_iq_frames(s)
    return process_aspc(i, q, _nfft(args, s), not args.no_iq_correction).output


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    s = _scenario(args)
    report = validate_scenario(s, args.pipeline)
    for v in report.violations:
        print(f"violation  {v}")
    for v in report.warnings:
        print(f"warning    {v}")
    if not report.ok:
        return 1
    ax = derive_axes(s, pipeline=args.pipeline)
    print(f"scenario {s.name or '-'} hash {s.digest()}: valid")
    for k, v in vars(ax).items():
        print(f"  {k} = {v:.6g}")
    return 0


def cmd_synth(args) -> int:
    s = _scenario(args)
    out = _out(args)
    dump_scenario(s, out / "scenario.yaml")
    if s.sampling.technique == SPC:
        save_frames(out / "frames.bin", synth_spc_frames(s))
        print(out / "frames.bin")
    else:
        i, q = synth_iq_frames(s)
        save_frames(out / "iq.bin", i, q)
        print(out / "iq.bin")
    return 0


def cmd_run_spc(args) -> int:
    s = _scenario(args)
    frames = load_frames(args.frames) if args.frames else synth_spc_frames(s)
    res = process_spc(frames, _nfft(args, s))
    out = _out(args)
    save_frames(out / "spc_output.bin", res.output)
    _write_estimate(out / "leakage_estimate.csv", res.estimate)
    print(out / "spc_output.bin")
    return 0


def cmd_run_aspc(args) -> int:
    s = _scenario(args)
    if args.frames:
        obj = load_frames(args.frames)
        i, q = obj if isinstance(obj, tuple) else (obj, None)
    else:
        i, q = synth_iq_frames(s)
    res = process_aspc(i, q, _nfft(args, s), not args.no_iq_correction)
    out = _out(args)
    save_frames(out / "aspc_output.bin", res.output)
    _write_estimate(out / "leakage_estimate.csv", res.estimate)
    if res.imbalance is not None:
        (out / "imbalance.txt").write_text(
            _imbalance_text(res.imbalance, measured_irr(combine_iq(i, q)), measured_irr(res.corrected)))
    print(out / "aspc_output.bin")
    return 0


def cmd_iq_fit(args) -> int:
    obj = load_frames(args.frames)
    if not isinstance(obj, tuple):
        raise SpcRadarError("iq-fit needs an I/Q pair dump")
    i, q = obj
    est = estimate_imbalance(i, q)
    text = _imbalance_text(est, measured_irr(combine_iq(i, q)), measured_irr(correct_iq(i, q, est)))
    out = _out(args)
    (out / "imbalance.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_spectrum(args) -> int:
    frames = _processed(args)
    ps = power_spectrum(frames, args.window, args.nfft_spectrum, args.n_avg)
    out = _out(args)
    write_spectrum_csv(out / "spectrum.csv", ps)
    print(f"floor_estimate_db = {ps.floor_estimate:.4f}")
    return 0


def cmd_rdmap(args) -> int:
    frames = _processed(args)
    band = None
    if frames.range_per_hz is not None and args.max_range:
        band = (0.0, args.max_range)
    rd = range_doppler_map(frames, args.window, range_band=band)
    out = _out(args)
    write_rdmap_csv(out / "rdmap.csv", rd)
    print(f"floor_db = {rd.floor_db:.4f}")
    for p in rd.peaks:
        print(f"peak range_m={p.range_m:.3f} velocity_mps={p.velocity:.4f} "
              f"power_db={p.power_db:.2f} snr_db={p.snr_db:.2f}")
    return 0


def cmd_experiment(args) -> int:
    scenario = _scenario(args) if args.scenario else None
    cfg = ExperimentConfig(scale=args.scale, seed=args.seed, use_iq_correction=not args.no_iq_correction,
                           scenario=scenario, chirps=args.chirps)
    report = run_experiment(args.name, cfg)
    print(report.to_text(), end="")
    if args.out:
        out = _out(args)
        (out / f"report_{args.name}.txt").write_text(report.to_text())
        (out / f"report_{args.name}.json").write_text(report.to_json())
        for k, ps in report.artifacts.get("spectra", {}).items():
            write_spectrum_csv(out / f"spectrum_{k}.csv", ps)
        for k, rd in report.artifacts.get("maps", {}).items():
            write_rdmap_csv(out / f"rdmap_{k}.csv", rd)
        if "curve_spc" in report.artifacts:
            a = report.artifacts
            write_curve_csv(out / "improvement_spc.csv", a["curve_freqs"], a["curve_ranges"], a["curve_spc"])
            write_curve_csv(out / "improvement_aspc.csv", a["curve_freqs"], a["curve_ranges"], a["curve_aspc"])
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spcradar", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_required=True, out=True):
        sp.add_argument("--scenario", required=scenario_required,
                        help="scenario YAML path or preset name (table1, table1_aspc, table2, table3)")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario's rng seed")
        if out:
            sp.add_argument("--out", default="out", help="output directory")

    sp = sub.add_parser("validate", help="check a scenario and print derived axes")
    common(sp, out=False)
    sp.add_argument("--pipeline", choices=[SPC, ASPC], default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("synth", help="synthesize frames and write a dump")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    for name, func in (("run-spc", cmd_run_spc), ("run-aspc", cmd_run_aspc)):
        sp = sub.add_parser(name, help=f"{name[4:].upper()} pipeline on synthesized or dumped frames")
        common(sp)
        sp.add_argument("--frames", default=None, help="frame dump to process instead of synthesizing")
        sp.add_argument("--nfft", type=int, default=None, help="estimation FFT length")
        sp.add_argument("--no-iq-correction", action="store_true")
        sp.set_defaults(func=func)

    sp = sub.add_parser("iq-fit", help="fit the imbalance of an I/Q dump")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_iq_fit)

    for name, func in (("spectrum", cmd_spectrum), ("rdmap", cmd_rdmap)):
        sp = sub.add_parser(name, help=f"write a {name} CSV")
        common(sp, scenario_required=False)
        sp.add_argument("--frames", default=None)
        sp.add_argument("--nfft", type=int, default=None, help="estimation FFT length")
        sp.add_argument("--window", default="hann")
        sp.add_argument("--no-iq-correction", action="store_true")
        if name == "spectrum":
            sp.add_argument("--nfft-spectrum", type=int, default=None)
            sp.add_argument("--n-avg", type=int, default=None)
        else:
            sp.add_argument("--max-range", type=float, default=None, help="crop the map to [0, m]")
        sp.set_defaults(func=func)

    sp = sub.add_parser("experiment", help="run experiment a, b or c and report claims")
    sp.add_argument("name", choices=["a", "b", "c"])
    common(sp, scenario_required=False)
    sp.set_defaults(out=None)
    scale = sp.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", dest="scale", action="store_const", const=DESK)
    scale.add_argument("--full-scale", dest="scale", action="store_const", const=FULL)
    sp.set_defaults(scale=DESK)
    sp.add_argument("--chirps", type=int, default=None)
    sp.add_argument("--no-iq-correction", action="store_true")
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) in ("spectrum", "rdmap") and not (args.frames or args.scenario):
        print("error: give --frames or --scenario", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (SpcRadarError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

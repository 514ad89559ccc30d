"""Command-line front end.

    nvdecohere <command> --config run.toml [--out-dir DIR] [--seed N] [--svg] [--quiet]

Commands: echo, fid, cpmg, sweep-angle, sweep-field, validate-perturbation,
suppression.  Each writes ``<command>.csv`` (and ``<command>.svg`` with
``--svg``) into the output directory and prints a short summary.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .config import RunConfig, load_config
from .dynamics import SequenceSpec, simulate_sequence
from .errors import NVDecoherenceError, ParseError, ValidationError
from .hamiltonian import FieldVector, perturbation_error
from .noise import NoiseParams, renormalized_rms, ShiftModel
from .output import Series, emit_csv, emit_svg

COMMANDS = ("echo", "fid", "cpmg", "sweep-angle", "sweep-field", "validate-perturbation", "suppression")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4


@dataclass
class Artifacts:
    csv: Path
    svg: Path | None = None
    summary: list[str] = field(default_factory=list)


def _times(cfg: RunConfig, b_static, noise, spec):
    if cfg.sequence.times == "auto":
        return analysis.auto_times(cfg.zfs, b_static, noise, spec, cfg.consts, cfg.sequence.auto_points)
    return np.asarray(cfg.sequence.times, dtype=float)


def _decay(cmd, cfg, out, svg, workers):
    kind = "hahn" if cmd == "echo" else "fid"
    b = cfg.field.vector()
    noise = cfg.noise_at(b.magnitude)
    spec = SequenceSpec(kind, 1 if kind == "hahn" else 0, 1.0, cfg.sequence.branch)
    mc = cfg.monte_carlo
    curve = simulate_sequence(
        cfg.zfs, b, noise, spec, _times(cfg, b, noise, spec), mc.n_traj,
        cfg.sequence.model, mc.dt, mc.seed, cfg.consts, workers,
    )
    rows = list(zip(curve.times, curve.coherence, curve.std_err))
    art = Artifacts(emit_csv(cmd, rows, out / f"{cmd}.csv"))
    if kind == "hahn":
        fit = analysis.fit_exponential(curve)
        art.summary.append(f"T2 = {fit['t2']:.6g} +/- {fit.std_errs['t2']:.2g} us (A = {fit['amplitude']:.4g})")
    else:
        fit = analysis.fit_gaussian_fid(curve)
        b_ref = analysis.shift_std(cfg.zfs, b, noise, cfg.sequence.branch, cfg.consts)
        art.summary.append(
            f"b_rms from FID = {fit['b_rms']:.6g} +/- {fit.std_errs['b_rms']:.2g} MHz "
            f"(renormalized shift std {b_ref:.6g} MHz)"
        )
    art.summary.append(f"fit residual (RMS, weighted) = {fit.residual_norm:.3g}")
    if svg:
        art.svg = emit_svg(
            [Series(f"theta = {np.degrees(b.theta):.4g} deg", curve.times, curve.coherence, curve.std_err)],
            out / f"{cmd}.svg", title=f"{cmd} decay", xlabel="total time (us)", ylabel="coherence",
        )
    return art


def _cpmg(cfg, out, svg, workers):
    b = cfg.field.vector()
    noise = cfg.noise_at(b.magnitude)
    mc = cfg.monte_carlo
    times = None if cfg.sequence.times == "auto" else cfg.sequence.times
    table, _ = analysis.sweep_cpmg(
        cfg.zfs, b, noise, cfg.cpmg.n_list, cfg.cpmg.time_grid, times, cfg.sequence.branch,
        mc.n_traj, cfg.sequence.model, mc.dt, mc.seed, cfg.consts, workers,
    )
    rows = [(int(n), t, e) for n, t, e in zip(table.x, table.t2, table.std_err)]
    art = Artifacts(emit_csv("cpmg", rows, out / "cpmg.csv"))
    if len(rows) >= 3:
        fit = analysis.fit_power_law(table)
        art.summary.append(f"T2 ~ N^r: r = {fit['r']:.4f} +/- {fit.std_errs['r']:.2g}, prefactor {fit['prefactor']:.4g} us")
    if svg:
        art.svg = emit_svg(
            [Series("T2(N)", table.x, table.t2, table.std_err)], out / "cpmg.svg", axes="log",
            title="CPMG coherence time", xlabel="number of pi pulses", ylabel="T2 (us)",
        )
    return art


def _sweep_angle(cfg, out, svg, workers):
    mag = cfg.field.vector().magnitude
    noise = cfg.noise_at(mag)
    mc = cfg.monte_carlo
    times = None if cfg.sequence.times == "auto" else cfg.sequence.times
    spec = SequenceSpec("hahn", 1, 1.0, cfg.sequence.branch)
    table, _ = analysis.sweep_angle(
        cfg.zfs, mag, noise, cfg.sweep_angle.thetas, cfg.sweep_angle.masked, spec, times,
        mc.n_traj, cfg.sequence.model, mc.dt, mc.seed, cfg.consts, workers,
    )
    rows = list(zip(table.x, table.t2, table.one_over_t2, table.std_err, table.included))
    art = Artifacts(emit_csv("sweep-angle", rows, out / "sweep-angle.csv"))
    fit = analysis.fit_angular(table, mag, cfg.zfs, noise, cfg.consts)
    art.summary.append(
        f"angular fit: tau0 = {fit['tau0']:.6g} +/- {fit.std_errs['tau0']:.2g} us, "
        f"offset = {fit['offset']:.6g} +/- {fit.std_errs['offset']:.2g} 1/us"
    )
    if svg:
        grid = np.linspace(0, 90, 91)
        model = analysis.angular_model(grid, mag, cfg.zfs, noise, fit["tau0"], fit["offset"], cfg.consts)
        inc = table.included
        art.svg = emit_svg(
            [
                Series("simulated 1/T2", table.x[inc], table.one_over_t2[inc], table.one_over_t2_err[inc]),
                Series("angular model fit", grid, model),
            ],
            out / "sweep-angle.svg", title=f"1/T2 vs field angle at {mag:g} G",
            xlabel="theta (deg)", ylabel="1/T2 (1/us)",
        )
    return art


def _sweep_field(cfg, out, svg, workers):
    mc = cfg.monte_carlo
    times = None if cfg.sequence.times == "auto" else cfg.sequence.times
    spec = SequenceSpec("hahn", 1, 1.0, cfg.sequence.branch)
    base = NoiseParams(cfg.noise.b_rms, cfg.noise.tau0 or 1.0)
    rows, series = [], []
    for orient in cfg.sweep_field.orientations:
        table, _ = analysis.sweep_field(
            cfg.zfs, cfg.sweep_field.magnitudes, base, orient, cfg.noise.tau0_profile, spec, times,
            mc.n_traj, cfg.sequence.model, mc.dt, mc.seed, cfg.consts, workers,
        )
        rows += [(b, orient, t, e) for b, t, e in zip(table.x, table.t2, table.std_err)]
        series.append(Series(orient, table.x, table.t2, table.std_err))
    art = Artifacts(emit_csv("sweep-field", rows, out / "sweep-field.csv"))
    for s in series:
        art.summary.append(f"{s.label}: T2 from {s.y[0]:.4g} us to {s.y[-1]:.4g} us")
    if svg and all(len(s.x) >= 2 for s in series):
        art.svg = emit_svg(series, out / "sweep-field.svg", title="T2 vs field magnitude",
                           xlabel="|B| (gauss)", ylabel="T2 (us)")
    return art


def _validate(cfg, out, svg, workers):
    rows, series = [], []
    for axis in cfg.validate_perturbation.axes:
        errs = []
        for b in cfg.validate_perturbation.magnitudes:
            vec = FieldVector(b, 0, 0) if axis == "x" else FieldVector(0, 0, b)
            em, ep = perturbation_error(cfg.zfs, vec, cfg.consts)
            rows.append((b, axis, em, ep))
            errs.append(max(em, ep))
        errs = np.asarray(errs)
        series.append(Series(f"{axis} axis", np.asarray(cfg.validate_perturbation.magnitudes), errs))
    art = Artifacts(emit_csv("validate-perturbation", rows, out / "validate-perturbation.csv"))
    for s in series:
        mono = bool(np.all(np.diff(s.y) >= -1e-9))
        art.summary.append(f"{s.label}: max error {s.y.max():.4g} MHz, nondecreasing: {mono}")
    if svg and len(cfg.validate_perturbation.magnitudes) >= 2:
        art.svg = emit_svg(series, out / "validate-perturbation.svg", title="perturbative vs exact",
                           xlabel="|B| (gauss)", ylabel="max error (MHz)")
    return art


def _suppression(cfg, out, svg, workers):
    mags = cfg.suppression.magnitudes or [cfg.field.vector().magnitude]
    rows = []
    branch = cfg.sequence.branch
    mc = cfg.monte_carlo
    for b in mags:
        noise = cfg.noise_at(b)
        par = renormalized_rms(cfg.zfs, FieldVector(0, 0, b), noise, ShiftModel.EXACT, branch,
                               cfg.suppression.n_samples, mc.seed, cfg.consts)
        perp = renormalized_rms(cfg.zfs, FieldVector(b, 0, 0), noise, ShiftModel.EXACT, branch,
                                cfg.suppression.n_samples, mc.seed, cfg.consts)
        ratio = par / perp
        rows.append((b, par, perp, ratio, ratio**2))
    art = Artifacts(emit_csv("suppression", rows, out / "suppression.csv"))
    for b, par, perp, ratio, t2r in rows:
        art.summary.append(
            f"|B| = {b:g} G: RMS shift {par:.4g} MHz (parallel) vs {perp:.4g} MHz (perpendicular); "
            f"suppression factor {ratio:.3f}, T2 ratio {t2r:.1f}"
        )
    if svg and len(rows) >= 2:
        arr = np.asarray([r[:4] for r in rows], dtype=float)
        art.svg = emit_svg([Series("suppression", arr[:, 0], arr[:, 3])], out / "suppression.svg",
                           title="noise suppression factor", xlabel="|B| (gauss)", ylabel="ratio")
    return art


_HANDLERS = {
    "echo": lambda c, o, s, w: _decay("echo", c, o, s, w),
    "fid": lambda c, o, s, w: _decay("fid", c, o, s, w),
    "cpmg": _cpmg,
    "sweep-angle": _sweep_angle,
    "sweep-field": _sweep_field,
    "validate-perturbation": _validate,
    "suppression": _suppression,
}


def run_command(cmd: str, cfg: RunConfig, out_dir=None, svg=None, workers=None) -> Artifacts:
    """Execute one command; identical config and seed give identical files."""
    out = Path(out_dir if out_dir is not None else cfg.output.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    svg = cfg.output.svg if svg is None else svg
    workers = cfg.monte_carlo.threads if workers is None else workers
    return _HANDLERS[cmd](cfg, out, svg, workers)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvdecohere", description="NV-center decoherence in a fluctuating spin bath.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out-dir", help="output directory (overrides output.out_dir)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides monte_carlo.seed)")
    p.add_argument("--svg", action="store_true", default=None, help="also write an SVG plot")
    p.add_argument("--threads", type=int, help="worker threads (overrides monte_carlo.threads)")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ValidationError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.model_copy(update={"monte_carlo": cfg.monte_carlo.model_copy(update={"seed": args.seed})})
        art = run_command(args.command, cfg, args.out_dir, args.svg, args.threads)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NVDecoherenceError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        for line in art.summary:
            print(line)
        print(f"wrote {art.csv}" + (f" and {art.svg}" if art.svg else ""))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

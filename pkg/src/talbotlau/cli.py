"""Command-line front end.

Subcommands::

    talbotlau visibility-curve [--mode quantum|classical|both] [--samples N]
    talbotlau synthesize
    talbotlau analyze STACK_DIR
    talbotlau tilt (--gradient-pi-per-mm G | --curve CSV)
    talbotlau drift STACK_DIR

Common flags: ``--config FILE``, ``--seed N``, ``--out DIR``.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .beamline import (
    average_over_distribution,
    deposition_profile,
    scattering_correction,
    velocity_distribution_at_height,
    velocity_from_height,
)
from .classical import moire_signal
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    EmptyAcceptanceError,
    FitError,
    NumericalError,
)
from .imaging import (
    block_fits_from_stack,
    fringe_samples,
    drift_bound,
    phase_gradient,
    phase_gradient_from_arrays,
    tilt_from_phase_gradient,
    visibility_vs_height,
)
from .physics import harmonics_table, quantum_visibility
from .stack_io import curve_to_csv, load_stack, read_csv_table, table_to_csv, write_stack
from .svg import Series, plot
from .synthesis import synthesize_stack, velocity_edges

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
CURVE_FILE = "visibility_curve.csv"


def _header(cfg: RunConfig, title: str) -> list[str]:
    return [title, f"config_sha256: {cfg.hash()}", f"seed: {cfg.seed}"]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple, np.ndarray)):
            return [clean(v) for v in o]
        if isinstance(o, (float, np.floating)):
            return float(o) if np.isfinite(o) else None
        if isinstance(o, np.integer):
            return int(o)
        return o

    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


# -- visibility-curve ----------------------------------------------------------


def quantum_curves(cfg: RunConfig, heights: np.ndarray) -> dict[str, np.ndarray]:
    """Single-velocity, velocity-averaged and scattering-corrected quantum visibilities."""
    icfg, geom, source = cfg.interferometer_config(), cfg.beamline_geometry(), cfg.source_model()
    kw, a, im = cfg.physics_kwargs(), cfg.analysis, cfg.imaging
    window = im.rect_height_um * 1e-6
    v_central = np.array([velocity_from_height(h, geom) for h in heights])
    single = np.array([quantum_visibility(icfg, v, cfg.interferometer.resolution, **kw).sinusoidal for v in v_central])
    edges = velocity_edges(geom, source, heights.min(), heights.max(), window, a.velocity_bin_mps)
    centers = 0.5 * (edges[1:] + edges[:-1])
    table = harmonics_table(icfg, centers, **kw)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(heights) + 1)
    averaged = np.empty(len(heights))
    for k, h in enumerate(heights):
        dist = velocity_distribution_at_height(h, geom, source, window, a.velocity_samples, int(seeds[k]), bins=edges)
        averaged[k] = average_over_distribution(dist, icfg, a.averaging_mode, harmonics=table)
    dep = deposition_profile(heights, geom, source, window, a.deposition_samples, int(seeds[-1]))
    corrected = scattering_correction(
        heights, averaged, dep, a.scattering_fraction, window, a.detector_extent_um * 1e-6
    )
    return {"velocity": v_central, "single": single, "averaged": averaged, "corrected": corrected, "deposition": dep}


def classical_curve(cfg: RunConfig, heights: np.ndarray, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Moiré visibility at the central velocity of each height; point i uses seed + i."""
    icfg, geom = cfg.interferometer_config(), cfg.beamline_geometry()
    vis, err = [], []
    for i, h in enumerate(heights):
        r = moire_signal(icfg, velocity_from_height(h, geom), samples, cfg.seed + i,
                         phase_cap=cfg.interferometer.phase_cap_rad)
        vis.append(r.visibility)
        err.append(r.statistical_error)
    return np.array(vis), np.array(err)


def cmd_visibility_curve(cfg: RunConfig, out: Path, mode: str, samples: int) -> int:
    heights = cfg.heights()
    geom = cfg.beamline_geometry()
    h_um = heights * 1e6
    v = np.array([velocity_from_height(h, geom) for h in heights])
    columns, data, series = ["height_um", "velocity_mps"], [h_um, v], []
    if mode in ("quantum", "both"):
        q = quantum_curves(cfg, heights)
        columns += ["quantum_single_velocity", "quantum_averaged", "quantum_corrected", "deposition_fraction"]
        data += [q["single"], q["averaged"], q["corrected"], q["deposition"]]
        series += [
            Series(h_um, q["single"], "quantum, single velocity", dashed=True, color="#555555"),
            Series(h_um, q["averaged"], "quantum, velocity averaged", dashed=True),
            Series(h_um, q["corrected"], "quantum, scattering corrected"),
        ]
    if mode in ("classical", "both"):
        c, ce = classical_curve(cfg, heights, samples)
        columns += ["classical", "classical_err"]
        data += [c, ce]
        series.append(Series(h_um, c, "classical moire", yerr=ce, color="#27864a"))
    if cfg.analysis.measured_csv:
        m = read_csv_table(Path(cfg.analysis.measured_csv))
        if "height_um" not in m or "visibility" not in m:
            raise DataError("measured overlay needs height_um and visibility columns")
        series.append(Series(m["height_um"], m["visibility"], "measured", yerr=m.get("visibility_err"),
                             color="#111111", markers=True, line=False))
    rows = np.column_stack(data)
    _write(out / "visibility_vs_height.csv",
           table_to_csv(columns, rows, _header(cfg, f"talbotlau visibility-curve mode={mode} samples={samples}")))
    _write(out / "visibility_vs_height.svg",
           plot(series, "deposition height (um)", "fringe visibility", "Visibility versus deposition height"))
    print(f"wrote {out / 'visibility_vs_height.csv'} and .svg ({len(heights)} heights, mode {mode})")
    return EXIT_OK


# -- synthesize ------------------------------------------------------------------


def cmd_synthesize(cfg: RunConfig, out: Path) -> int:
    syn = synthesize_stack(
        cfg.interferometer_config(), cfg.beamline_geometry(), cfg.source_model(),
        cfg.synthesis_settings(), cfg.seed, **cfg.physics_kwargs(),
    )
    s = syn.settings
    stack_dir = out / "stack"
    write_stack(
        stack_dir, syn.raw_frames, syn.reference, syn.dark,
        pixel_pitch=syn.pixel_pitch, origin=syn.origin, grating_period=syn.grating_period,
        grating_step=s.grating_step, adsorber_step=s.adsorber_step, exposure=s.exposure,
        stripe_centers=syn.stripe_centers, file_format=cfg.imaging.file_format,
        extra={"config_sha256": cfg.hash(), "seed": cfg.seed,
               "injected": {"tilt_rad": s.tilt, "drift_m": s.drift}},
    )
    truth = syn.truth(cfg.heights())
    geom = cfg.beamline_geometry()
    rows = np.column_stack([
        truth["heights"] * 1e6,
        [velocity_from_height(h, geom) for h in truth["heights"]],
        truth["visibility"],
        truth["phase"],
    ])
    _write(out / "truth.csv", table_to_csv(
        ["height_um", "velocity_mps", "visibility", "phase_rad"], rows,
        _header(cfg, f"talbotlau synthesize truth tilt_rad={s.tilt:.6g} drift_m={s.drift:.6g}"),
    ))
    print(f"wrote {s.n_stripes} stripes to {stack_dir}")
    return EXIT_OK


# -- analyze / tilt / drift ----------------------------------------------------------


def _drift_report(cfg: RunConfig, stack, heights) -> dict:
    a = cfg.analysis
    im = cfg.imaging
    try:
        fits, times = block_fits_from_stack(stack, heights, a.block_size, im.rect_width_um * 1e-6,
                                            im.rect_height_um * 1e-6)
        db = drift_bound(fits, times, stack.n_stripes * stack.exposure_per_stripe,
                         stack.grating_period, a.drift_sigma)
    except FitError as exc:
        return {"status": "failed", "reason": str(exc)}
    return {
        "status": "ok",
        "bound_nm": db.bound * 1e9,
        "noise_floor_nm": db.noise_floor * 1e9,
        "rate_nm_per_h": db.rate * 3600e9,
        "rate_err_nm_per_h": db.rate_err * 3600e9,
        "trend_detected": db.trend_detected,
        "block_offsets_nm": db.block_offsets * 1e9,
        "block_offset_errs_nm": db.block_offset_errs * 1e9,
    }


def cmd_analyze(cfg: RunConfig, stack_dir: Path, out: Path) -> int:
    stack, meta, notes = load_stack(stack_dir, cfg.imaging.flat_field_eps)
    heights = cfg.heights()
    im, a = cfg.imaging, cfg.analysis
    rect = (im.rect_width_um * 1e-6, im.rect_height_um * 1e-6)
    curve = visibility_vs_height(stack, heights, cfg.beamline_geometry(), *rect)
    _write(out / CURVE_FILE, curve_to_csv(curve, _header(cfg, f"talbotlau analyze stack={Path(stack_dir).name}")))

    for target in a.fringe_plot_heights_um:
        k = int(np.argmin(np.abs(heights * 1e6 - target)))
        p = curve.points[k]
        if not p.ok:
            continue
        vals, pos, _ = fringe_samples(stack, p.height, *rect)
        xs = np.linspace(pos.min(), pos.max(), 200)
        svg = plot(
            [Series(pos * 1e9, vals, "stripes", markers=True, line=False),
             Series(xs * 1e9, p.fit.model(xs, stack.grating_period), f"fit V={p.visibility:.3f}")],
            "grating position (nm)", "integrated density (a.u.)",
            f"h = {p.height * 1e6:.0f} um, v = {p.velocity:.0f} m/s",
        )
        _write(out / f"fringe_h{p.height * 1e6:04.0f}um.svg", svg)

    report = {
        "config_sha256": cfg.hash(),
        "stack": meta.get("format", ""),
        "n_stripes": stack.n_stripes,
        "periods_spanned": stack.periods_spanned,
        "magnification": stack.magnification,
        "stack_notes": notes,
        "heights_ok": len(curve.valid_points),
        "height_failures": [{"height_um": p.height * 1e6, "reason": p.note} for p in curve.failures],
        "fit_flags": sorted({f for p in curve.valid_points for f in p.fit.flags}),
    }
    try:
        g = phase_gradient(curve, a.max_phase_err_rad)
        report["phase_gradient"] = {
            "status": "ok",
            "slope_rad_per_m": g.slope,
            "slope_err_rad_per_m": g.slope_err,
            "slope_pi_per_mm": g.slope / np.pi * 1e-3,
            "ambiguous_unwrap": g.ambiguous,
            "points_used": len(g.heights),
        }
        report["tilt"] = {
            "status": "ok",
            "tilt_urad": tilt_from_phase_gradient(g.slope, stack.grating_period) * 1e6,
            "tilt_err_urad": tilt_from_phase_gradient(g.slope_err, stack.grating_period) * 1e6,
        }
    except FitError as exc:
        report["phase_gradient"] = report["tilt"] = {"status": "failed", "reason": str(exc)}
    report["drift"] = _drift_report(cfg, stack, heights)
    _write(out / "report.json", _json(report))
    print(f"analyzed {stack.n_stripes} stripes: {len(curve.valid_points)}/{len(heights)} heights fitted")
    for note in notes:
        print(f"  note: {note}")
    if report["tilt"].get("status") == "ok":
        print(f"  phase gradient {report['phase_gradient']['slope_pi_per_mm']:.4f} pi/mm, "
              f"tilt {report['tilt']['tilt_urad']:.1f} +- {report['tilt']['tilt_err_urad']:.1f} urad")
    if report["drift"].get("status") == "ok":
        print(f"  drift bound {report['drift']['bound_nm']:.2f} nm over the scan")
    if not curve.valid_points:
        print("error: no height could be fitted", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_tilt(cfg: RunConfig, out: Path, gradient: float | None, curve_path: str | None) -> int:
    d = cfg.grating("g1").period
    if gradient is not None:
        slope, slope_err, source = gradient * np.pi * 1e3, 0.0, "gradient"
    else:
        t = read_csv_table(Path(curve_path))
        if not {"height_um", "phase_rad", "phase_err_rad"} <= set(t):
            raise DataError("curve table needs height_um, phase_rad and phase_err_rad columns")
        g = phase_gradient_from_arrays(t["height_um"] * 1e-6, t["phase_rad"], t["phase_err_rad"],
                                       cfg.analysis.max_phase_err_rad)
        slope, slope_err, source = g.slope, g.slope_err, Path(curve_path).name
    tilt = tilt_from_phase_gradient(slope, d)
    result = {
        "config_sha256": cfg.hash(),
        "source": source,
        "slope_rad_per_m": slope,
        "slope_pi_per_mm": slope / np.pi * 1e-3,
        "tilt_urad": tilt * 1e6,
        "tilt_err_urad": abs(tilt_from_phase_gradient(slope_err, d)) * 1e6,
    }
    _write(out / "tilt.json", _json(result))
    print(f"tilt {result['tilt_urad']:.2f} +- {result['tilt_err_urad']:.2f} urad "
          f"(gradient {result['slope_pi_per_mm']:.4f} pi/mm)")
    return EXIT_OK


def cmd_drift(cfg: RunConfig, stack_dir: Path, out: Path) -> int:
    stack, _, notes = load_stack(stack_dir, cfg.imaging.flat_field_eps)
    report = _drift_report(cfg, stack, cfg.heights())
    report["config_sha256"] = cfg.hash()
    report["stack_notes"] = notes
    _write(out / "drift.json", _json(report))
    if report["status"] != "ok":
        print(f"error: {report['reason']}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"drift bound {report['bound_nm']:.2f} nm (noise floor {report['noise_floor_nm']:.2f} nm, "
          f"trend {'detected' if report['trend_detected'] else 'not detected'})")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file (defaults reproduce the reference setup)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory (overrides output_dir)")

    parser = argparse.ArgumentParser(prog="talbotlau", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("visibility-curve", parents=[common], help="theory curves versus deposition height")
    p.add_argument("--mode", choices=("quantum", "classical", "both"), default="both")
    p.add_argument("--samples", type=int, help="Monte Carlo rays per classical point")
    sub.add_parser("synthesize", parents=[common], help="write a synthetic stripe stack")
    p = sub.add_parser("analyze", parents=[common], help="fit a stripe stack")
    p.add_argument("stack", help="stack directory holding stack.json")
    p = sub.add_parser("tilt", parents=[common], help="grating tilt from a phase gradient")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gradient-pi-per-mm", type=float, help="phase gradient in units of pi/mm")
    g.add_argument("--curve", help="curve CSV written by analyze")
    p = sub.add_parser("drift", parents=[common], help="drift bound from a stripe stack")
    p.add_argument("stack", help="stack directory holding stack.json")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
    out = Path(cfg.output_dir)
    if args.command == "visibility-curve":
        samples = args.samples if args.samples is not None else cfg.analysis.classical_samples
        if samples < 1:
            raise ConfigError("--samples must be positive")
        return cmd_visibility_curve(cfg, out, args.mode, samples)
    if args.command == "synthesize":
        return cmd_synthesize(cfg, out)
    if args.command == "analyze":
        return cmd_analyze(cfg, Path(args.stack), out)
    if args.command == "tilt":
        return cmd_tilt(cfg, out, args.gradient_pi_per_mm, args.curve)
    return cmd_drift(cfg, Path(args.stack), out)


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FitError, EmptyAcceptanceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

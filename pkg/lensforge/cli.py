"""
Command-line interface: design a lens for a patch antenna, locate its phase
centre and sweep the lens separation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, default_config, load_config
from .emcore import InvalidInputError
from .export import (
    export_comparison,
    export_design,
    export_pattern,
    export_phase_function,
    export_rays,
    export_sweep,
    plot_pattern_cut,
    plot_phase_function,
    plot_sweep,
)
from .lens import (
    DegenerateGeometryError,
    LensPlacement,
    aperture_from_rays,
    far_field_from_aperture,
    make_feed,
    theoretical_max_gain,
)
from .phasecenter import (
    PhaseCenterResult,
    build_plane,
    locate_minimum,
    phase_error_curve,
    sample_phase,
    scan_grid,
)
from .radiators import ArrayAntenna, far_field_directivity
from .sweep import comparison_report, gain_vs_separation

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_WARNING = 2


def _load(args) -> RunConfig:
    if args.default and args.config:
        raise ConfigError("use either --config or --default, not both")
    if args.config:
        config = load_config(args.config)
    elif args.default:
        config = default_config()
    else:
        raise ConfigError("no configuration given; use --config PATH or --default")
    if args.out:
        config = config.with_output_directory(args.out)
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _phase_center(config: RunConfig, antenna: ArrayAntenna) -> tuple[PhaseCenterResult, list[float]]:
    pc = config.phasecenter
    plane = build_plane(
        antenna.wave,
        delta_theta=pc.delta_theta,
        z_plane=pc.plane_z_wavelengths * antenna.wave.wavelength,
        grid_n=pc.grid_n,
    )
    d_values = scan_grid(pc.d_min_mm, pc.d_max_mm, pc.d_step_mm)
    measured = sample_phase(antenna, plane)
    result = locate_minimum(measured, d_values)
    errors = phase_error_curve(measured, d_values)
    return result, [float(e) for e in errors]


def _warn_if_not_well_formed(result: PhaseCenterResult) -> int:
    if result.well_formed:
        return EXIT_OK
    print(
        f"Warning: phase front not well formed, max phase error "
        f"{result.max_phase_error_deg:.1f} deg at D = {result.d_star:.3f} mm",
        file=sys.stderr,
    )
    return EXIT_WARNING


def cmd_design(config: RunConfig) -> int:
    antenna = config.antenna.build()
    wave = antenna.wave
    patch = antenna.element
    lens = config.lens.build()
    g_max = theoretical_max_gain(lens, wave)

    print(f"Frequency {wave.frequency:g} GHz, wavelength {wave.wavelength:.4f} mm")
    print(f"Patch W = {patch.width:.4f} mm, L = {patch.length:.4f} mm (eps_eff {patch.eps_eff:.4f})")
    print(f"Lens n = {lens.n:.4f}, b = {lens.b:.4f} mm, extension L = {lens.extension_l:.4f} mm")
    print(f"Theoretical maximum gain {g_max:.2f} dBi")

    rows = [
        ("frequency", wave.frequency, "GHz"),
        ("wavelength", wave.wavelength, "mm"),
        ("patch_width", patch.width, "mm"),
        ("patch_length", patch.length, "mm"),
        ("patch_eps_eff", patch.eps_eff, ""),
        ("patch_delta_l", patch.delta_l, "mm"),
        ("element_count", antenna.element_count, ""),
        ("lens_n", lens.n, ""),
        ("lens_radius", lens.radius_r, "mm"),
        ("lens_b", lens.b, "mm"),
        ("lens_extension", lens.extension_l, "mm"),
        ("theoretical_max_gain", g_max, "dBi"),
    ]
    path = export_design(rows, _out_dir(config) / "design.csv")
    print(f"Wrote {path}")
    return EXIT_OK


def cmd_phase_center(config: RunConfig) -> int:
    antenna = config.antenna.build()
    result, errors = _phase_center(config, antenna)
    out = _out_dir(config)
    print(f"Phase centre D* = {result.d_star:.4f} mm (S = {result.s_star:.4g} rad^2)")
    print(f"Max phase error {result.max_phase_error_deg:.2f} deg, well formed: {result.well_formed}")
    print(f"Wrote {export_phase_function(result, errors, out / 'phase_function.csv')}")
    if config.output.emit_plots:
        print(f"Wrote {plot_phase_function(result, out / 'phase_function.svg')}")
    return _warn_if_not_well_formed(result)


def cmd_sweep(config: RunConfig) -> int:
    antenna = config.antenna.build()
    lens = config.lens.build()
    result, _ = _phase_center(config, antenna)
    _, no_lens = far_field_directivity(antenna)
    s = config.sweep

    print(f"Phase centre D* = {result.d_star:.4f} mm; no-lens gain {no_lens:.2f} dBi")
    print(f"Sweeping D over [{s.d_lo_mm:g}, {s.d_hi_mm:g}] mm in {s.step_mm:g} mm steps ({s.mode})...")
    sweep = gain_vs_separation(
        antenna,
        lens,
        s.d_values(),
        s.mode,
        phase_center=result.d_star,
        no_lens_gain_dbi=no_lens,
        ray_count=s.ray_count,
    )
    report = comparison_report(
        antenna,
        lens,
        s.mode,
        phase_center=result.d_star,
        no_lens_gain_dbi=no_lens,
        ray_count=s.ray_count,
    )
    out = _out_dir(config)
    print(f"Peak {sweep.gain_peak_dbi:.2f} dBi at D = {sweep.d_peak:.3f} mm")
    print(
        f"Improvement over D = {sweep.rows[0].d_mm:g} mm: {sweep.improvement_db:.2f} dB "
        f"({sweep.improvement_pct_of_db:.1f}% of peak dB)"
    )
    for name, gain in report.rows():
        print(f"  {name:<11} {gain:7.2f} dBi")
    print(f"Wrote {export_sweep(sweep, out / 'gain_sweep.csv')}")
    print(f"Wrote {export_comparison(report, out / 'comparison.csv')}")
    if config.output.emit_plots:
        print(f"Wrote {plot_sweep(sweep, out / 'gain_sweep.svg')}")
    return _warn_if_not_well_formed(result)


def _design_placement(config: RunConfig, antenna: ArrayAntenna) -> tuple[LensPlacement, float]:
    result, _ = _phase_center(config, antenna)
    placement = LensPlacement(lens=config.lens.build(), d_gap=max(result.d_star, 0.0))
    return placement, result.d_star


def cmd_pattern(config: RunConfig) -> int:
    antenna = config.antenna.build()
    placement, d_star = _design_placement(config, antenna)
    feed = make_feed(antenna, placement, config.sweep.mode, d_star)
    bundles: list = []
    aperture = aperture_from_rays(placement, feed, antenna.wave, config.sweep.ray_count, bundle_out=bundles)
    pattern = far_field_from_aperture(aperture, antenna.wave)
    out = _out_dir(config)

    print(f"Lens at D = {placement.d_gap:.3f} mm")
    print(
        f"Boresight directivity {pattern.boresight_directivity_dbi:.2f} dBi, "
        f"gain estimate {pattern.gain_estimate_dbi:.2f} dBi"
    )
    print(
        f"Spillover {pattern.spillover_efficiency:.3f}, transmission {pattern.transmission_efficiency:.3f}, "
        f"aperture efficiency {pattern.aperture_efficiency:.3f}"
    )
    print(f"Wrote {export_pattern(pattern, out / 'pattern.csv')}")
    if config.output.emit_rays:
        print(f"Wrote {export_rays(bundles[0], out / 'rays.csv')}")
    if config.output.emit_plots:
        print(f"Wrote {plot_pattern_cut(pattern, out / 'pattern.svg')}")
    return EXIT_OK


def cmd_trace(config: RunConfig) -> int:
    antenna = config.antenna.build()
    placement, d_star = _design_placement(config, antenna)
    feed = make_feed(antenna, placement, config.sweep.mode, d_star)
    bundles: list = []
    aperture = aperture_from_rays(placement, feed, antenna.wave, config.sweep.ray_count, bundle_out=bundles)
    total = aperture.power_in_rays

    print(f"Traced {aperture.ray_count} rays through the lens at D = {placement.d_gap:.3f} mm")
    print(f"  exited     {aperture.power_exited / total:.4f}")
    print(f"  TIR        {aperture.power_tir / total:.4f}")
    print(f"  side wall  {aperture.power_side_wall / total:.4f}")
    print(f"  missed     {aperture.power_missed / total:.4f}")
    print(f"Wrote {export_rays(bundles[0], _out_dir(config) / 'rays.csv')}")
    return EXIT_OK


COMMANDS = {
    "design": cmd_design,
    "phase-center": cmd_phase_center,
    "sweep": cmd_sweep,
    "pattern": cmd_pattern,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lensforge",
        description=(
            "Phase-centre analysis and extended hemispherical lens design for patch antennas.\n"
            "- design: patch and lens dimensions. phase-center: S(D) scan.\n"
            "- sweep: gain vs lens separation. pattern / trace: lens at the phase centre."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step")
        p.add_argument("--config", metavar="PATH", help="JSON run configuration.")
        p.add_argument(
            "--default",
            action="store_true",
            help="Use the built-in reference configuration (30.2 GHz 2x2 array, R = 17.27 mm lens).",
        )
        p.add_argument("--out", metavar="DIR", help="Output directory. Overrides output.directory.")
        p.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _load(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID

    try:
        return COMMANDS[args.command](config)
    except (InvalidInputError, DegenerateGeometryError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""
Write lensforge results to CSV, with optional SVG line plots.

CSV files are UTF-8 with LF line endings, one header row, floats to six
significant digits.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .lens import FarFieldPattern, RayBundle
from .phasecenter import PhaseCenterResult
from .sweep import ComparisonReport, SweepResult

PHASE_FUNCTION_HEADER = ("D_mm", "S_rad2", "max_phase_err_deg")
RAYS_HEADER = (
    "launch_theta_deg",
    "launch_phi_deg",
    "status",
    "exit_x_mm",
    "exit_y_mm",
    "exit_dirz",
    "opt_path_mm",
    "amp_factor",
)
PATTERN_HEADER = ("theta_deg", "phi_deg", "gain_dbi")
SWEEP_HEADER = ("D_mm", "gain_dbi", "spillover_eff", "transmission_eff")
COMPARISON_HEADER = ("config", "gain_dbi")
DESIGN_HEADER = ("quantity", "value", "unit")

# Floor for log-scaled pattern nulls.
MIN_GAIN_DBI = -200.0


def format_float(value: float) -> str:
    return f"{value:.6g}"


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def write_csv(out_path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """Write `rows` under `header`; floats are formatted, None becomes an empty cell."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return out_path


def export_design(quantities: list[tuple[str, float, str]], out_path: str | Path) -> Path:
    return write_csv(out_path, DESIGN_HEADER, quantities)


def export_phase_function(result: PhaseCenterResult, max_errors_deg: Sequence[float], out_path: str | Path) -> Path:
    """S curve with the max phase error at each candidate height."""
    if len(max_errors_deg) != len(result.s_curve):
        raise ValueError("need one phase error per scanned height")
    rows = ((d, s, float(e)) for (d, s), e in zip(result.s_curve, max_errors_deg))
    return write_csv(out_path, PHASE_FUNCTION_HEADER, rows)


def export_rays(bundle: RayBundle, out_path: str | Path) -> Path:
    """One row per launched ray; exit columns stay empty unless the ray exited."""
    d = bundle.launch_direction
    theta = np.degrees(np.arccos(np.clip(d[:, 2], -1.0, 1.0)))
    phi = np.degrees(np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * math.pi))
    exited = bundle.exited

    def rows():
        for i in range(len(bundle)):
            if exited[i]:
                tail = (
                    float(bundle.aperture_point[i, 0]),
                    float(bundle.aperture_point[i, 1]),
                    float(bundle.exit_direction[i, 2]),
                    float(bundle.optical_path[i]),
                    float(bundle.amplitude_factor[i]),
                )
            else:
                tail = (None, None, None, None, None)
            yield (float(theta[i]), float(phi[i]), bundle.status(i).value, *tail)

    return write_csv(out_path, RAYS_HEADER, rows())


def export_pattern(pattern: FarFieldPattern, out_path: str | Path) -> Path:
    gain = np.maximum(pattern.gain_dbi(), MIN_GAIN_DBI)
    theta = np.degrees(pattern.theta)
    phi = np.degrees(pattern.phi)
    rows = (
        (float(theta[i]), float(phi[j]), float(gain[i, j]))
        for i in range(theta.size)
        for j in range(phi.size)
    )
    return write_csv(out_path, PATTERN_HEADER, rows)


def export_sweep(result: SweepResult, out_path: str | Path) -> Path:
    rows = ((r.d_mm, r.gain_dbi, r.spillover_eff, r.transmission_eff) for r in result.rows)
    return write_csv(out_path, SWEEP_HEADER, rows)


def export_comparison(report: ComparisonReport, out_path: str | Path) -> Path:
    return write_csv(out_path, COMPARISON_HEADER, report.rows())


# ──────────────────────────────────────────────────────────────────
#  Plots
# ──────────────────────────────────────────────────────────────────

def plot_line(
    out_path: str | Path,
    x: Sequence[float],
    y: Sequence[float],
    xlabel: str,
    ylabel: str,
    title: str = "",
) -> Path:
    """Single-series SVG line chart, byte-stable for identical input."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "lensforge", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        ax.plot(list(x), list(y), marker="o", markersize=3, linewidth=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path


def plot_phase_function(result: PhaseCenterResult, out_path: str | Path) -> Path:
    d = [p[0] for p in result.s_curve]
    s = [p[1] for p in result.s_curve]
    return plot_line(out_path, d, s, "D (mm)", "S (rad$^2$)", "Phase function")


def plot_sweep(result: SweepResult, out_path: str | Path) -> Path:
    d = [r.d_mm for r in result.rows]
    g = [r.gain_dbi for r in result.rows]
    return plot_line(out_path, d, g, "D (mm)", "Gain (dBi)", "Gain vs separation")


def plot_pattern_cut(pattern: FarFieldPattern, out_path: str | Path, phi_deg: float = 0.0) -> Path:
    """Gain against theta along the azimuth closest to `phi_deg`."""
    j = int(np.argmin(np.abs(np.degrees(pattern.phi) - phi_deg)))
    gain = np.maximum(pattern.gain_dbi()[:, j], MIN_GAIN_DBI)
    return plot_line(
        out_path,
        np.degrees(pattern.theta),
        gain,
        "theta (deg)",
        "Gain (dBi)",
        f"Pattern cut, phi = {np.degrees(pattern.phi[j]):.0f} deg",
    )

"""
Gain against lens separation: the D sweep, the optimum-D search and the
no-lens / lens-at-0 / lens-at-phase-centre comparison.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .emcore import InvalidInputError, golden_section_minimize
from .lens import (
    DEFAULT_RAY_COUNT,
    FarFieldPattern,
    FeedMode,
    LensPlacement,
    LensSpec,
    lens_gain,
)
from .phasecenter import build_plane, find_phase_center
from .radiators import ArrayAntenna, far_field_directivity

logger = logging.getLogger(__name__)

OPTIMIZE_TOL_MM = 0.05


@dataclass(frozen=True)
class SweepRow:
    d_mm: float
    gain_dbi: float
    spillover_eff: float
    transmission_eff: float


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    d_peak: float
    gain_peak_dbi: float
    gain_at_zero_dbi: float  # gain at the smallest scanned D
    no_lens_gain_dbi: float
    d_star_phase_center: float
    improvement_db: float
    improvement_pct_of_db: float


@dataclass(frozen=True)
class ComparisonReport:
    no_lens_dbi: float
    lens_d0_dbi: float
    lens_dstar_dbi: float
    d_star: float
    improvement_db: float
    improvement_pct_of_db: float

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("no_lens", self.no_lens_dbi),
            ("lens_d0", self.lens_d0_dbi),
            ("lens_dstar", self.lens_dstar_dbi),
        ]


def improvement_pct_of_db(gain_peak_dbi: float, gain_base_dbi: float) -> float:
    """dB improvement as a percentage of the peak dB figure."""
    if gain_peak_dbi == 0:
        raise InvalidInputError("peak gain of 0 dBi leaves the percentage undefined")
    return 100.0 * (gain_peak_dbi - gain_base_dbi) / gain_peak_dbi


def phase_center_of(antenna: ArrayAntenna) -> float:
    """Fitted phase centre on the default probe plane, mm."""
    result = find_phase_center(antenna, build_plane(antenna.wave))
    if not result.well_formed:
        logger.warning(
            "phase front is not well formed (max error %.1f deg)", result.max_phase_error_deg
        )
    return result.d_star


def gain_at(
    antenna: ArrayAntenna,
    lens: LensSpec,
    d: float,
    mode: FeedMode | str,
    phase_center: float,
    ray_count: int = DEFAULT_RAY_COUNT,
) -> FarFieldPattern:
    return lens_gain(
        antenna,
        LensPlacement(lens=lens, d_gap=d),
        antenna.wave,
        mode=mode,
        phase_center=phase_center,
        ray_count=ray_count,
    )


def gain_vs_separation(
    antenna: ArrayAntenna,
    lens: LensSpec,
    d_values: list[float],
    mode: FeedMode | str = FeedMode.SAMPLED_FIELD,
    *,
    phase_center: float | None = None,
    no_lens_gain_dbi: float | None = None,
    ray_count: int = DEFAULT_RAY_COUNT,
) -> SweepResult:
    """One lens_gain evaluation per D, rows in the order given."""
    d_values = [float(d) for d in d_values]
    if not d_values:
        raise InvalidInputError("d_values must not be empty")
    if any(d < 0 for d in d_values):
        raise InvalidInputError("separations must be >= 0")
    if any(b <= a for a, b in zip(d_values, d_values[1:])):
        raise InvalidInputError("d_values must be strictly ascending")

    if phase_center is None:
        phase_center = phase_center_of(antenna)
    if no_lens_gain_dbi is None:
        _, no_lens_gain_dbi = far_field_directivity(antenna)

    rows = []
    for d in d_values:
        pattern = gain_at(antenna, lens, d, mode, phase_center, ray_count)
        rows.append(
            SweepRow(
                d_mm=d,
                gain_dbi=pattern.gain_estimate_dbi,
                spillover_eff=pattern.spillover_efficiency,
                transmission_eff=pattern.transmission_efficiency,
            )
        )
        logger.info("D=%.3f mm gain=%.3f dBi", d, pattern.gain_estimate_dbi)

    peak = max(rows, key=lambda r: r.gain_dbi)
    zero = rows[0].gain_dbi
    return SweepResult(
        rows=rows,
        d_peak=peak.d_mm,
        gain_peak_dbi=peak.gain_dbi,
        gain_at_zero_dbi=zero,
        no_lens_gain_dbi=float(no_lens_gain_dbi),
        d_star_phase_center=float(phase_center),
        improvement_db=peak.gain_dbi - zero,
        improvement_pct_of_db=improvement_pct_of_db(peak.gain_dbi, zero),
    )


def maximize_on_grid(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    coarse_step: float,
    tol: float = OPTIMIZE_TOL_MM,
) -> tuple[float, float]:
    """Coarse scan of [lo, hi], then golden-section on the cells around the best sample."""
    if not lo < hi:
        raise InvalidInputError(f"empty bracket [{lo}, {hi}]")
    if not coarse_step > 0:
        raise InvalidInputError(f"coarse_step must be positive, got {coarse_step}")
    count = int(math.floor((hi - lo) / coarse_step + 1e-9)) + 1
    grid = lo + coarse_step * np.arange(count)
    if grid[-1] < hi - 1e-9:
        grid = np.append(grid, hi)
    values = np.array([func(float(x)) for x in grid])
    i = int(np.argmax(values))
    best_x, best_f = float(grid[i]), float(values[i])

    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    x, neg_f = golden_section_minimize(lambda t: -func(t), a, b, tol=tol)
    if -neg_f > best_f:
        best_x, best_f = x, -neg_f
    return best_x, best_f


def optimize_separation(
    antenna: ArrayAntenna,
    lens: LensSpec,
    d_lo: float,
    d_hi: float,
    coarse_step: float,
    mode: FeedMode | str = FeedMode.SAMPLED_FIELD,
    *,
    phase_center: float | None = None,
    ray_count: int = DEFAULT_RAY_COUNT,
) -> tuple[float, float]:
    """Separation D in [d_lo, d_hi] with the highest gain estimate, and that gain."""
    if not d_lo < d_hi:
        raise InvalidInputError(f"empty bracket [{d_lo}, {d_hi}]")
    if d_lo < 0:
        raise InvalidInputError("separations must be >= 0")
    if phase_center is None:
        phase_center = phase_center_of(antenna)

    def gain(d: float) -> float:
        return gain_at(antenna, lens, d, mode, phase_center, ray_count).gain_estimate_dbi

    d_opt, g_opt = maximize_on_grid(gain, d_lo, d_hi, coarse_step)
    logger.info("optimum separation %.3f mm -> %.3f dBi", d_opt, g_opt)
    return d_opt, g_opt


def comparison_report(
    antenna: ArrayAntenna,
    lens: LensSpec,
    mode: FeedMode | str = FeedMode.SAMPLED_FIELD,
    *,
    phase_center: float | None = None,
    no_lens_gain_dbi: float | None = None,
    ray_count: int = DEFAULT_RAY_COUNT,
) -> ComparisonReport:
    """No lens, lens flush on the antenna, lens with its face at the phase centre."""
    if phase_center is None:
        phase_center = phase_center_of(antenna)
    if no_lens_gain_dbi is None:
        _, no_lens_gain_dbi = far_field_directivity(antenna)
    # A phase centre below the antenna surface cannot be reached by the lens.
    d_star = max(phase_center, 0.0)
    at_zero = gain_at(antenna, lens, 0.0, mode, phase_center, ray_count).gain_estimate_dbi
    at_star = gain_at(antenna, lens, d_star, mode, phase_center, ray_count).gain_estimate_dbi
    return ComparisonReport(
        no_lens_dbi=float(no_lens_gain_dbi),
        lens_d0_dbi=at_zero,
        lens_dstar_dbi=at_star,
        d_star=d_star,
        improvement_db=at_star - at_zero,
        improvement_pct_of_db=improvement_pct_of_db(at_star, at_zero),
    )

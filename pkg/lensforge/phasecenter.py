"""
Phase-center location by least squares.

A probe plane at height z_plane is cut to the disk seen under the half-angle
delta_theta, the radiator's phase is sampled and unwrapped on it, and the
phase functional

    S(D) = sum_nm (r_nm - mean(r))^2,   r = phi_measured - phi_ideal(D)

with phi_ideal(D) the spherical phase of a source at (0, 0, D) is scanned
over D and refined around its minimum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .emcore import InvalidInputError, WaveSpec, golden_section_minimize, unwrap_phase_radial
from .radiators import Radiator

logger = logging.getLogger(__name__)

DEFAULT_DELTA_THETA = math.radians(22.5)
DEFAULT_PLANE_WAVELENGTHS = 10.0
DEFAULT_GRID_N = 41
DEFAULT_D_MIN = -30.0
DEFAULT_D_MAX = 30.0
DEFAULT_D_STEP = 0.2
MAX_PHASE_ERROR_DEG = 22.5
REFINE_TOL_MM = 0.005


@dataclass(frozen=True, eq=False)
class MeasurementPlane:
    wave: WaveSpec
    z_plane: float  # mm
    delta_theta: float  # rad
    grid_n: int
    axis: np.ndarray  # (grid_n,) sample coordinates along x and y, mm
    mask: np.ndarray  # (grid_n, grid_n) bool, True inside the cone
    points: np.ndarray  # (M, 2) retained (x, y), row-major order

    @property
    def radius(self) -> float:
        return self.z_plane * math.tan(self.delta_theta)

    @property
    def center_index(self) -> int:
        return self.grid_n // 2


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    plane: MeasurementPlane
    phase: np.ndarray  # rad, unwrapped, (M,)
    amplitude: np.ndarray  # linear, (M,)


@dataclass(frozen=True)
class PhaseCenterResult:
    d_star: float  # mm
    s_curve: list[tuple[float, float]]  # (D mm, S rad^2), ascending D
    s_star: float
    max_phase_error_deg: float
    well_formed: bool


def build_plane(
    wave: WaveSpec,
    delta_theta: float = DEFAULT_DELTA_THETA,
    z_plane: float | None = None,
    grid_n: int = DEFAULT_GRID_N,
) -> MeasurementPlane:
    """Square grid over the disk's bounding square, masked to the disk."""
    if z_plane is None:
        z_plane = DEFAULT_PLANE_WAVELENGTHS * wave.wavelength
    if not 0 < delta_theta < math.pi / 2:
        raise InvalidInputError(f"delta_theta must lie in (0, pi/2), got {delta_theta}")
    if not z_plane > 0:
        raise InvalidInputError(f"z_plane must be positive, got {z_plane}")
    if grid_n < 21 or grid_n % 2 == 0:
        raise InvalidInputError(f"grid_n must be odd and >= 21, got {grid_n}")

    radius = z_plane * math.tan(delta_theta)
    axis = np.linspace(-radius, radius, grid_n)
    axis[grid_n // 2] = 0.0
    xx, yy = np.meshgrid(axis, axis, indexing="xy")
    # Lattice points sitting on the rim survive rounding.
    mask = np.hypot(xx, yy) <= radius * (1 + 1e-9)
    points = np.column_stack([xx[mask], yy[mask]])
    logger.debug("plane z=%.3f mm radius=%.3f mm keeps %d points", z_plane, radius, len(points))
    return MeasurementPlane(
        wave=wave,
        z_plane=float(z_plane),
        delta_theta=float(delta_theta),
        grid_n=grid_n,
        axis=axis,
        mask=mask,
        points=points,
    )


def sample_phase(antenna: Radiator, plane: MeasurementPlane) -> PhaseGrid:
    """Probe the field on the whole square, unwrap from the centre, keep the disk."""
    xx, yy = np.meshgrid(plane.axis, plane.axis, indexing="xy")
    pts = np.stack([xx, yy, np.full_like(xx, plane.z_plane)], axis=-1)
    field = antenna.field_at_points(pts)
    c = plane.center_index
    unwrapped = unwrap_phase_radial(np.angle(field), center=(c, c))
    return PhaseGrid(
        plane=plane,
        phase=unwrapped[plane.mask],
        amplitude=np.abs(field)[plane.mask],
    )


def _ideal_phase(plane: MeasurementPlane, d: np.ndarray) -> np.ndarray:
    """Spherical phase from (0, 0, D) at every retained point; shape (len(d), M)."""
    rho2 = np.sum(plane.points**2, axis=1)
    dz = plane.z_plane - np.atleast_1d(d)[:, None]
    return -plane.wave.wavenumber * np.sqrt(rho2[None, :] + dz**2)


def _residuals(
    measured: PhaseGrid,
    d: np.ndarray,
    *,
    circular: bool,
    weighted: bool,
) -> np.ndarray:
    """Offset-free residuals r - c* per candidate; shape (len(d), M)."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if np.any(d >= measured.plane.z_plane):
        raise InvalidInputError(
            f"candidate centre must lie below the probe plane z={measured.plane.z_plane:.4f} mm"
        )
    r = measured.phase[None, :] - _ideal_phase(measured.plane, d)
    w = _weights(measured, weighted)
    if circular:
        offset = np.angle(np.sum(w * np.exp(1j * r), axis=1))
        return np.angle(np.exp(1j * (r - offset[:, None])))
    offset = np.sum(w * r, axis=1) / np.sum(w)
    return r - offset[:, None]


def _weights(measured: PhaseGrid, weighted: bool) -> np.ndarray:
    if not weighted:
        return np.ones_like(measured.amplitude)
    power = measured.amplitude**2
    return power / power.mean()


def _phase_function(
    measured: PhaseGrid,
    d: np.ndarray,
    *,
    circular: bool = False,
    weighted: bool = False,
) -> np.ndarray:
    res = _residuals(measured, d, circular=circular, weighted=weighted)
    w = _weights(measured, weighted)
    if circular:
        # |e^{j a} - e^{j b}|^2 = 2 - 2 cos(a - b)
        return np.sum(w * (2.0 - 2.0 * np.cos(res)), axis=1)
    return np.sum(w * res**2, axis=1)


def phase_function_S(
    measured: PhaseGrid,
    d_candidate: float,
    *,
    circular: bool = False,
    weighted: bool = False,
) -> float:
    """S(D) in rad^2 with the least-squares phase offset removed."""
    return float(_phase_function(measured, d_candidate, circular=circular, weighted=weighted)[0])


def max_phase_error(measured: PhaseGrid, d: float, *, circular: bool = False) -> float:
    """Largest offset-free residual, degrees."""
    res = _residuals(measured, d, circular=circular, weighted=False)
    return math.degrees(float(np.max(np.abs(res))))


def phase_error_curve(measured: PhaseGrid, d_values: np.ndarray, *, circular: bool = False) -> np.ndarray:
    """max_phase_error for every candidate, degrees."""
    res = _residuals(measured, np.asarray(d_values, dtype=float), circular=circular, weighted=False)
    return np.degrees(np.max(np.abs(res), axis=1))


def scan_grid(d_min: float, d_max: float, d_step: float) -> np.ndarray:
    if not d_min < d_max:
        raise InvalidInputError(f"d_min must be below d_max, got [{d_min}, {d_max}]")
    if not d_step > 0:
        raise InvalidInputError(f"d_step must be positive, got {d_step}")
    count = int(math.floor((d_max - d_min) / d_step + 1e-9)) + 1
    grid = d_min + d_step * np.arange(count)
    if grid.size == 0:
        raise InvalidInputError("phase-center scan grid is empty")
    return grid


def scan_phase_function(
    measured: PhaseGrid,
    d_values: np.ndarray,
    *,
    circular: bool = False,
    weighted: bool = False,
) -> np.ndarray:
    """S for every candidate; each row is reduced in fixed index order."""
    return _phase_function(measured, np.asarray(d_values, dtype=float), circular=circular, weighted=weighted)


def locate_minimum(
    measured: PhaseGrid,
    d_values: np.ndarray,
    *,
    circular: bool = False,
    weighted: bool = False,
) -> PhaseCenterResult:
    """Scan S over d_values, then golden-section refine around the discrete minimum."""
    s_values = scan_phase_function(measured, d_values, circular=circular, weighted=weighted)
    i = int(np.argmin(s_values))
    lo = d_values[max(i - 1, 0)]
    hi = d_values[min(i + 1, len(d_values) - 1)]

    def s_of(d: float) -> float:
        return phase_function_S(measured, d, circular=circular, weighted=weighted)

    d_star, s_star = float(d_values[i]), float(s_values[i])
    if hi > lo:
        d_ref, s_ref = golden_section_minimize(s_of, lo, hi, tol=REFINE_TOL_MM)
        if s_ref <= s_star:
            d_star, s_star = d_ref, s_ref
    logger.debug("phase centre bracket [%.3f, %.3f] -> %.4f mm", lo, hi, d_star)

    err = max_phase_error(measured, d_star, circular=circular)
    return PhaseCenterResult(
        d_star=d_star,
        s_curve=[(float(d), float(s)) for d, s in zip(d_values, s_values)],
        s_star=s_star,
        max_phase_error_deg=err,
        well_formed=err <= MAX_PHASE_ERROR_DEG,
    )


def find_phase_center(
    antenna: Radiator,
    plane: MeasurementPlane,
    d_min: float = DEFAULT_D_MIN,
    d_max: float = DEFAULT_D_MAX,
    d_step: float = DEFAULT_D_STEP,
    *,
    circular: bool = False,
    weighted: bool = False,
) -> PhaseCenterResult:
    """Sample the radiator on `plane` and locate the height D minimizing S."""
    if not d_max < plane.z_plane:
        raise InvalidInputError(
            f"d_max={d_max} must stay below the probe plane z={plane.z_plane:.4f} mm"
        )
    d_values = scan_grid(d_min, d_max, d_step)
    measured = sample_phase(antenna, plane)
    return locate_minimum(measured, d_values, circular=circular, weighted=weighted)

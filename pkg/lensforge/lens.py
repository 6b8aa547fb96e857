"""
Extended hemispherical lens: synthesis, geometrical-optics ray tracing from
a feed through the flat face and the spherical cap, deposition of the exit
rays on a planar aperture, and the far field of that aperture.

Geometry of a placement with air gap D (all mm):

    z = D              flat face, radius R
    z in [D, D + L]    cylindrical side wall of radius R
    z = D + L          centre of the cap (sphere of radius R, or the
                       ellipsoid of the elliptical oracle)
    z = D + L + h      output aperture plane, tangent to the apex

Only first-order GO is modelled: side-wall rays are dropped, total internal
reflection ends a ray, and no internal bounce is followed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Union

import numpy as np

from .emcore import (
    InvalidInputError,
    Vec3,
    WaveSpec,
    refract_directions,
    spherical_directions,
    unpolarized_transmittance,
)
from .radiators import Radiator

logger = logging.getLogger(__name__)

DEFAULT_RAY_COUNT = 20_000
MIN_RAY_COUNT = 10_000
SPILLOVER_MARGIN = math.radians(5.0)
OUTSIDE_CONE_SAMPLES = 64
# Sources this close below/above the face count as sitting on it.
FACE_SNAP_MM = 0.01
# Sampled-field sources sit at least this many wavelengths below the flat face.
FIELD_STANDOFF_WAVELENGTHS = 1 / 50
# Exit rays landing farther than this many lens radii off axis miss the aperture window.
APERTURE_WINDOW_RADII = 2.0


class DegenerateGeometryError(RuntimeError):
    """The lens/feed arrangement produces no usable aperture field."""


class LensShape(str, Enum):
    EXTENDED_HEMISPHERICAL = "extended-hemispherical"
    ELLIPTICAL_ORACLE = "elliptical-oracle"


class RayStatus(str, Enum):
    EXITED = "exited"
    SPILLOVER_MISSED = "spillover_missed"
    TOTAL_INTERNAL_REFLECTION = "total_internal_reflection"
    SIDE_WALL = "side_wall"


_STATUS_ORDER = list(RayStatus)
_EXITED, _MISSED, _TIR, _SIDE = range(4)


class FeedMode(str, Enum):
    POINT_SOURCE = "point-source"
    SAMPLED_FIELD = "sampled-field"


# ──────────────────────────────────────────────────────────────────
#  Lens synthesis
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LensSpec:
    eps_r: float
    n: float
    radius_r: float  # mm
    b: float  # mm
    extension_l: float  # mm
    shape: LensShape = LensShape.EXTENDED_HEMISPHERICAL

    @property
    def cap_height(self) -> float:
        """Axial half-height of the cap above its centre."""
        if self.shape is LensShape.ELLIPTICAL_ORACLE:
            return self.radius_r / math.sqrt(1 - 1 / self.n**2)
        return self.radius_r


def _check_lens_inputs(radius_r: float, eps_r: float) -> None:
    if not eps_r > 1:
        raise InvalidInputError(f"lens eps_r must be > 1, got {eps_r}")
    if not radius_r > 0:
        raise InvalidInputError(f"lens radius must be > 0, got {radius_r}")


def synthesize_lens(radius_r: float, eps_r: float, extension_l: float | None = None) -> LensSpec:
    """
    Extension height of the hemisphere-on-cylinder lens:

        b = R (1 + 1 / (3 n^2))
        L = b (1 + 1/n) / sqrt(1 - 1/n^2) - R

    An explicit `extension_l` overrides L.
    """
    _check_lens_inputs(radius_r, eps_r)
    n = math.sqrt(eps_r)
    b = radius_r * (1 + 1 / (3 * n**2))
    synthesized = b * (1 + 1 / n) / math.sqrt(1 - 1 / n**2) - radius_r
    if extension_l is None:
        extension_l = synthesized
    elif not extension_l > 0:
        raise InvalidInputError(f"lens extension must be > 0, got {extension_l}")
    return LensSpec(eps_r=eps_r, n=n, radius_r=radius_r, b=b, extension_l=extension_l)


def elliptical_lens(radius_r: float, eps_r: float) -> LensSpec:
    """
    Ellipsoid of eccentricity 1/n with semi-minor axis R on a cylinder whose
    length puts the far focus on the flat face. Rays from that focus leave
    exactly collimated.
    """
    _check_lens_inputs(radius_r, eps_r)
    n = math.sqrt(eps_r)
    semi_major = radius_r / math.sqrt(1 - 1 / n**2)
    return LensSpec(
        eps_r=eps_r,
        n=n,
        radius_r=radius_r,
        b=semi_major,
        extension_l=semi_major / n,
        shape=LensShape.ELLIPTICAL_ORACLE,
    )


def theoretical_max_gain(lens: LensSpec, wave: WaveSpec) -> float:
    """Uniform circular aperture directivity 4*pi*A/lambda^2, dBi."""
    area = math.pi * lens.radius_r**2
    return 10 * math.log10(4 * math.pi * area / wave.wavelength**2)


@dataclass(frozen=True)
class LensPlacement:
    lens: LensSpec
    d_gap: float  # mm, flat face above the antenna surface

    def __post_init__(self) -> None:
        if not self.d_gap >= 0:
            raise InvalidInputError(f"lens separation must be >= 0, got {self.d_gap}")

    @property
    def face_z(self) -> float:
        return self.d_gap

    @property
    def center_z(self) -> float:
        return self.d_gap + self.lens.extension_l

    @property
    def aperture_z(self) -> float:
        return self.center_z + self.lens.cap_height


# ──────────────────────────────────────────────────────────────────
#  Ray tracing
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TracedRay:
    launch_direction: Vec3
    exit_point: Vec3 | None  # on the lens surface
    exit_direction: Vec3 | None
    optical_path: float  # mm, source to aperture plane
    amplitude_factor: float
    status: RayStatus


@dataclass(frozen=True, eq=False)
class RayBundle:
    """Vectorized trace results; row i belongs to launch_direction[i]."""

    launch_direction: np.ndarray  # (N, 3)
    status_code: np.ndarray  # (N,) index into RayStatus
    face_point: np.ndarray  # (N, 3) where the ray enters the dielectric
    exit_point: np.ndarray  # (N, 3)
    exit_direction: np.ndarray  # (N, 3)
    aperture_point: np.ndarray  # (N, 2)
    face_path: np.ndarray  # (N,) air path from source to the face
    optical_path: np.ndarray  # (N,)
    amplitude_factor: np.ndarray  # (N,)

    def __len__(self) -> int:
        return self.status_code.shape[0]

    @property
    def exited(self) -> np.ndarray:
        return self.status_code == _EXITED

    def status(self, i: int) -> RayStatus:
        return _STATUS_ORDER[int(self.status_code[i])]

    def ray(self, i: int) -> TracedRay:
        exited = bool(self.exited[i])
        return TracedRay(
            launch_direction=self.launch_direction[i],
            exit_point=self.exit_point[i] if exited else None,
            exit_direction=self.exit_direction[i] if exited else None,
            optical_path=float(self.optical_path[i]),
            amplitude_factor=float(self.amplitude_factor[i]),
            status=self.status(i),
        )


def trace_rays(placement: LensPlacement, source_point: Vec3, directions: np.ndarray) -> RayBundle:
    """Trace launch directions from `source_point` through the lens."""
    lens = placement.lens
    src = np.asarray(source_point, dtype=float)
    d0 = np.atleast_2d(np.asarray(directions, dtype=float))
    if np.any(d0[:, 2] <= 0):
        raise InvalidInputError("launch directions must point upward (z > 0)")
    if src[2] > placement.face_z + 1e-9:
        raise InvalidInputError(
            f"source z={src[2]:.4f} mm lies above the flat face at {placement.face_z:.4f} mm"
        )
    count = d0.shape[0]
    R, h, n = lens.radius_r, lens.cap_height, lens.n
    status = np.full(count, _EXITED, dtype=np.int8)

    # (a) air to the flat face
    if abs(src[2] - placement.face_z) <= 1e-9:
        face_path = np.zeros(count)
        p1 = np.broadcast_to(src, d0.shape).copy()
        d1 = d0.copy()
        t1 = np.ones(count)
    else:
        face_path = (placement.face_z - src[2]) / d0[:, 2]
        p1 = src + face_path[:, None] * d0
        d1, _ = refract_directions(d0, np.array([0.0, 0.0, 1.0]), 1.0, n)
        t1 = unpolarized_transmittance(d0[:, 2], 1.0, n)
    status[np.hypot(p1[:, 0], p1[:, 1]) > R * (1 + 1e-12)] = _MISSED

    # (b) through the dielectric: side wall first, otherwise the cap
    with np.errstate(divide="ignore", invalid="ignore"):
        a_c = d1[:, 0] ** 2 + d1[:, 1] ** 2
        b_c = 2 * (p1[:, 0] * d1[:, 0] + p1[:, 1] * d1[:, 1])
        c_c = p1[:, 0] ** 2 + p1[:, 1] ** 2 - R**2
        disc_c = np.clip(b_c**2 - 4 * a_c * c_c, 0.0, None)
        t_cyl = np.where(a_c > 1e-300, (-b_c + np.sqrt(disc_c)) / (2 * a_c), np.inf)
        z_cyl = p1[:, 2] + t_cyl * d1[:, 2]
    status[(status == _EXITED) & (z_cyl < placement.center_z)] = _SIDE

    scale = np.array([R, R, h])
    q0 = (p1 - np.array([0.0, 0.0, placement.center_z])) / scale
    qd = d1 / scale
    a_q = np.sum(qd**2, axis=1)
    b_q = 2 * np.sum(q0 * qd, axis=1)
    c_q = np.sum(q0**2, axis=1) - 1
    t_cap = (-b_q + np.sqrt(np.clip(b_q**2 - 4 * a_q * c_q, 0.0, None))) / (2 * a_q)
    p2 = p1 + t_cap[:, None] * d1

    with np.errstate(divide="ignore", invalid="ignore"):
        normal = (p2 - np.array([0.0, 0.0, placement.center_z])) / scale**2
        normal /= np.linalg.norm(normal, axis=1, keepdims=True)
        d2, tir = refract_directions(d1, normal, n, 1.0)
        t2 = unpolarized_transmittance(np.einsum("ij,ij->i", d1, normal), n, 1.0)
    status[(status == _EXITED) & tir] = _TIR
    # Rays refracted sideways never reach the aperture plane.
    status[(status == _EXITED) & (d2[:, 2] <= 1e-9)] = _MISSED

    # (c) air up to the aperture plane
    ok = status == _EXITED
    t3 = np.zeros(count)
    t3[ok] = (placement.aperture_z - p2[ok, 2]) / d2[ok, 2]
    aperture = p2[:, :2] + t3[:, None] * d2[:, :2]

    optical_path = face_path + n * t_cap + t3
    amplitude = np.sqrt(t1 * t2)
    amplitude[~ok] = 0.0
    return RayBundle(
        launch_direction=d0,
        status_code=status,
        face_point=p1,
        exit_point=p2,
        exit_direction=d2,
        aperture_point=aperture,
        face_path=face_path,
        optical_path=optical_path,
        amplitude_factor=amplitude,
    )


def trace_ray(placement: LensPlacement, source_point: Vec3, launch_direction: Vec3) -> TracedRay:
    return trace_rays(placement, source_point, np.asarray(launch_direction, dtype=float)[None, :]).ray(0)


# ──────────────────────────────────────────────────────────────────
#  Feeds
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class RayFamily:
    """
    Rays launched from one point. `amplitude` is the complex field per root
    steradian the rays carry to the aperture; `intensity` is the power per
    steradian they are booked with in the energy ledger.
    """

    origin: np.ndarray
    amplitude: Callable[[np.ndarray, np.ndarray], np.ndarray]
    intensity: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PointSourceFeed:
    """Rays from one point, weighted by a far-field pattern of (theta, phi)."""

    position: Vec3
    pattern: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def families(self, placement: LensPlacement, wave: WaveSpec) -> list[RayFamily]:
        pattern = self.pattern
        return [
            RayFamily(
                origin=np.asarray(self.position, dtype=float),
                amplitude=lambda t, p: np.asarray(pattern(t, p), dtype=complex),
                intensity=lambda t, p: np.abs(np.asarray(pattern(t, p), dtype=complex)) ** 2,
            )
        ]


@dataclass(frozen=True)
class SampledFieldFeed:
    """
    The radiator's own near field. Each element term of `field_at_points`
    is a spherical wave from that element, so every element launches its own
    ray family along that local wavefront and the families add coherently on
    the aperture.

    The ledger books every direction with the radiator's coherent far-field
    intensity shared evenly between the families, so the launched power is
    the power the whole radiator puts into the upper hemisphere.
    """

    radiator: Radiator

    def families(self, placement: LensPlacement, wave: WaveSpec) -> list[RayFamily]:
        radiator = self.radiator
        positions = np.atleast_2d(np.asarray(radiator.element_positions, dtype=float))
        excitations = np.atleast_1d(np.asarray(radiator.excitations, dtype=complex))
        count = positions.shape[0]
        ceiling = placement.face_z - FIELD_STANDOFF_WAVELENGTHS * wave.wavelength

        def intensity(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
            return np.abs(radiator.far_field(theta, phi)) ** 2 / count

        families = []
        for position, excitation in zip(positions, excitations):
            origin = position.copy()
            origin[2] = min(origin[2], ceiling)
            families.append(
                RayFamily(
                    origin=origin,
                    amplitude=lambda t, p, a=excitation: a * radiator.element_far_field(t, p),
                    intensity=intensity,
                )
            )
        return families


Feed = Union[PointSourceFeed, SampledFieldFeed]


# ──────────────────────────────────────────────────────────────────
#  Aperture
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ApertureField:
    plane_z: float  # mm
    cell_size: float  # mm
    x: np.ndarray  # cell centres, (Nx,)
    y: np.ndarray  # cell centres, (Ny,)
    cells: np.ndarray  # complex, (Nx, Ny)
    power_in_rays: float  # total radiated by the feed over the hemisphere
    power_exited: float
    power_tir: float
    power_side_wall: float
    power_missed: float
    power_transmitted: float
    ray_count: int

    @property
    def spillover_efficiency(self) -> float:
        return (self.power_exited + self.power_tir) / self.power_in_rays

    @property
    def transmission_efficiency(self) -> float:
        reached = self.power_exited + self.power_tir
        return self.power_transmitted / reached if reached > 0 else 0.0

    @property
    def cell_area(self) -> float:
        return self.cell_size**2


def uniform_aperture(
    cell_size: float,
    radius: float | None = None,
    side: float | None = None,
    phase_slope_x: float = 0.0,
) -> ApertureField:
    """Uniform disk (radius) or square (side) aperture, unit amplitude."""
    if (radius is None) == (side is None):
        raise InvalidInputError("give exactly one of radius or side")
    if side is not None:
        count = int(round(side / cell_size))
        x = (np.arange(count) - (count - 1) / 2) * cell_size
        inside = np.ones((count, count), dtype=bool)
    else:
        m = int(math.ceil(radius / cell_size)) + 1
        x = np.arange(-m, m + 1) * cell_size
        xx, yy = np.meshgrid(x, x, indexing="ij")
        inside = np.hypot(xx, yy) <= radius
    cells = np.where(inside, 1.0 + 0j, 0.0) * np.exp(-1j * phase_slope_x * x)[:, None]
    return ApertureField(
        plane_z=0.0,
        cell_size=cell_size,
        x=x,
        y=x.copy(),
        cells=cells,
        power_in_rays=1.0,
        power_exited=1.0,
        power_tir=0.0,
        power_side_wall=0.0,
        power_missed=0.0,
        power_transmitted=1.0,
        ray_count=0,
    )


def _grid_shape(ray_count: int) -> tuple[int, int]:
    n_theta = int(math.ceil(math.sqrt(ray_count / 4)))
    return n_theta, 4 * n_theta


def launch_grid(theta_max: float, ray_count: int, phi_offset: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Midpoint theta/phi grid on the cap theta <= theta_max; returns (theta, phi, solid angle)."""
    n_theta, n_phi = _grid_shape(ray_count)
    d_theta = theta_max / n_theta
    d_phi = 2 * math.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * d_theta
    phi = phi_offset + (np.arange(n_phi) + 0.5) * d_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    d_omega = np.sin(tt) * d_theta * d_phi
    return tt.ravel(), pp.ravel(), d_omega.ravel()


def _rim_angle(placement: LensPlacement, origin: np.ndarray) -> float:
    """Polar angle from `origin` that clears the far rim of the lens."""
    reach = placement.lens.radius_r + math.hypot(origin[0], origin[1])
    depth = placement.face_z - origin[2]
    if depth <= 1e-9:
        return math.atan2(reach, placement.lens.extension_l)
    return math.atan2(reach, depth)


def _outside_power(
    placement: LensPlacement, family: RayFamily, theta_max: float
) -> tuple[float, float]:
    """(side wall, missed) power the family radiates beyond the launch cone."""
    if theta_max >= math.pi / 2:
        return 0.0, 0.0
    d_theta = (math.pi / 2 - theta_max) / OUTSIDE_CONE_SAMPLES
    d_phi = 2 * math.pi / (4 * OUTSIDE_CONE_SAMPLES)
    theta = theta_max + (np.arange(OUTSIDE_CONE_SAMPLES) + 0.5) * d_theta
    phi = (np.arange(4 * OUTSIDE_CONE_SAMPLES) + 0.5) * d_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    bundle = trace_rays(placement, family.origin, spherical_directions(tt, pp))
    booked = family.intensity(tt, pp) * np.sin(tt) * d_theta * d_phi
    # From a feed on the face these rays run into the side wall; from below it they pass the rim.
    side = float(np.sum(booked[bundle.status_code == _SIDE]))
    return side, float(np.sum(booked)) - side


def _index_derivative(values: np.ndarray, valid: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """Per-index derivative of `values` along `axis`, using valid neighbours only."""
    ahead = np.roll(values, -1, axis=axis)
    behind = np.roll(values, 1, axis=axis)
    has_ahead = np.roll(valid, -1, axis=axis) & valid
    has_behind = np.roll(valid, 1, axis=axis) & valid
    if not periodic:
        edge = [slice(None)] * valid.ndim
        edge[axis] = -1
        has_ahead[tuple(edge)] = False
        edge[axis] = 0
        has_behind[tuple(edge)] = False
    has_ahead, has_behind = has_ahead[..., None], has_behind[..., None]
    return np.where(
        has_ahead & has_behind,
        0.5 * (ahead - behind),
        np.where(has_ahead, ahead - values, np.where(has_behind, values - behind, np.nan)),
    )


def _tube_areas(bundle: RayBundle, shape: tuple[int, int]) -> np.ndarray:
    """
    Aperture area swept by each ray tube of a launch grid, from the Jacobian
    of the launch-angle to aperture-point map. NaN where no exited neighbour
    exists.
    """
    valid = bundle.exited.reshape(shape)
    xy = bundle.aperture_point.reshape(*shape, 2)
    with np.errstate(invalid="ignore"):
        along_theta = _index_derivative(xy, valid, axis=0, periodic=False)
        along_phi = _index_derivative(xy, valid, axis=1, periodic=True)
        area = np.abs(along_theta[..., 0] * along_phi[..., 1] - along_theta[..., 1] * along_phi[..., 0])
    return area.ravel()


def aperture_from_rays(
    placement: LensPlacement,
    source: Feed,
    wave: WaveSpec,
    ray_count: int = DEFAULT_RAY_COUNT,
    cell_size: float | None = None,
    phi_offset: float = 0.0,
    bundle_out: list | None = None,
) -> ApertureField:
    """
    Launch every ray family of the feed, trace it, and deposit the exit rays
    on the aperture plane.

    A ray tube carrying power P onto aperture area A has field density
    sqrt(P / A); it adds sqrt(P * A) times its phasor to the cell it lands
    in, and a cell holds the sum divided by the cell area. The cell sum of
    E * dA is then independent of the cell size.
    """
    if ray_count < MIN_RAY_COUNT:
        raise InvalidInputError(f"ray_count must be >= {MIN_RAY_COUNT}, got {ray_count}")
    if cell_size is None:
        cell_size = wave.wavelength / 4

    k = wave.wavenumber
    window = APERTURE_WINDOW_RADII * placement.lens.radius_r
    ledger = np.zeros(len(RayStatus))
    transmitted = 0.0
    traced = 0
    points, contributions = [], []
    for family in source.families(placement, wave):
        origin = family.origin
        if origin[2] > placement.face_z + 1e-9:
            raise DegenerateGeometryError(
                f"feed at z={origin[2]:.4f} mm sits above the flat face ({placement.face_z:.4f} mm)"
            )
        theta_max = min(_rim_angle(placement, origin) + SPILLOVER_MARGIN, math.pi / 2)
        theta, phi, d_omega = launch_grid(theta_max, ray_count, phi_offset)
        bundle = trace_rays(placement, origin, spherical_directions(theta, phi))
        if bundle_out is not None:
            bundle_out.append(bundle)
        traced += len(bundle)

        booked = family.intensity(theta, phi) * d_omega
        ledger += np.bincount(bundle.status_code, weights=booked, minlength=ledger.size)
        side, missed = _outside_power(placement, family, theta_max)
        ledger[_SIDE] += side
        ledger[_MISSED] += missed

        landed = bundle.exited & (np.hypot(bundle.aperture_point[:, 0], bundle.aperture_point[:, 1]) <= window)
        transmitted += float(np.sum(booked[landed] * bundle.amplitude_factor[landed] ** 2))

        tube = _tube_areas(bundle, _grid_shape(ray_count))
        ok = landed & np.isfinite(tube)
        field = family.amplitude(theta[ok], phi[ok]) * bundle.amplitude_factor[ok]
        contributions.append(
            field * np.sqrt(d_omega[ok] * tube[ok]) * np.exp(-1j * k * bundle.optical_path[ok])
        )
        points.append(bundle.aperture_point[ok])

    p_exited, p_missed, p_tir, p_side = (float(v) for v in ledger)
    total = float(ledger.sum())
    if p_exited <= 0:
        raise DegenerateGeometryError("no ray leaves the lens through the cap")

    xy = np.concatenate(points)
    contribution = np.concatenate(contributions)
    extent = max(placement.lens.radius_r, float(np.max(np.abs(xy), initial=0.0)))
    m = int(math.ceil(extent / cell_size)) + 1
    axis = np.arange(-m, m + 1) * cell_size
    ix = np.rint(xy[:, 0] / cell_size).astype(int) + m
    iy = np.rint(xy[:, 1] / cell_size).astype(int) + m
    flat = ix * axis.size + iy
    size = axis.size**2
    re = np.bincount(flat, weights=contribution.real, minlength=size)
    im = np.bincount(flat, weights=contribution.imag, minlength=size)
    cells = (re + 1j * im) / cell_size**2

    logger.debug(
        "rays=%d exited=%.4g tir=%.4g side=%.4g missed=%.4g of %.4g",
        traced, p_exited, p_tir, p_side, p_missed, total,
    )
    return ApertureField(
        plane_z=placement.aperture_z,
        cell_size=cell_size,
        x=axis,
        y=axis.copy(),
        cells=cells.reshape(axis.size, axis.size),
        power_in_rays=total,
        power_exited=p_exited,
        power_tir=p_tir,
        power_side_wall=p_side,
        power_missed=p_missed,
        power_transmitted=transmitted,
        ray_count=traced,
    )


# ──────────────────────────────────────────────────────────────────
#  Far field
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    theta: np.ndarray  # rad, (Nt,)
    phi: np.ndarray  # rad, (Np,)
    intensity: np.ndarray  # |E(theta, phi)|^2, (Nt, Np)
    directivity: np.ndarray  # linear, (Nt, Np)
    boresight_directivity_dbi: float
    peak_directivity_dbi: float
    peak_theta: float
    peak_phi: float
    spillover_efficiency: float
    transmission_efficiency: float
    aperture_efficiency: float

    @property
    def efficiency_db(self) -> float:
        return 10 * math.log10(self.spillover_efficiency * self.transmission_efficiency)

    @property
    def gain_estimate_dbi(self) -> float:
        return self.boresight_directivity_dbi + self.efficiency_db

    def gain_dbi(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.directivity) + self.efficiency_db


def far_field_from_aperture(
    aperture: ApertureField,
    wave: WaveSpec,
    theta_step: float = math.radians(0.5),
    phi_step: float = math.radians(5.0),
) -> FarFieldPattern:
    """
    Scalar aperture integration

        E(theta, phi) = sum E_cell exp(+j k (x u + y v)) dA,  u, v direction sines

    over theta in [0, 90) deg. Directivity uses the aperture identity
    4*pi*|E|^2 / (lambda^2 * sum |E_cell|^2 dA).
    """
    if aperture.cell_size > wave.wavelength / 2 * (1 + 1e-9):
        raise InvalidInputError(
            f"aperture cell {aperture.cell_size:.4f} mm exceeds lambda/2 = {wave.wavelength / 2:.4f} mm"
        )
    k = wave.wavenumber
    d_area = aperture.cell_area
    theta = np.arange(0.0, 90.0, math.degrees(theta_step))
    phi = np.arange(0.0, 360.0, math.degrees(phi_step))
    theta, phi = np.radians(theta), np.radians(phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    u = np.sin(tt) * np.cos(pp)
    v = np.sin(tt) * np.sin(pp)

    ax = np.exp(1j * k * u[..., None] * aperture.x)
    ay = np.exp(1j * k * v[..., None] * aperture.y)
    field = np.einsum("tpi,ij,tpj->tp", ax, aperture.cells, ay) * d_area
    intensity = np.abs(field) ** 2

    power = float(np.sum(np.abs(aperture.cells) ** 2)) * d_area
    if power <= 0:
        raise DegenerateGeometryError("aperture carries no power")
    directivity = 4 * math.pi * intensity / (wave.wavelength**2 * power)

    ti, pi_ = np.unravel_index(int(np.argmax(directivity)), directivity.shape)
    boresight = float(directivity[0, 0])
    filled_area = float(np.count_nonzero(aperture.cells)) * d_area
    uniform_limit = 4 * math.pi * filled_area / wave.wavelength**2
    return FarFieldPattern(
        theta=theta,
        phi=phi,
        intensity=intensity,
        directivity=directivity,
        boresight_directivity_dbi=10 * math.log10(boresight),
        peak_directivity_dbi=10 * math.log10(float(directivity[ti, pi_])),
        peak_theta=float(theta[ti]),
        peak_phi=float(phi[pi_]),
        spillover_efficiency=aperture.spillover_efficiency,
        transmission_efficiency=aperture.transmission_efficiency,
        aperture_efficiency=boresight / uniform_limit if uniform_limit > 0 else 0.0,
    )


# ──────────────────────────────────────────────────────────────────
#  Lens gain
# ──────────────────────────────────────────────────────────────────

def make_feed(antenna: Radiator, placement: LensPlacement, mode: FeedMode | str, phase_center: float) -> Feed:
    mode = FeedMode(mode)
    if mode is FeedMode.SAMPLED_FIELD:
        return SampledFieldFeed(radiator=antenna)
    if phase_center > placement.face_z + FACE_SNAP_MM:
        raise DegenerateGeometryError(
            f"point-source feed at D={phase_center:.3f} mm would sit inside the lens "
            f"(face at {placement.face_z:.3f} mm); use sampled-field mode"
        )
    z = min(phase_center, placement.face_z)
    if placement.face_z - z <= FACE_SNAP_MM:
        z = placement.face_z
    return PointSourceFeed(position=np.array([0.0, 0.0, z]), pattern=antenna.far_field)


def lens_gain(
    antenna: Radiator,
    placement: LensPlacement,
    wave: WaveSpec,
    mode: FeedMode | str = FeedMode.SAMPLED_FIELD,
    phase_center: float = 0.0,
    ray_count: int = DEFAULT_RAY_COUNT,
    cell_size: float | None = None,
    phi_offset: float = 0.0,
) -> FarFieldPattern:
    """Feed -> rays -> aperture -> far field for one lens placement."""
    feed = make_feed(antenna, placement, mode, phase_center)
    aperture = aperture_from_rays(placement, feed, wave, ray_count, cell_size, phi_offset)
    pattern = far_field_from_aperture(aperture, wave)
    logger.debug(
        "D=%.3f mm: D0=%.3f dBi spill=%.4f trans=%.4f",
        placement.d_gap, pattern.boresight_directivity_dbi,
        pattern.spillover_efficiency, pattern.transmission_efficiency,
    )
    return pattern

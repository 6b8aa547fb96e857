"""
Analytic radiator models: a rectangular microstrip patch synthesized with the
transmission-line design equations, its two-slot cavity-model pattern, and
arrays of such elements evaluated as superposed spherical waves.

The antenna lies in the z = 0 plane over an infinite ground plane, so all
fields are evaluated in the upper half-space only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.integrate import trapezoid

from .emcore import C_MM_GHZ, ComplexAmp, InvalidInputError, Vec3, WaveSpec

logger = logging.getLogger(__name__)

DEFAULT_SPACING_WAVELENGTHS = 0.7


class Radiator(Protocol):
    """Anything that can be sampled near-field and evaluated far-field."""

    wave: WaveSpec

    @property
    def element_positions(self) -> np.ndarray: ...

    @property
    def excitations(self) -> np.ndarray: ...

    def element_far_field(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray: ...

    def field_at_points(self, points: np.ndarray) -> np.ndarray: ...

    def far_field(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray: ...


# ──────────────────────────────────────────────────────────────────
#  Patch synthesis
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SubstrateSpec:
    eps_r: float
    height: float  # mm

    def __post_init__(self) -> None:
        if not self.eps_r >= 1:
            raise InvalidInputError(f"substrate eps_r must be >= 1, got {self.eps_r}")
        if not self.height > 0:
            raise InvalidInputError(f"substrate height must be > 0, got {self.height}")


@dataclass(frozen=True)
class PatchGeometry:
    width: float  # mm
    length: float  # mm
    eps_eff: float
    delta_l: float  # mm, fringing extension per radiating edge

    @property
    def effective_length(self) -> float:
        """Separation of the two radiating slots."""
        return self.length + 2 * self.delta_l


def _effective_permittivity(width: float, substrate: SubstrateSpec) -> float:
    er, h = substrate.eps_r, substrate.height
    return (er + 1) / 2 + (er - 1) / (2 * math.sqrt(1 + 12 * h / width))


def _fringing_extension(width: float, eps_eff: float, substrate: SubstrateSpec) -> float:
    h = substrate.height
    f1 = (eps_eff + 0.3) * (width / h + 0.264)
    f2 = (eps_eff - 0.258) * (width / h + 0.8)
    return 0.412 * h * f1 / f2


def synthesize_patch(wave: WaveSpec, substrate: SubstrateSpec) -> PatchGeometry:
    """Return (W, L, eps_eff, delta_L) from the transmission-line model."""
    half_wave = C_MM_GHZ / (2 * wave.frequency)
    width = half_wave * math.sqrt(2 / (substrate.eps_r + 1))
    eps_eff = _effective_permittivity(width, substrate)
    delta_l = _fringing_extension(width, eps_eff, substrate)
    length = half_wave / math.sqrt(eps_eff) - 2 * delta_l
    logger.debug("patch W=%.4f L=%.4f eps_eff=%.4f dL=%.4f mm", width, length, eps_eff, delta_l)
    return PatchGeometry(width=width, length=length, eps_eff=eps_eff, delta_l=delta_l)


def patch_from_dimensions(width: float, length: float, substrate: SubstrateSpec) -> PatchGeometry:
    """Wrap explicit W/L; eps_eff and delta_L still follow from W and the substrate."""
    if not width > 0 or not length > 0:
        raise InvalidInputError(f"patch dimensions must be positive, got W={width}, L={length}")
    eps_eff = _effective_permittivity(width, substrate)
    return PatchGeometry(
        width=width,
        length=length,
        eps_eff=eps_eff,
        delta_l=_fringing_extension(width, eps_eff, substrate),
    )


# ──────────────────────────────────────────────────────────────────
#  Element pattern
# ──────────────────────────────────────────────────────────────────

def _slot_pattern(patch: PatchGeometry, k: float, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    # Radiating edges are parallel to y; the E-plane is phi = 0.
    x = 0.5 * k * patch.width * st * np.sin(phi)
    slot = np.sinc(x / np.pi)
    pair = np.cos(0.5 * k * patch.effective_length * st * np.cos(phi))
    polar = np.sqrt(np.cos(phi) ** 2 + (np.cos(theta) * np.sin(phi)) ** 2)
    return slot * pair * polar


def element_pattern(patch: PatchGeometry, wave: WaveSpec, theta: float, phi: float) -> ComplexAmp:
    """
    Two-slot cavity-model pattern, 1 at broadside.

    The slot factor and the two-slot array factor are combined with the
    theta/phi polarization weights; the H-plane falls to zero at grazing.
    """
    if not 0 <= theta <= math.pi / 2:
        raise InvalidInputError(f"theta must lie in [0, pi/2], got {theta}")
    value = _slot_pattern(patch, wave.wavenumber, np.asarray(theta), np.asarray(phi))
    return complex(float(value))


# ──────────────────────────────────────────────────────────────────
#  Array antenna
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ArrayAntenna:
    """
    Patch elements on the z = 0 plane with fixed excitations.

    `element=None` gives isotropic elements (test sources).
    """

    element: PatchGeometry | None
    substrate: SubstrateSpec | None
    wave: WaveSpec
    element_positions: np.ndarray  # (N, 3) mm
    excitations: np.ndarray  # (N,) complex

    def __post_init__(self) -> None:
        positions = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        excitations = np.atleast_1d(np.asarray(self.excitations, dtype=complex))
        if positions.shape[1] != 3 or positions.shape[0] != excitations.shape[0]:
            raise InvalidInputError(
                f"need one excitation per position, got {positions.shape} and {excitations.shape}"
            )
        if positions.shape[0] < 1:
            raise InvalidInputError("an antenna needs at least one element")
        if np.any(positions[:, 2] != 0):
            raise InvalidInputError("all element positions must lie in the z = 0 plane")
        positions.setflags(write=False)
        excitations.setflags(write=False)
        object.__setattr__(self, "element_positions", positions)
        object.__setattr__(self, "excitations", excitations)

    @property
    def element_count(self) -> int:
        return self.element_positions.shape[0]

    def element_far_field(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """One element's pattern, without excitation or array factor."""
        if self.element is None:
            return np.ones(np.broadcast(theta, phi).shape)
        return _slot_pattern(self.element, self.wave.wavenumber, theta, phi)

    def field_at_points(self, points: np.ndarray) -> np.ndarray:
        return field_at_points(self, points)

    def far_field(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Element pattern times array factor, phase referenced to the origin."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        k = self.wave.wavenumber
        u = np.sin(theta) * np.cos(phi)
        v = np.sin(theta) * np.sin(phi)
        af = np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
        for (x, y, _), a in zip(self.element_positions, self.excitations):
            af += a * np.exp(1j * k * (x * u + y * v))
        return self.element_far_field(theta, phi) * af

    def scaled(self, factor: complex) -> "ArrayAntenna":
        return ArrayAntenna(
            element=self.element,
            substrate=self.substrate,
            wave=self.wave,
            element_positions=self.element_positions,
            excitations=self.excitations * factor,
        )


def single_patch(
    wave: WaveSpec,
    substrate: SubstrateSpec,
    patch: PatchGeometry | None = None,
) -> ArrayAntenna:
    return ArrayAntenna(
        element=patch or synthesize_patch(wave, substrate),
        substrate=substrate,
        wave=wave,
        element_positions=np.zeros((1, 3)),
        excitations=np.ones(1, dtype=complex),
    )


def array_2x2(
    wave: WaveSpec,
    substrate: SubstrateSpec,
    spacing_wavelengths: float = DEFAULT_SPACING_WAVELENGTHS,
    patch: PatchGeometry | None = None,
) -> ArrayAntenna:
    """Uniformly fed 2x2 array centred on the origin."""
    if not spacing_wavelengths > 0:
        raise InvalidInputError(f"element spacing must be positive, got {spacing_wavelengths}")
    half = 0.5 * spacing_wavelengths * wave.wavelength
    positions = np.array(
        [[-half, -half, 0.0], [half, -half, 0.0], [-half, half, 0.0], [half, half, 0.0]]
    )
    return ArrayAntenna(
        element=patch or synthesize_patch(wave, substrate),
        substrate=substrate,
        wave=wave,
        element_positions=positions,
        excitations=np.ones(4, dtype=complex),
    )


def field_at_points(antenna: ArrayAntenna, points: np.ndarray) -> np.ndarray:
    """
    Superpose each element as a point radiator with its element pattern:
    sum_i a_i * F(theta_i, phi_i) * exp(-j k r_i) / r_i.
    """
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 3)
    if np.any(flat[:, 2] <= 0):
        raise InvalidInputError("field points must lie strictly above the antenna (z > 0)")
    k = antenna.wave.wavenumber
    total = np.zeros(flat.shape[0], dtype=complex)
    for position, a in zip(antenna.element_positions, antenna.excitations):
        rel = flat - position
        r = np.linalg.norm(rel, axis=1)
        if np.any(r == 0):
            raise InvalidInputError("field point coincides with an element")
        theta = np.arccos(np.clip(rel[:, 2] / r, -1.0, 1.0))
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        total += a * antenna.element_far_field(theta, phi) * np.exp(-1j * k * r) / r
    return total.reshape(pts.shape[:-1])


def field_at_point(antenna: ArrayAntenna, point: Vec3) -> ComplexAmp:
    return complex(field_at_points(antenna, np.asarray(point, dtype=float)[None, :])[0])


# ──────────────────────────────────────────────────────────────────
#  Ideal point source
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PointSource:
    """
    Spherical wave exp(-j k r)/r from (0, 0, z0), optionally shaped by a
    real pattern of (theta, phi). Used as the analytic oracle.
    """

    wave: WaveSpec
    z0: float = 0.0
    amplitude: complex = 1.0
    pattern: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def _pattern(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        if self.pattern is None:
            return np.ones(np.broadcast(theta, phi).shape)
        return np.asarray(self.pattern(theta, phi), dtype=float)

    @property
    def element_positions(self) -> np.ndarray:
        return np.array([[0.0, 0.0, self.z0]])

    @property
    def excitations(self) -> np.ndarray:
        return np.array([self.amplitude], dtype=complex)

    def element_far_field(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        return self._pattern(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))

    def field_at_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        rel = pts - np.array([0.0, 0.0, self.z0])
        r = np.linalg.norm(rel, axis=-1)
        if np.any(r == 0):
            raise InvalidInputError("field point coincides with the source")
        theta = np.arccos(np.clip(rel[..., 2] / r, -1.0, 1.0))
        phi = np.arctan2(rel[..., 1], rel[..., 0])
        k = self.wave.wavenumber
        return self.amplitude * self._pattern(theta, phi) * np.exp(-1j * k * r) / r

    def far_field(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        shift = np.exp(1j * self.wave.wavenumber * self.z0 * np.cos(theta))
        return self.amplitude * self._pattern(theta, phi) * shift


# ──────────────────────────────────────────────────────────────────
#  Directivity
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class HemispherePattern:
    theta: np.ndarray  # rad, (Nt,)
    phi: np.ndarray  # rad, (Np,)
    directivity: np.ndarray  # linear, (Nt, Np)
    boresight_directivity_dbi: float
    peak_directivity_dbi: float


def far_field_directivity(
    antenna: Radiator,
    grid_resolution: float = math.radians(0.5),
) -> tuple[HemispherePattern, float]:
    """
    Directivity 4*pi*U/P over the upper hemisphere by trapezoidal quadrature.
    Nothing radiates below the ground plane.
    """
    if not 0 < grid_resolution <= math.radians(2.0) + 1e-12:
        raise InvalidInputError(
            f"grid_resolution must be in (0, 2 deg], got {math.degrees(grid_resolution):.3f} deg"
        )
    n_theta = int(math.ceil((math.pi / 2) / grid_resolution)) + 1
    n_phi = int(math.ceil((2 * math.pi) / grid_resolution)) + 1
    theta = np.linspace(0.0, math.pi / 2, n_theta)
    phi = np.linspace(0.0, 2 * math.pi, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")

    intensity = np.abs(antenna.far_field(tt, pp)) ** 2
    radiated = trapezoid(trapezoid(intensity * np.sin(tt), phi, axis=1), theta)
    directivity = 4 * math.pi * intensity / radiated

    boresight = float(np.mean(directivity[0]))
    peak = float(directivity.max())
    logger.debug("hemisphere quadrature %dx%d: D0=%.4f", n_theta, n_phi, boresight)
    pattern = HemispherePattern(
        theta=theta,
        phi=phi,
        directivity=directivity,
        boresight_directivity_dbi=10 * math.log10(boresight),
        peak_directivity_dbi=10 * math.log10(peak),
    )
    return pattern, pattern.boresight_directivity_dbi

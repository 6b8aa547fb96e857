"""
Wave constants, geometry helpers, refraction physics and phase unwrapping
shared by the other lensforge modules.

Units: lengths in mm, angles in radians, frequencies in GHz.
All functions are pure; nothing here holds state.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.constants import c as _C_M_PER_S

logger = logging.getLogger(__name__)

# Speed of light in mm/ns, i.e. mm * GHz.
C_MM_GHZ = _C_M_PER_S * 1e-6

UNIT_TOLERANCE = 1e-9

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

# Points (mm) and directions are plain float arrays of shape (3,) or (N, 3).
Vec3 = np.ndarray
ComplexAmp = complex


class InvalidInputError(ValueError):
    """A precondition of a lensforge operation was violated."""


class TotalInternalReflection(ArithmeticError):
    """The ray cannot leave the denser medium at this incidence angle."""


# ──────────────────────────────────────────────────────────────────
#  Wave constants
# ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class WaveSpec:
    frequency: float  # GHz
    wavelength: float  # mm
    wavenumber: float  # rad/mm


def wave_from_frequency(frequency: float) -> WaveSpec:
    """Build the lambda / k context for a frequency in GHz."""
    if not frequency > 0 or not math.isfinite(frequency):
        raise InvalidInputError(f"frequency must be positive, got {frequency!r} GHz")
    wavelength = C_MM_GHZ / frequency
    return WaveSpec(
        frequency=float(frequency),
        wavelength=wavelength,
        wavenumber=2 * math.pi / wavelength,
    )


# ──────────────────────────────────────────────────────────────────
#  Geometry
# ──────────────────────────────────────────────────────────────────

def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def spherical_directions(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Unit vectors for polar angle theta (from +z) and azimuth phi."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _require_unit(name: str, v: np.ndarray) -> None:
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        raise InvalidInputError(f"{name} must be a unit vector, got norm {norm:.12g}")


# ──────────────────────────────────────────────────────────────────
#  Refraction
# ──────────────────────────────────────────────────────────────────

def refract_directions(
    directions: np.ndarray,
    normals: np.ndarray,
    n_in: float,
    n_out: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Vector Snell's law for a batch of rays.

    Normals may point either way; they are flipped per ray to lie on the
    transmission side. Returns (transmitted directions, tir mask); rows with
    total internal reflection are zero.
    """
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    m = np.atleast_2d(np.asarray(normals, dtype=float))
    cos_i = np.einsum("ij,ij->i", d, m)
    flip = cos_i < 0
    m = np.where(flip[:, None], -m, m)
    cos_i = np.abs(cos_i)

    eta = n_in / n_out
    k = 1.0 - eta**2 * (1.0 - cos_i**2)
    tir = k < 0
    root = np.sqrt(np.where(tir, 0.0, k))
    t = eta * d + (root - eta * cos_i)[:, None] * m
    t = t / np.linalg.norm(t, axis=1, keepdims=True)
    t[tir] = 0.0
    return t, tir


def snell_refract(
    incident: Vec3,
    surface_normal: Vec3,
    n_in: float,
    n_out: float,
) -> Vec3:
    """Refract one unit direction; raises TotalInternalReflection past the critical angle."""
    incident = np.asarray(incident, dtype=float)
    surface_normal = np.asarray(surface_normal, dtype=float)
    _require_unit("incident", incident)
    _require_unit("surface_normal", surface_normal)
    if n_in < 1 or n_out < 1:
        raise InvalidInputError(f"refractive indices must be >= 1, got {n_in}, {n_out}")
    t, tir = refract_directions(incident, surface_normal, n_in, n_out)
    if tir[0]:
        raise TotalInternalReflection(
            f"n_in*sin(theta_in)/n_out exceeds 1 for n_in={n_in}, n_out={n_out}"
        )
    return t[0]


class FresnelCoefficients(NamedTuple):
    t_perp: float
    t_par: float
    power_transmittance: float
    reflectance: float
    r_perp: float
    r_par: float


def fresnel_transmission(theta_in: float, n_in: float, n_out: float) -> FresnelCoefficients:
    """Fresnel amplitude coefficients and unpolarized power transmittance."""
    if not 0 <= theta_in <= math.pi / 2:
        raise InvalidInputError(f"theta_in must lie in [0, pi/2], got {theta_in}")
    sin_t = n_in / n_out * math.sin(theta_in)
    if sin_t > 1:
        raise TotalInternalReflection(
            f"theta_in={math.degrees(theta_in):.4f} deg is beyond the critical angle"
        )
    cos_i = math.cos(theta_in)
    cos_t = math.sqrt(1.0 - sin_t**2)

    r_perp = (n_in * cos_i - n_out * cos_t) / (n_in * cos_i + n_out * cos_t)
    r_par = (n_out * cos_i - n_in * cos_t) / (n_out * cos_i + n_in * cos_t)
    t_perp = 2 * n_in * cos_i / (n_in * cos_i + n_out * cos_t)
    t_par = 2 * n_in * cos_i / (n_out * cos_i + n_in * cos_t)
    reflectance = 0.5 * (r_perp**2 + r_par**2)
    return FresnelCoefficients(
        t_perp=t_perp,
        t_par=t_par,
        power_transmittance=1.0 - reflectance,
        reflectance=reflectance,
        r_perp=r_perp,
        r_par=r_par,
    )


def unpolarized_transmittance(cos_i: np.ndarray, n_in: float, n_out: float) -> np.ndarray:
    """Vectorized unpolarized power transmittance; TIR rows give 0."""
    cos_i = np.clip(np.abs(np.asarray(cos_i, dtype=float)), 0.0, 1.0)
    sin_t2 = (n_in / n_out) ** 2 * (1.0 - cos_i**2)
    tir = sin_t2 > 1
    cos_t = np.sqrt(np.clip(1.0 - sin_t2, 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        r_perp = (n_in * cos_i - n_out * cos_t) / (n_in * cos_i + n_out * cos_t)
        r_par = (n_out * cos_i - n_in * cos_t) / (n_out * cos_i + n_in * cos_t)
    transmittance = 1.0 - 0.5 * (r_perp**2 + r_par**2)
    return np.where(tir | ~np.isfinite(transmittance), 0.0, transmittance)


# ──────────────────────────────────────────────────────────────────
#  Phase unwrapping
# ──────────────────────────────────────────────────────────────────

def _unwrap_from(values: np.ndarray, start: int, axis: int = 0) -> np.ndarray:
    """Unwrap outward from index `start` along `axis`; the start sample is kept."""
    values = np.moveaxis(values, axis, 0)
    out = np.empty_like(values)
    out[start:] = np.unwrap(values[start:], axis=0)
    out[: start + 1] = np.unwrap(values[: start + 1][::-1], axis=0)[::-1]
    return np.moveaxis(out, 0, axis)


def unwrap_phase_radial(
    wrapped: np.ndarray,
    center: tuple[int, int] | int | None = None,
) -> np.ndarray:
    """
    Unwrap a phase grid outward from a center sample.

    2-D grids are unwrapped along the center row in both directions, then
    along every column starting from that row. Correct whenever the true
    neighbour steps stay below pi.
    """
    wrapped = np.asarray(wrapped, dtype=float)
    if wrapped.ndim == 1:
        ci = wrapped.shape[0] // 2 if center is None else int(center)
        return _unwrap_from(wrapped, ci)
    if wrapped.ndim != 2:
        raise InvalidInputError(f"phase grid must be 1-D or 2-D, got shape {wrapped.shape}")

    rows, cols = wrapped.shape
    ci, cj = (rows // 2, cols // 2) if center is None else center
    seeded = wrapped.copy()
    seeded[ci] = _unwrap_from(wrapped[ci], cj)
    return _unwrap_from(seeded, ci, axis=0)


# ──────────────────────────────────────────────────────────────────
#  1-D refinement
# ──────────────────────────────────────────────────────────────────

def golden_section_minimize(
    func: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-5,
) -> tuple[float, float]:
    """
    Golden-section search on [a, b].

    Assumes a single local minimum inside the interval and returns
    (x, func(x)) with x within `tol` of it.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, func(x)

    # Required steps to achieve tolerance
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = func(c)
    yd = func(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = func(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = func(d)

    logger.debug("golden section converged on [%.6g, %.6g] after %d steps", a, b, n)
    return (c, yc) if yc < yd else (d, yd)

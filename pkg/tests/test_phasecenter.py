"""Tests for phasecenter.py – probe plane, phase functional, minimum search."""
import math

import numpy as np
import pytest

from lensforge.emcore import InvalidInputError, wave_from_frequency
from lensforge.phasecenter import (
    build_plane,
    find_phase_center,
    locate_minimum,
    max_phase_error,
    phase_error_curve,
    phase_function_S,
    sample_phase,
    scan_grid,
    scan_phase_function,
)
from lensforge.radiators import PointSource, SubstrateSpec, array_2x2, element_pattern, single_patch

WAVE = wave_from_frequency(30.2)
SUBSTRATE = SubstrateSpec(eps_r=2.2, height=0.127)

_RNG = np.random.default_rng(20240302)
RANDOM_Z0 = [float(z) for z in _RNG.uniform(-10.0, 10.0, size=20)]


def _count_disk_points(grid_n: int, radius: float) -> int:
    step = 2 * radius / (grid_n - 1)
    half = grid_n // 2
    count = 0
    for i in range(-half, half + 1):
        for j in range(-half, half + 1):
            if (i * step) ** 2 + (j * step) ** 2 <= radius**2 * (1 + 1e-9) ** 2:
                count += 1
    return count


# ── Probe plane ────────────────────────────────────────────────

class TestBuildPlane:
    def test_default_geometry(self):
        plane = build_plane(WAVE)
        assert plane.z_plane == pytest.approx(10 * WAVE.wavelength)
        assert plane.radius == pytest.approx(plane.z_plane * math.tan(math.radians(22.5)))
        assert plane.axis[plane.center_index] == 0.0

    def test_point_count_matches_disk_lattice(self):
        plane = build_plane(WAVE, grid_n=41)
        assert len(plane.points) == _count_disk_points(41, plane.radius)
        assert len(plane.points) == int(plane.mask.sum())

    def test_point_count_independent_of_delta_theta(self):
        a = build_plane(WAVE, delta_theta=math.radians(10), grid_n=31)
        b = build_plane(WAVE, delta_theta=math.radians(30), grid_n=31)
        assert len(a.points) == len(b.points)

    def test_all_points_inside_cone(self):
        plane = build_plane(WAVE, grid_n=25)
        rho = np.hypot(plane.points[:, 0], plane.points[:, 1])
        assert np.all(np.arctan2(rho, plane.z_plane) <= plane.delta_theta + 1e-9)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"grid_n": 40},
            {"grid_n": 11},
            {"delta_theta": 0.0},
            {"delta_theta": math.pi / 2},
            {"z_plane": -5.0},
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(InvalidInputError):
            build_plane(WAVE, **kwargs)


def test_scan_grid_includes_both_ends():
    grid = scan_grid(-30.0, 30.0, 0.2)
    assert len(grid) == 301
    assert grid[0] == -30.0
    assert grid[-1] == pytest.approx(30.0)


def test_scan_grid_rejects_empty_range():
    with pytest.raises(InvalidInputError):
        scan_grid(1.0, 1.0, 0.1)


# ── Point-source oracle ────────────────────────────────────────

class TestPointSourceOracle:
    @pytest.mark.parametrize("z0", RANDOM_Z0)
    def test_recovers_source_height(self, z0):
        plane = build_plane(WAVE)
        result = find_phase_center(PointSource(WAVE, z0=z0), plane)
        assert abs(result.d_star - z0) <= 0.01
        measured = sample_phase(PointSource(WAVE, z0=z0), plane)
        assert phase_function_S(measured, z0) < 1e-12
        assert result.well_formed

    def test_s_curve_is_sorted_and_minimal_near_source(self):
        plane = build_plane(WAVE)
        result = find_phase_center(PointSource(WAVE, z0=3.0), plane, -5.0, 5.0, 0.5)
        ds = [d for d, _ in result.s_curve]
        assert ds == sorted(ds)
        assert result.s_star <= min(s for _, s in result.s_curve)

    def test_phase_offset_and_amplitude_do_not_matter(self):
        plane = build_plane(WAVE)
        src = PointSource(WAVE, z0=-4.0, amplitude=3.0 * np.exp(1j * 2.2))
        result = find_phase_center(src, plane, -10.0, 10.0, 0.5)
        assert result.d_star == pytest.approx(-4.0, abs=0.01)

    @pytest.mark.parametrize("circular,weighted", [(True, False), (False, True), (True, True)])
    def test_variants_recover_source(self, circular, weighted):
        plane = build_plane(WAVE)
        result = find_phase_center(
            PointSource(WAVE, z0=6.5), plane, 0.0, 10.0, 0.5, circular=circular, weighted=weighted
        )
        assert result.d_star == pytest.approx(6.5, abs=0.01)

    def test_error_curve_zero_at_source(self):
        plane = build_plane(WAVE)
        measured = sample_phase(PointSource(WAVE, z0=2.0), plane)
        errors = phase_error_curve(measured, np.array([-2.0, 2.0, 6.0]))
        assert errors[1] == pytest.approx(0.0, abs=1e-6)
        assert errors[0] > 1.0 and errors[2] > 1.0
        assert max_phase_error(measured, 2.0) == pytest.approx(errors[1], abs=1e-9)

    def test_scan_matches_pointwise(self):
        plane = build_plane(WAVE)
        measured = sample_phase(PointSource(WAVE, z0=1.0), plane)
        d = np.array([-1.0, 0.0, 2.5])
        scanned = scan_phase_function(measured, d)
        assert scanned == pytest.approx([phase_function_S(measured, x) for x in d])

    def test_candidate_above_plane_rejected(self):
        plane = build_plane(WAVE)
        measured = sample_phase(PointSource(WAVE), plane)
        with pytest.raises(InvalidInputError):
            phase_function_S(measured, plane.z_plane + 1.0)

    def test_scan_range_above_plane_rejected(self):
        plane = build_plane(WAVE)
        with pytest.raises(InvalidInputError):
            find_phase_center(PointSource(WAVE), plane, 0.0, plane.z_plane)


# ── Patch radiators ────────────────────────────────────────────

class TestPatchPhaseCenter:
    def test_single_patch_centre_on_surface(self):
        result = find_phase_center(single_patch(WAVE, SUBSTRATE), build_plane(WAVE))
        assert abs(result.d_star) < 0.05
        assert result.well_formed

    def test_array_front_is_well_formed_and_near_surface(self):
        result = find_phase_center(array_2x2(WAVE, SUBSTRATE), build_plane(WAVE))
        assert result.well_formed
        assert abs(result.d_star) < 2.0
        assert result.max_phase_error_deg < 22.5

    def test_locate_minimum_on_shifted_grid(self):
        plane = build_plane(WAVE)
        measured = sample_phase(PointSource(WAVE, z0=0.37), plane)
        result = locate_minimum(measured, np.arange(-2.0, 2.01, 0.25))
        assert result.d_star == pytest.approx(0.37, abs=0.01)

    def test_plane_height_robustness(self):
        source = PointSource(WAVE, z0=2.5)
        heights = [8 * WAVE.wavelength, 10 * WAVE.wavelength, 15 * WAVE.wavelength]
        found = [find_phase_center(source, build_plane(WAVE, z_plane=z)).d_star for z in heights]
        assert max(found) - min(found) <= 0.02
        assert found[1] == pytest.approx(2.5, abs=0.01)

    def test_array_amplitudes_strictly_positive(self):
        measured = sample_phase(array_2x2(WAVE, SUBSTRATE), build_plane(WAVE))
        assert np.all(measured.amplitude > 0)

    def test_array_centre_sample_is_four_term_sum(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        plane = build_plane(WAVE)
        measured = sample_phase(antenna, plane)
        centre = int(np.flatnonzero((plane.points[:, 0] == 0.0) & (plane.points[:, 1] == 0.0))[0])
        k = WAVE.wavenumber
        total = 0j
        for (x, y, _), a in zip(antenna.element_positions, antenna.excitations):
            r = math.sqrt(x * x + y * y + plane.z_plane**2)
            theta = math.acos(plane.z_plane / r)
            phi = math.atan2(-y, -x)
            total += a * element_pattern(antenna.element, WAVE, theta, phi) * np.exp(-1j * k * r) / r
        assert measured.amplitude[centre] == pytest.approx(abs(total), rel=1e-12)

"""Tests for lens.py – synthesis, ray tracing, aperture deposition, far field."""
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lensforge.emcore import InvalidInputError, snell_refract, spherical_directions, vec3, wave_from_frequency
from lensforge.lens import (
    DegenerateGeometryError,
    FeedMode,
    LensPlacement,
    LensShape,
    PointSourceFeed,
    RayStatus,
    SampledFieldFeed,
    aperture_from_rays,
    elliptical_lens,
    far_field_from_aperture,
    launch_grid,
    lens_gain,
    make_feed,
    synthesize_lens,
    theoretical_max_gain,
    trace_ray,
    trace_rays,
    uniform_aperture,
)
from lensforge.radiators import ArrayAntenna, SubstrateSpec, array_2x2, far_field_directivity, single_patch

WAVE = wave_from_frequency(30.2)
SUBSTRATE = SubstrateSpec(eps_r=2.2, height=0.127)
R = 17.27
EPS = 2.4


def _uniform(theta, phi):
    return np.ones(np.broadcast(theta, phi).shape)


def _direction(theta_deg: float, phi_deg: float = 0.0) -> np.ndarray:
    return spherical_directions(math.radians(theta_deg), math.radians(phi_deg))


def _meridian_exit_angle(theta: float, n: float, radius: float, extension: float) -> float:
    """Exit angle from the axis for a face-centre ray in the x-z plane, by plane trigonometry."""
    dx, dz = math.sin(theta), math.cos(theta)
    # |(t dx, t dz - L)| = radius
    b = -2 * extension * dz
    c = extension**2 - radius**2
    t = (-b + math.sqrt(b * b - 4 * c)) / 2
    x, z = t * dx, t * dz - extension
    normal_angle = math.atan2(x, z)
    incidence = theta - normal_angle
    refracted = math.asin(n * math.sin(incidence))
    return normal_angle + refracted


# ── Synthesis ──────────────────────────────────────────────────

class TestSynthesizeLens:
    def test_reference_design(self):
        lens = synthesize_lens(R, EPS)
        n = math.sqrt(EPS)
        b = R * (1 + 1 / (3 * n * n))
        length = b * (1 + 1 / n) / math.sqrt(1 - 1 / (n * n)) - R
        assert lens.n == pytest.approx(n, abs=1e-12)
        assert lens.b == pytest.approx(b, abs=1e-9)
        assert lens.extension_l == pytest.approx(length, abs=1e-9)
        assert lens.b == pytest.approx(19.669, abs=1e-3)
        assert lens.extension_l == pytest.approx(25.11, abs=0.01)
        assert lens.shape is LensShape.EXTENDED_HEMISPHERICAL

    def test_measured_prototype_extension_is_not_the_closed_form(self):
        # The fabricated lens used 24.15 mm; the closed form gives ~25.11 mm.
        assert abs(synthesize_lens(R, EPS).extension_l - 24.15) > 0.5

    def test_scales_linearly_with_radius(self):
        a = synthesize_lens(R, EPS)
        b = synthesize_lens(2 * R, EPS)
        assert b.b == pytest.approx(2 * a.b, rel=1e-12)
        assert b.extension_l == pytest.approx(2 * a.extension_l, rel=1e-12)

    def test_dense_dielectric_limit(self):
        lens = synthesize_lens(R, 1e8)
        assert lens.b == pytest.approx(R, rel=1e-6)
        assert lens.extension_l < 0.01 * R

    def test_explicit_extension(self):
        assert synthesize_lens(R, EPS, extension_l=24.15).extension_l == 24.15

    @pytest.mark.parametrize("radius,eps_r", [(R, 1.0), (R, 0.5), (0.0, EPS)])
    def test_rejects_bad_inputs(self, radius, eps_r):
        with pytest.raises(InvalidInputError):
            synthesize_lens(radius, eps_r)

    def test_elliptical_focus_on_face(self):
        lens = elliptical_lens(R, EPS)
        # distance from the ellipse centre to its focus equals the extension
        assert math.sqrt(lens.cap_height**2 - R**2) == pytest.approx(lens.extension_l)


class TestTheoreticalMaxGain:
    def test_reference_design(self):
        assert theoretical_max_gain(synthesize_lens(R, EPS), WAVE) == pytest.approx(20.77, abs=0.01)

    def test_unit_electrical_circumference(self):
        lens = synthesize_lens(WAVE.wavelength / (2 * math.pi), EPS)
        assert theoretical_max_gain(lens, WAVE) == pytest.approx(0.0, abs=1e-12)

    def test_doubling_radius(self):
        small = theoretical_max_gain(synthesize_lens(R, EPS), WAVE)
        large = theoretical_max_gain(synthesize_lens(2 * R, EPS), WAVE)
        assert large - small == pytest.approx(20 * math.log10(2))


# ── Ray tracing ────────────────────────────────────────────────

class TestTraceRay:
    def test_axial_ray_from_face_centre(self):
        lens = synthesize_lens(R, EPS)
        placement = LensPlacement(lens, 0.0)
        ray = trace_ray(placement, vec3(0, 0, 0), vec3(0, 0, 1))
        assert ray.status is RayStatus.EXITED
        assert np.allclose(ray.exit_direction, [0, 0, 1])
        assert np.allclose(ray.exit_point, [0, 0, lens.extension_l + R])
        assert ray.optical_path == pytest.approx(lens.n * (lens.extension_l + R), abs=1e-9)
        assert 0 < ray.amplitude_factor <= 1

    def test_axial_ray_through_air_gap(self):
        lens = synthesize_lens(R, EPS)
        placement = LensPlacement(lens, 3.0)
        ray = trace_ray(placement, vec3(0, 0, -1.0), vec3(0, 0, 1))
        expected = 4.0 + lens.n * (lens.extension_l + R)
        assert ray.optical_path == pytest.approx(expected, abs=1e-9)
        t = 1 - ((lens.n - 1) / (lens.n + 1)) ** 2
        assert ray.amplitude_factor == pytest.approx(t)

    def test_rejects_downward_launch(self):
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        with pytest.raises(InvalidInputError):
            trace_ray(placement, vec3(0, 0, 0), vec3(1, 0, 0))

    def test_rejects_source_above_face(self):
        placement = LensPlacement(synthesize_lens(R, EPS), 1.0)
        with pytest.raises(InvalidInputError):
            trace_ray(placement, vec3(0, 0, 2.0), vec3(0, 0, 1))

    def test_rejects_negative_separation(self):
        with pytest.raises(InvalidInputError):
            LensPlacement(synthesize_lens(R, EPS), -0.5)

    def test_side_wall(self):
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        ray = trace_ray(placement, vec3(0, 0, 0), _direction(60.0))
        assert ray.status is RayStatus.SIDE_WALL
        assert ray.exit_point is None

    def test_spillover_missed(self):
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        ray = trace_ray(placement, vec3(0, 0, -50.0), _direction(45.0))
        assert ray.status is RayStatus.SPILLOVER_MISSED

    def test_total_internal_reflection(self):
        placement = LensPlacement(synthesize_lens(R, EPS, extension_l=1.0), 0.0)
        ray = trace_ray(placement, vec3(15.0, 0, 0), vec3(0, 0, 1))
        assert ray.status is RayStatus.TOTAL_INTERNAL_REFLECTION
        assert ray.amplitude_factor == 0.0


class TestHemisphericalLens:
    @pytest.mark.parametrize("theta_deg", [2.0, 5.0, 10.0, 15.0, 20.0])
    def test_matches_meridian_construction(self, theta_deg):
        lens = synthesize_lens(R, EPS)
        ray = trace_ray(LensPlacement(lens, 0.0), vec3(0, 0, 0), _direction(theta_deg))
        exit_angle = math.atan2(ray.exit_direction[0], ray.exit_direction[2])
        expected = _meridian_exit_angle(math.radians(theta_deg), lens.n, R, lens.extension_l)
        assert exit_angle == pytest.approx(expected, abs=1e-9)

    def test_near_collimation_from_face_centre(self):
        lens = synthesize_lens(R, EPS)
        theta = np.radians(np.linspace(1.0, 20.0, 20))
        phi = np.radians(np.arange(0.0, 360.0, 30.0))
        tt, pp = np.meshgrid(theta, phi)
        bundle = trace_rays(LensPlacement(lens, 0.0), vec3(0, 0, 0), spherical_directions(tt.ravel(), pp.ravel()))
        assert bundle.exited.all()
        off_axis = np.degrees(np.arccos(np.clip(bundle.exit_direction[:, 2], -1, 1)))
        assert off_axis.max() < 5.0

    def test_reciprocity(self):
        lens = synthesize_lens(R, EPS)
        placement = LensPlacement(lens, 2.0)
        d0 = _direction(25.0, 40.0)
        ray = trace_ray(placement, vec3(0, 0, 0), d0)
        assert ray.status is RayStatus.EXITED
        normal = (ray.exit_point - np.array([0, 0, placement.center_z])) / R
        d1_back = snell_refract(-ray.exit_direction, normal, 1.0, lens.n)
        d0_back = snell_refract(d1_back, vec3(0, 0, 1), lens.n, 1.0)
        assert np.allclose(d0_back, -d0, atol=1e-9)


class TestEllipticalLens:
    def test_collimation_from_focus(self):
        lens = elliptical_lens(R, EPS)
        rim = math.atan2(R, lens.extension_l)
        theta = np.linspace(0.01, 0.98 * rim, 40)
        phi = np.radians(np.arange(0.0, 360.0, 15.0))
        tt, pp = np.meshgrid(theta, phi)
        bundle = trace_rays(LensPlacement(lens, 0.0), vec3(0, 0, 0), spherical_directions(tt.ravel(), pp.ravel()))
        exited = bundle.exited
        assert exited.mean() > 0.9
        tilt = np.arccos(np.clip(bundle.exit_direction[exited, 2], -1, 1))
        assert tilt.max() < 1e-6

    def test_equal_optical_path(self):
        lens = elliptical_lens(R, EPS)
        bundle = trace_rays(
            LensPlacement(lens, 0.0), vec3(0, 0, 0), spherical_directions(np.linspace(0.0, 0.6, 25), 0.3)
        )
        paths = bundle.optical_path[bundle.exited]
        assert np.ptp(paths) < 1e-9
        assert paths[0] == pytest.approx(lens.n * (lens.extension_l + lens.cap_height))


def test_launch_grid_solid_angle():
    theta, phi, d_omega = launch_grid(math.pi / 2, 40_000)
    assert theta.size == phi.size == d_omega.size
    assert d_omega.sum() == pytest.approx(2 * math.pi, rel=1e-3)
    assert theta.max() < math.pi / 2


# ── Aperture ───────────────────────────────────────────────────

class TestApertureFromRays:
    def test_energy_ledger(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 2.0)
        ap = aperture_from_rays(placement, SampledFieldFeed(antenna), WAVE, ray_count=10_000)
        buckets = [ap.power_exited, ap.power_tir, ap.power_side_wall, ap.power_missed]
        assert all(b >= 0 for b in buckets)
        assert sum(buckets) == pytest.approx(ap.power_in_rays, rel=1e-9)
        assert 0 < ap.spillover_efficiency <= 1
        assert 0 < ap.transmission_efficiency <= 1
        assert ap.power_transmitted <= ap.power_exited
        assert ap.ray_count == 4 * 50 * 200

    def test_sampled_ledger_books_hemispherical_power(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        ap = aperture_from_rays(placement, SampledFieldFeed(antenna), WAVE, ray_count=10_000)
        theta = np.linspace(0.0, math.pi / 2, 181)
        phi = np.linspace(0.0, 2 * math.pi, 721)
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        radiated = trapezoid(trapezoid(np.abs(antenna.far_field(tt, pp)) ** 2 * np.sin(tt), phi, axis=1), theta)
        assert ap.power_in_rays == pytest.approx(radiated, rel=5e-3)

    def test_point_source_cells_hold_transmitted_power(self):
        antenna = single_patch(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 2.0)
        feed = make_feed(antenna, placement, FeedMode.POINT_SOURCE, 0.0)
        ap = aperture_from_rays(placement, feed, WAVE, ray_count=20_000)
        power = float(np.sum(np.abs(ap.cells) ** 2)) * ap.cell_area
        assert 0.8 * ap.power_transmitted < power < 1.1 * ap.power_transmitted

    def test_boresight_sum_ignores_cell_size(self):
        antenna = single_patch(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 2.0)
        feed = make_feed(antenna, placement, FeedMode.POINT_SOURCE, 0.0)
        coarse = aperture_from_rays(placement, feed, WAVE, ray_count=10_000, cell_size=WAVE.wavelength / 4)
        fine = aperture_from_rays(placement, feed, WAVE, ray_count=10_000, cell_size=WAVE.wavelength / 8)
        a = coarse.cells.sum() * coarse.cell_area
        b = fine.cells.sum() * fine.cell_area
        assert b == pytest.approx(a, rel=1e-9)

    def test_rejects_too_few_rays(self):
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        feed = PointSourceFeed(vec3(0, 0, 0), _uniform)
        with pytest.raises(InvalidInputError):
            aperture_from_rays(placement, feed, WAVE, ray_count=500)

    def test_feed_on_face_books_outside_cone_as_side_wall(self):
        lens = synthesize_lens(R, EPS)
        feed = PointSourceFeed(vec3(0, 0, 0), _uniform)
        ap = aperture_from_rays(LensPlacement(lens, 0.0), feed, WAVE, ray_count=10_000)
        theta_max = math.atan2(R, lens.extension_l) + math.radians(5.0)
        outside = 2 * math.pi * math.cos(theta_max)
        assert ap.power_side_wall >= 0.999 * outside
        assert ap.power_missed < 0.01 * outside

    def test_feed_below_face_books_outside_cone_as_missed(self):
        lens = synthesize_lens(R, EPS)
        feed = PointSourceFeed(vec3(0, 0, 0), _uniform)
        ap = aperture_from_rays(LensPlacement(lens, 10.0), feed, WAVE, ray_count=10_000)
        theta_max = math.atan2(R, 10.0) + math.radians(5.0)
        assert ap.power_missed >= 0.999 * 2 * math.pi * math.cos(theta_max)

    def test_elliptical_focus_gives_flat_phase(self):
        lens = elliptical_lens(R, EPS)
        feed = PointSourceFeed(vec3(0, 0, 0), _uniform)
        ap = aperture_from_rays(LensPlacement(lens, 0.0), feed, WAVE, ray_count=20_000)
        filled = np.abs(ap.cells) > 0
        centre = ap.cells[ap.x.size // 2, ap.y.size // 2]
        deviation = np.degrees(np.abs(np.angle(ap.cells[filled] * np.conj(centre))))
        assert deviation.max() < 5.0

    def test_defocus_is_quadratic_and_positive(self):
        lens = elliptical_lens(R, EPS)
        placement = LensPlacement(lens, 3.0)
        source = vec3(0, 0, 0)
        bundle = trace_rays(placement, source, spherical_directions(np.linspace(0.01, 0.5, 40), 0.0))
        ok = bundle.exited
        rho = bundle.aperture_point[ok, 0]
        phase = -WAVE.wavenumber * bundle.optical_path[ok]
        keep = np.abs(rho) < 0.7 * R
        coeffs = np.polyfit(rho[keep] ** 2, phase[keep], 1)
        assert coeffs[0] > 0

    def test_sampled_feed_launches_from_every_element(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        families = SampledFieldFeed(antenna).families(placement, WAVE)
        origins = np.array([f.origin for f in families])
        assert origins[:, :2] == pytest.approx(antenna.element_positions[:, :2])
        assert origins[:, 2] == pytest.approx(np.full(4, -WAVE.wavelength / 50))

    def test_sampled_feed_carries_element_terms(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 3.0)
        families = SampledFieldFeed(antenna).families(placement, WAVE)
        family = families[1]
        assert family.origin == pytest.approx(antenna.element_positions[1])
        # The ray amplitude times the spherical spreading is that element's share of field_at_points.
        r = 40.0
        theta, phi = 0.3, 1.1
        point = family.origin + r * _direction(math.degrees(theta), math.degrees(phi))
        single = ArrayAntenna(
            antenna.element, antenna.substrate, WAVE, antenna.element_positions[1:2], antenna.excitations[1:2]
        )
        expected = single.field_at_points(point[None, :])[0] * r * np.exp(1j * WAVE.wavenumber * r)
        assert complex(family.amplitude(np.array(theta), np.array(phi))) == pytest.approx(expected, rel=1e-9)


# ── Far field ──────────────────────────────────────────────────

class TestFarFieldFromAperture:
    def test_uniform_disk(self):
        ap = uniform_aperture(WAVE.wavelength / 10, radius=R)
        pattern = far_field_from_aperture(ap, WAVE)
        assert pattern.boresight_directivity_dbi == pytest.approx(20.77, abs=0.2)
        assert pattern.aperture_efficiency == pytest.approx(1.0, abs=1e-9)

    def test_airy_first_sidelobe(self):
        ap = uniform_aperture(WAVE.wavelength / 10, radius=R)
        pattern = far_field_from_aperture(ap, WAVE, theta_step=math.radians(0.1), phi_step=math.radians(90))
        cut = pattern.directivity[:, 0]
        i = 1
        while cut[i + 1] < cut[i]:
            i += 1
        while cut[i + 1] > cut[i]:
            i += 1
        sidelobe = 10 * math.log10(cut[i] / cut[0])
        assert sidelobe == pytest.approx(-17.6, abs=0.5)

    def test_uniform_square(self):
        cell = WAVE.wavelength / 10
        side = 20 * cell
        ap = uniform_aperture(cell, side=side)
        pattern = far_field_from_aperture(ap, WAVE)
        expected = 10 * math.log10(4 * math.pi * side**2 / WAVE.wavelength**2)
        assert pattern.boresight_directivity_dbi == pytest.approx(expected, abs=0.2)

    def test_phase_ramp_squints_beam(self):
        squint = math.radians(10.0)
        flat = far_field_from_aperture(uniform_aperture(WAVE.wavelength / 4, radius=R), WAVE)
        ramp = uniform_aperture(WAVE.wavelength / 4, radius=R, phase_slope_x=WAVE.wavenumber * math.sin(squint))
        pattern = far_field_from_aperture(ramp, WAVE)
        assert pattern.peak_theta == pytest.approx(squint, abs=math.radians(0.5))
        assert pattern.peak_phi == pytest.approx(0.0)
        assert pattern.peak_directivity_dbi == pytest.approx(flat.boresight_directivity_dbi, abs=0.1)

    def test_rejects_coarse_cells(self):
        with pytest.raises(InvalidInputError):
            far_field_from_aperture(uniform_aperture(WAVE.wavelength, radius=R), WAVE)

    def test_uniform_aperture_needs_one_shape(self):
        with pytest.raises(InvalidInputError):
            uniform_aperture(1.0)


# ── Lens gain ──────────────────────────────────────────────────

class TestLensGain:
    def test_lens_raises_array_gain(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        lens = synthesize_lens(R, EPS)
        _, no_lens = far_field_directivity(antenna)
        pattern = lens_gain(antenna, LensPlacement(lens, 2.0), WAVE, FeedMode.SAMPLED_FIELD, 0.0, ray_count=10_000)
        assert pattern.gain_estimate_dbi > no_lens
        assert pattern.gain_estimate_dbi < theoretical_max_gain(lens, WAVE) + 0.5
        assert pattern.gain_estimate_dbi <= pattern.boresight_directivity_dbi

    def test_point_source_mode(self):
        antenna = single_patch(WAVE, SUBSTRATE)
        lens = synthesize_lens(R, EPS)
        pattern = lens_gain(antenna, LensPlacement(lens, 1.0), WAVE, "point-source", 0.0, ray_count=10_000)
        assert np.isfinite(pattern.gain_estimate_dbi)
        assert 0 < pattern.spillover_efficiency <= 1

    def test_point_source_inside_lens_refused(self):
        antenna = single_patch(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 0.0)
        with pytest.raises(DegenerateGeometryError):
            make_feed(antenna, placement, FeedMode.POINT_SOURCE, 2.0)

    def test_point_source_snaps_to_face(self):
        antenna = single_patch(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 1.0)
        feed = make_feed(antenna, placement, "point-source", 1.005)
        assert feed.position[2] == 1.0

    def test_launch_grid_rotation_invariance(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 1.0)
        a = lens_gain(antenna, placement, WAVE, ray_count=20_000)
        b = lens_gain(antenna, placement, WAVE, ray_count=20_000, phi_offset=math.radians(0.6))
        assert abs(a.gain_estimate_dbi - b.gain_estimate_dbi) < 0.05

    def test_ray_count_convergence(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 1.0)
        a = lens_gain(antenna, placement, WAVE, ray_count=20_000)
        b = lens_gain(antenna, placement, WAVE, ray_count=40_000)
        assert abs(a.gain_estimate_dbi - b.gain_estimate_dbi) < 0.1

    def test_lens_flush_on_array_beats_bare_array(self):
        antenna = array_2x2(WAVE, SUBSTRATE)
        _, no_lens = far_field_directivity(antenna)
        pattern = lens_gain(antenna, LensPlacement(synthesize_lens(R, EPS), 0.0), WAVE, ray_count=10_000)
        assert pattern.gain_estimate_dbi > no_lens + 1.0

    def test_sampled_field_of_single_patch_matches_point_source(self):
        antenna = single_patch(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), 2.0)
        sampled = lens_gain(antenna, placement, WAVE, FeedMode.SAMPLED_FIELD, ray_count=10_000)
        point = lens_gain(antenna, placement, WAVE, FeedMode.POINT_SOURCE, 0.0, ray_count=10_000)
        assert sampled.gain_estimate_dbi == pytest.approx(point.gain_estimate_dbi, abs=1e-9)

    @pytest.mark.parametrize("d_gap", [1.0, 5.0])
    def test_cell_size_convergence(self, d_gap):
        antenna = array_2x2(WAVE, SUBSTRATE)
        placement = LensPlacement(synthesize_lens(R, EPS), d_gap)
        coarse = lens_gain(antenna, placement, WAVE, cell_size=WAVE.wavelength / 4)
        fine = lens_gain(antenna, placement, WAVE, cell_size=WAVE.wavelength / 8)
        assert abs(coarse.gain_estimate_dbi - fine.gain_estimate_dbi) < 0.1

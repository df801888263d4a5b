import math

import numpy as np
import pytest
import sympy as sp

from core.errors import DegenerateDirectionError, DomainError, UnsupportedFamilyError
from core.protocol import Side
from geometry.gap import (
    GapGeometry,
    GapSubdomain,
    boundary_normal,
    delta_from,
    delta_scale,
    gap_height,
    h_r,
    on_boundary_piece,
    subdomain_mask,
    sunflower_samples,
    verify_relative_convexity,
    working_radius,
)
from geometry.profiles import InclusionProfile


def fd_gradient(profile, xp, step=1e-6):
    out = np.zeros_like(xp)
    for i in range(len(xp)):
        e = np.zeros_like(xp)
        e[i] = step
        out[i] = (profile.value(xp + e) - profile.value(xp - e)) / (2 * step)
    return out


GEOMETRIES = ['balls3d', 'disks2d', 'quad_iso', 'quad_aniso']


def lateral_samples(geom, count=400):
    return sunflower_samples(geom.R0, count, geom.lateral_dimension)


def surface(profile, xp):
    return np.concatenate([xp, profile.value(xp)[..., None]], axis=-1)


class TestProfiles:

    @pytest.mark.parametrize("profile", [
        InclusionProfile.ball(1.0, Side.UPPER, 2),
        InclusionProfile.quadratic(np.diag([0.5, 2.0]), Side.UPPER),
        InclusionProfile.monomials([1.0, 0.5], Side.UPPER, 2),
    ])
    def test_vanishes_to_first_order_at_origin(self, profile):
        origin = np.zeros(2)
        assert profile.value(origin) == 0.0
        assert np.all(profile.gradient(origin) == 0.0)

    def test_ball_closed_form(self):
        upper = InclusionProfile.ball(1.0, Side.UPPER, 2)
        lower = InclusionProfile.ball(1.0, Side.LOWER, 2)
        xp = np.array([0.6, 0.0])
        assert upper.value(xp) == pytest.approx(0.2, rel=1e-14)
        assert lower.value(xp) == pytest.approx(-0.2, rel=1e-14)

    def test_ball_outside_disk_raises(self):
        with pytest.raises(DomainError):
            InclusionProfile.ball(1.0, Side.UPPER, 1).value(np.array([1.5]))

    @pytest.mark.parametrize("profile", [
        InclusionProfile.ball(1.0, Side.UPPER, 2),
        InclusionProfile.quadratic(np.array([[1.0, 0.3], [0.3, 2.0]]), Side.LOWER),
        InclusionProfile.monomials([1.0, 0.5, 0.25], Side.UPPER, 2),
    ])
    def test_gradient_matches_finite_differences(self, profile):
        xp = np.array([0.21, -0.13])
        assert np.allclose(profile.gradient(xp), fd_gradient(profile, xp), atol=1e-8)

    @pytest.mark.parametrize("profile", [
        InclusionProfile.ball(1.0, Side.UPPER, 2),
        InclusionProfile.monomials([1.0, 0.5, 0.25], Side.UPPER, 2),
    ])
    def test_hessian_matches_finite_differences(self, profile):
        xp = np.array([0.21, -0.13])
        step = 1e-5
        fd = np.zeros((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = step
            fd[:, j] = (profile.gradient(xp + e) - profile.gradient(xp - e)) / (2 * step)

        assert np.allclose(profile.hessian(xp), fd, atol=1e-7)

    def test_tabulated_has_no_hessian(self):
        radii = np.linspace(0.0, 0.5, 11)
        profile = InclusionProfile.tabulated(radii, radii ** 2, Side.UPPER, 1)
        assert profile.value(np.array([0.2])) == pytest.approx(0.04, abs=1e-6)
        with pytest.raises(UnsupportedFamilyError):
            profile.hessian(np.array([0.1]))

    def test_quadratic_rejects_indefinite_matrix(self):
        with pytest.raises(ValueError):
            InclusionProfile.quadratic(np.diag([1.0, -1.0]), Side.UPPER)


class TestGapHeight:

    def test_origin(self, balls3d):
        assert gap_height(balls3d, np.zeros(2)) == pytest.approx(0.01, rel=1e-15)

    def test_ball_off_axis(self):
        geom = GapGeometry.balls(1.0, 0.01, 0.9, 1.0, 3)
        assert gap_height(geom, np.array([0.6, 0.0])) == pytest.approx(0.41, rel=1e-13)

    def test_quadratic(self, quad_iso):
        assert gap_height(quad_iso, np.array([0.1, 0.1])) == pytest.approx(0.04, rel=1e-13)

    def test_outside_r0_raises(self, balls3d):
        with pytest.raises(DomainError):
            gap_height(balls3d, np.array([0.5, 0.0]))

    def test_vectorized(self, quad_iso):
        xp = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.2]])
        assert np.allclose(gap_height(quad_iso, xp), [0.02, 0.03, 0.06])

    @pytest.mark.parametrize("name", GEOMETRIES)
    def test_never_below_epsilon(self, name, request):
        geom = request.getfixturevalue(name)
        assert np.all(gap_height(geom, lateral_samples(geom)) >= geom.epsilon)

    @pytest.mark.parametrize("name", GEOMETRIES)
    def test_quadratic_sandwich(self, name, request):
        geom = request.getfixturevalue(name)
        xp = lateral_samples(geom)
        rho2 = np.sum(xp ** 2, axis=-1)
        hessian = geom.f.hessian(xp) - geom.g.hessian(xp)
        c_f = 0.5 * float(np.linalg.eigvalsh(hessian).max()) * (1.0 + 1e-6)

        excess = gap_height(geom, xp) - geom.epsilon
        assert np.all(excess >= 0.5 * geom.kappa * rho2 - 1e-15)
        assert np.all(excess <= c_f * rho2 + 1e-15)


class TestDeltaScale:

    def test_origin(self, balls3d):
        assert delta_scale(balls3d, np.zeros(2)) == pytest.approx(0.1)

    def test_zero_epsilon(self):
        assert delta_from(0.0, [0.3, 0.4]) == pytest.approx(0.5)

    def test_off_axis(self, balls3d):
        assert delta_scale(balls3d, np.array([0.1, 0.0])) == pytest.approx(math.sqrt(0.02), rel=1e-14)

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ValueError):
            delta_from(-1e-3, [0.0])

    @pytest.mark.parametrize("name", GEOMETRIES)
    def test_increasing_in_offset_and_epsilon(self, name, request):
        geom = request.getfixturevalue(name)
        direction = np.ones(geom.lateral_dimension) / math.sqrt(geom.lateral_dimension)

        by_offset = [delta_scale(geom, t * direction) for t in np.linspace(0.0, 0.9 * geom.R0, 12)]
        assert np.all(np.diff(by_offset) > 0)

        x0p = 0.1 * direction
        by_epsilon = [delta_scale(geom.with_epsilon(e), x0p) for e in (1e-4, 1e-3, 1e-2, 1e-1)]
        assert np.all(np.diff(by_epsilon) > 0)


class TestHr:

    def test_quadratic(self):
        geom = GapGeometry.quadratic(np.eye(2), 0.01, 0.5, 1.0)
        assert h_r(geom, np.array([0.01, 0.0]), 0.2) == pytest.approx(0.0116, rel=1e-12)

    def test_ball_against_high_precision(self):
        geom = GapGeometry.balls(1.0, 0.01, 0.5, 1.0, 3)
        rho2 = sp.Rational(4, 100) ** 2
        oracle = sp.N(sp.Rational(1, 100) + 2 * (1 - sp.sqrt(1 - rho2)), 40)
        assert h_r(geom, np.array([0.01, 0.0]), 0.2) == pytest.approx(float(oracle), rel=1e-13)

    def test_origin_needs_limit_convention(self, balls3d):
        with pytest.raises(DegenerateDirectionError):
            h_r(balls3d, np.zeros(2), 0.2)

    def test_limit_is_continuous(self, balls3d):
        r = 0.15
        at_origin = h_r(balls3d, np.zeros(2), r, limit=True)
        near = h_r(balls3d, np.array([1e-9, 0.0]), r)
        assert at_origin == pytest.approx(gap_height(balls3d, np.array([-r / 4, 0.0])))
        assert near == pytest.approx(at_origin, rel=1e-7)

    def test_radius_outside_window(self, balls3d):
        with pytest.raises(DomainError):
            h_r(balls3d, np.array([0.05, 0.0]), 0.1)


class TestRelativeConvexity:

    def test_quadratic_identity(self):
        geom = GapGeometry.quadratic(np.eye(2), 0.01, 0.5, 1.0)
        report = verify_relative_convexity(geom, 200)
        assert report.min_eig == pytest.approx(2.0)
        assert report.passed

    def test_balls_minimum_at_origin(self, balls3d):
        report = verify_relative_convexity(balls3d, 500)
        assert report.min_eig == pytest.approx(2.0, abs=1e-14)
        assert np.allclose(report.worst_point, 0.0)

    def test_kappa_too_large_fails(self):
        geom = GapGeometry.quadratic(np.eye(2), 0.01, 0.5, 3.0)
        report = verify_relative_convexity(geom, 50)
        assert not report.passed
        assert report.min_eig == pytest.approx(2.0)

    def test_tabulated_profile_unsupported(self):
        radii = np.linspace(0.0, 1.0, 21)
        geom = GapGeometry(
            f=InclusionProfile.tabulated(radii, radii ** 2, Side.UPPER, 1),
            g=InclusionProfile.tabulated(radii, radii ** 2, Side.LOWER, 1),
            epsilon=0.01, R0=0.5, kappa=1.0, n=2,
        )
        with pytest.raises(UnsupportedFamilyError):
            verify_relative_convexity(geom, 20)


class TestBoundaryNormal:

    def test_origin_is_vertical(self, balls3d):
        assert np.allclose(boundary_normal(balls3d, np.zeros(2), Side.UPPER), [0.0, 0.0, 1.0])
        assert np.allclose(boundary_normal(balls3d, np.zeros(2), Side.LOWER), [0.0, 0.0, -1.0])

    def test_quadratic_profile(self):
        # f = |x'|^2, g = -|x'|^2
        geom = GapGeometry.quadratic(2.0 * np.eye(2), 0.01, 0.5, 1.0)
        xp = np.array([0.1, 0.0])
        scale = math.sqrt(1.04)
        assert np.allclose(boundary_normal(geom, xp, Side.UPPER), np.array([-0.2, 0.0, 1.0]) / scale)
        assert np.allclose(boundary_normal(geom, xp, Side.LOWER), np.array([-0.2, 0.0, -1.0]) / scale)

    def test_unit_length(self, quad_aniso):
        xp = np.array([[0.1, 0.2], [-0.3, 0.05]])
        normals = boundary_normal(quad_aniso, xp, Side.UPPER)
        assert np.allclose(np.linalg.norm(normals, axis=-1), 1.0)

    @pytest.mark.parametrize("name", GEOMETRIES)
    @pytest.mark.parametrize("side", [Side.UPPER, Side.LOWER])
    def test_orthogonal_to_surface(self, name, side, request):
        geom = request.getfixturevalue(name)
        profile = geom.f if side == Side.UPPER else geom.g
        # away from the origin
        xp = lateral_samples(geom)[1:]
        step = 1e-6
        normals = boundary_normal(geom, xp, side)

        for i in range(geom.lateral_dimension):
            e = np.zeros(geom.lateral_dimension)
            e[i] = step
            tangent = (surface(profile, xp + e) - surface(profile, xp - e)) / (2.0 * step)
            assert np.max(np.abs(np.sum(normals * tangent, axis=-1))) <= 1e-8


class TestSubdomains:

    def test_membership_and_annulus(self, balls3d):
        points = np.array([[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [0.09, 0.0, 0.0], [0.2, 0.0, 0.0]])
        inside = subdomain_mask(balls3d, points, np.zeros(2), 0.1)
        ring = subdomain_mask(balls3d, points, np.zeros(2), 0.1, annulus=True)
        assert inside.tolist() == [True, True, True, False]
        assert ring.tolist() == [False, True, True, False]

    def test_radius_beyond_r0(self, balls3d):
        with pytest.raises(DomainError):
            GapSubdomain(np.zeros(2), 0.6).validate(balls3d)

    def test_boundary_pieces(self, balls3d):
        xp = np.array([0.1, 0.0])
        f = balls3d.f.value(xp)
        g = balls3d.g.value(xp)
        top = np.array([0.1, 0.0, 0.005 + f])
        bottom = np.array([0.1, 0.0, -0.005 + g])
        assert on_boundary_piece(balls3d, top, Side.UPPER)
        assert not on_boundary_piece(balls3d, top, Side.LOWER)
        assert on_boundary_piece(balls3d, bottom, Side.LOWER)


class TestWorkingRadius:

    def test_inadmissible_falls_back(self, balls3d):
        radius = working_radius(balls3d, [4e-2, 2e-2], gamma=0.3)
        assert not radius.admissible
        assert radius.r0 == pytest.approx(0.125)

    def test_admissible_limits_radius(self, balls3d):
        radius = working_radius(balls3d, [1e-8], gamma=0.3)
        assert radius.admissible
        assert radius.r0 == pytest.approx(math.sqrt(radius.delta_limit ** 2 - 1e-8))

    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            GapGeometry.balls(1.0, 0.01, 1.5, 1.0, 3)
        with pytest.raises(ValueError):
            GapGeometry.balls(1.0, -0.01, 0.5, 1.0, 3)

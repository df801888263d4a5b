import numpy as np
import pytest
import sympy as sp

from cli.property_validator import PropertyValidator
from cli.scenario import scenario_from_text
from core.errors import DomainError
from core.protocol import CoefficientFamily, MapKind
from geometry.gap import GapGeometry
from transform.coefficients import (
    CoefficientField,
    LayeredPartition,
    flattened_box_samples,
    holder_quotient,
    pushforward_coefficients,
    pushforward_eigen_bounds,
    reflect_extend,
    reflect_point,
    reflection_index,
)
from transform.maps import FlattenMap, forward, inverse, jacobian, jacobian_determinant


BOUNDS_SCENARIO = """
id = bounds
geometry.family = ball
geometry.radius = 1.0
geometry.R0 = 0.5
geometry.kappa = 1.0
geometry.dimension = 2
coefficient.family = smooth
coefficient.amplitude = 0.2
coefficient.lambda = 0.8
coefficient.Lambda = 1.2
numerics.lateral_cells = 32
numerics.vertical_cells = 8
sweep.epsilons = 4e-2, 2e-2, 1e-2, 5e-3
sweep.x0 = 0.05
acceptance.eigen_factor = 10
"""


def midline_point(geom, xp):
    xp = np.asarray(xp, dtype=float)
    f, g = geom.f.value(xp), geom.g.value(xp)
    gap = geom.epsilon + f - g
    return np.append(xp, g - 0.5 * geom.epsilon + 0.5 * gap)


def fd_jacobian(fmap, x, step):
    n = len(x)
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (forward(fmap, x + e) - forward(fmap, x - e)) / (2 * step)
    return J


class TestForward:

    def test_midline_maps_to_zero(self, balls3d):
        fmap = FlattenMap.global_map(balls3d)
        z = forward(fmap, midline_point(balls3d, [0.1, -0.05]))
        assert z[-1] == pytest.approx(0.0, abs=1e-14)
        assert np.allclose(z[:-1], [0.1, -0.05])

    def test_upper_face_maps_to_top(self, balls3d):
        fmap = FlattenMap.global_map(balls3d)
        xp = np.array([0.2, 0.1])
        x = np.append(xp, 0.5 * balls3d.epsilon + balls3d.f.value(xp))
        assert forward(fmap, x)[-1] == pytest.approx(1.0, rel=1e-13)

    def test_local_map_against_high_precision(self, balls3d):
        fmap = FlattenMap.local(balls3d, np.zeros(2))
        z = forward(fmap, np.array([0.02, 0.0, 0.001]))

        rho2 = sp.Rational(2, 100) ** 2
        f = rho2 / (1 + sp.sqrt(1 - rho2))
        eps = sp.Rational(1, 100)
        t = (sp.Rational(1, 1000) + f + eps / 2) / (eps + 2 * f)
        zn = sp.N(2 * sp.Rational(1, 10) * (t - sp.Rational(1, 2)), 40)

        assert np.allclose(z[:-1], [0.8, 0.0], rtol=1e-14)
        assert z[-1] == pytest.approx(float(zn), rel=1e-12)

    def test_outside_gap_raises(self, balls3d):
        fmap = FlattenMap.global_map(balls3d)
        with pytest.raises(DomainError):
            forward(fmap, np.array([0.0, 0.0, 0.02]))

    def test_outside_lateral_disk_raises(self, balls3d):
        fmap = FlattenMap.global_map(balls3d)
        with pytest.raises(DomainError):
            forward(fmap, np.array([0.6, 0.0, 0.0]))


class TestInverse:

    @pytest.mark.parametrize("kind", [MapKind.GLOBAL, MapKind.LOCAL, MapKind.ANNULUS])
    def test_round_trip(self, balls3d, kind):
        if kind == MapKind.GLOBAL:
            fmap = FlattenMap.global_map(balls3d)
        elif kind == MapKind.LOCAL:
            fmap = FlattenMap.local(balls3d, np.array([0.02, 0.0]))
        else:
            fmap = FlattenMap.annulus(balls3d, np.array([0.01, 0.0]), 0.1)

        z = flattened_box_samples(fmap, 200, seed=3) * 0.9
        x = inverse(fmap, z)
        assert np.allclose(forward(fmap, x), z, atol=1e-12 * max(1.0, fmap.half_height))

    def test_zero_maps_to_midline(self, quad_iso):
        fmap = FlattenMap.global_map(quad_iso)
        x = inverse(fmap, np.array([0.1, 0.2, 0.0]))
        assert np.allclose(x, midline_point(quad_iso, [0.1, 0.2]))

    def test_top_face_maps_to_upper_boundary(self, quad_iso):
        fmap = FlattenMap.global_map(quad_iso)
        x = inverse(fmap, np.array([0.1, 0.2, 1.0]))
        assert x[-1] == pytest.approx(0.5 * quad_iso.epsilon + quad_iso.f.value(np.array([0.1, 0.2])))

    def test_outside_box_raises(self, quad_iso):
        fmap = FlattenMap.global_map(quad_iso)
        with pytest.raises(DomainError):
            inverse(fmap, np.array([0.0, 0.0, 1.5]))


class TestJacobian:

    def test_local_map_at_touching_point(self, balls3d):
        fmap = FlattenMap.local(balls3d, np.zeros(2))
        for xn in (-0.004, 0.0, 0.003):
            J = fmap.reference_scale * jacobian(fmap, np.array([0.0, 0.0, xn]))
            assert np.allclose(np.diag(J), [4.0, 4.0, 2.0])
            assert np.allclose(J[-1, :-1], 0.0)
            assert np.allclose(J[:-1, -1], 0.0)

    @pytest.mark.parametrize("x0p", [np.zeros(2), np.array([0.03, -0.01])])
    def test_matches_finite_differences(self, quad_aniso, x0p):
        fmap = FlattenMap.local(quad_aniso, x0p)
        x = inverse(fmap, np.array([0.3, -0.2, 0.4 * fmap.half_height]))
        step = 1e-5 * fmap.half_height
        J = jacobian(fmap, x)
        fd = fd_jacobian(fmap, x, step)
        assert np.allclose(J, fd, rtol=1e-6, atol=1e-6 * np.abs(J).max())

    def test_determinant(self, balls3d):
        fmap = FlattenMap.global_map(balls3d)
        x = midline_point(balls3d, [0.1, 0.1])
        assert jacobian_determinant(fmap, x) == pytest.approx(np.linalg.det(jacobian(fmap, x)))
        assert jacobian_determinant(fmap, x) > 0


class TestPushforward:

    def test_diagonal_jacobian(self, disks2d):
        fmap = FlattenMap.local(disks2d, np.zeros(1))
        b = pushforward_coefficients(CoefficientField.identity(2), fmap, np.array([0.0, 0.05]))
        c = 2.0
        assert np.allclose(b, np.diag([4.0 / c, c / 4.0]))

    def test_identity_jacobian(self):
        # gap of height 2 at the origin makes the global map the identity there
        geom = GapGeometry.quadratic(np.eye(2), 2.0, 0.5, 1.0)
        fmap = FlattenMap.global_map(geom)
        b = pushforward_coefficients(CoefficientField.identity(3), fmap, np.array([0.0, 0.0, 0.3]))
        assert np.allclose(b, np.eye(3))

    def test_symmetric_positive_definite(self, balls3d):
        a = CoefficientField.smooth(3, 0.2, [np.pi, 0.0, np.pi])
        fmap = FlattenMap.local(balls3d, np.array([0.02, 0.0]))
        b = pushforward_coefficients(a, fmap, flattened_box_samples(fmap, 100))
        assert np.array_equal(b, np.swapaxes(b, -1, -2))
        assert np.linalg.eigvalsh(b).min() > 0

    def test_flip_mixed_sign(self, balls3d):
        a = CoefficientField.identity(3)
        fmap = FlattenMap.global_map(balls3d)
        z = np.array([0.2, 0.1, 0.3])
        b = pushforward_coefficients(a, fmap, z)
        flipped = pushforward_coefficients(a, fmap, z, flip_mixed_sign=True)
        assert flipped[2, 0] == pytest.approx(-b[2, 0])
        assert flipped[0, 2] == pytest.approx(-b[0, 2])
        assert flipped[1, 2] == b[1, 2]

    @pytest.mark.parametrize("epsilon", [1e-2, 1e-3])
    def test_eigenvalue_sandwich_near_origin(self, epsilon):
        geom = GapGeometry.balls(1.0, epsilon, 0.5, 1.0, 3)
        fmap = FlattenMap.local(geom, np.zeros(2))
        low, high = pushforward_eigen_bounds(CoefficientField.identity(3), fmap, flattened_box_samples(fmap, 500))
        assert low >= 0.1
        assert high <= 10.0

    def test_holder_quotient_stable_across_epsilon(self):
        a = CoefficientField.identity(3)
        quotients = []
        for epsilon in (1e-2, 1e-3):
            geom = GapGeometry.balls(1.0, epsilon, 0.5, 1.0, 3)
            quotients.append(holder_quotient(a, FlattenMap.local(geom, np.zeros(2)), count=500))

        assert all(np.isfinite(quotients))
        assert max(quotients) <= 2.0 * min(quotients)

    def test_scenario_bounds_cover_every_grid_node(self):
        result = PropertyValidator(scenario_from_text(BOUNDS_SCENARIO)).check_coefficient_bounds()
        assert result.passed, result.details
        assert result.details['centres'] == [(0.0,), (0.05,)]
        # |z'| < 1 drops the two end columns of the 33 x 9 grid; 4 epsilons, 2 centres
        assert result.details['nodes'] == 4 * 2 * 31 * 9
        assert result.details['min_eig'] >= 0.8 / 10.0
        assert result.details['max_eig'] <= 1.2 * 10.0


class TestReflection:

    def test_slab_zero_is_identity(self):
        delta = 0.1
        z = np.array([0.3, 0.05])
        source, sign = reflect_point(delta, z)
        assert np.array_equal(source, z)
        assert sign == 1.0

    def test_first_reflection(self):
        delta = 0.1
        z = np.array([0.3, 1.5 * delta])
        assert reflection_index(delta, z[-1]) == 1
        source, sign = reflect_point(delta, z)
        assert source[-1] == pytest.approx(0.5 * delta)
        assert sign == -1.0

    def test_interface_belongs_to_lower_slab(self):
        assert reflection_index(0.1, 0.1) == 0
        assert reflection_index(0.1, -0.1) == -1

    def test_mixed_entries_flip(self):
        delta = 0.1

        def coefficient(z):
            z = np.asarray(z, dtype=float)
            b = np.broadcast_to(np.array([[2.0, 0.3], [0.3, 1.0]]), z.shape[:-1] + (2, 2)).copy()
            b[..., 1, 1] += z[..., -1]
            return b

        inside = reflect_extend(coefficient, delta, np.array([0.0, 0.5 * delta]))
        outside = reflect_extend(coefficient, delta, np.array([0.0, 1.5 * delta]))
        assert outside[1, 1] == pytest.approx(inside[1, 1])
        assert outside[0, 1] == pytest.approx(-0.3)
        assert outside[1, 0] == pytest.approx(-0.3)

    def test_scalar_field_even_extension(self):
        delta = 0.2
        field = lambda z: np.asarray(z)[..., -1] ** 3 + 1.0
        z = np.array([[0.0, 0.3], [0.0, -0.3], [0.0, 0.7]])
        values = reflect_extend(field, delta, z)
        source, _ = reflect_point(delta, z)
        assert np.allclose(values, field(source))
        assert np.all(np.abs(source[:, -1]) <= delta + 1e-15)


class TestCoefficientFields:

    def test_smooth_bounds(self):
        a = CoefficientField.smooth(3, 0.2, [np.pi, 0.0, np.pi])
        assert a.family == CoefficientFamily.SMOOTH
        assert (a.lam, a.Lam) == pytest.approx((0.8, 1.2))
        points = np.random.default_rng(0).uniform(-1, 1, size=(500, 3))
        assert a.is_elliptic_on(points)

    def test_smooth_rejects_large_amplitude(self):
        with pytest.raises(ValueError):
            CoefficientField.smooth(2, 1.0, [1.0, 1.0])

    def test_layer_index_on_cuts(self):
        partition = LayeredPartition.random(4, 2, seed=1)
        cut = partition.cuts[2]
        assert partition.layer_index(cut) == 3
        assert partition.layer_index(cut - 1e-12) == 2
        assert partition.layer_index(-1.0) == 1
        assert partition.layer_index(1.0) == 4

    def test_random_partition_is_reproducible(self):
        first = LayeredPartition.random(8, 2, seed=7)
        second = LayeredPartition.random(8, 2, seed=7)
        assert np.array_equal(first.cuts, second.cuts)
        x = np.random.default_rng(1).uniform(-1, 1, size=(50, 2))
        assert np.array_equal(first.evaluate(x), second.evaluate(x))

    @pytest.mark.parametrize("count", [0, 65])
    def test_layer_count_range(self, count):
        with pytest.raises(ValueError):
            LayeredPartition.random(count, 2, seed=0)

    def test_layered_field_is_elliptic(self):
        a = CoefficientField.layered(LayeredPartition.random(16, 2, seed=2))
        points = np.random.default_rng(2).uniform(-1, 1, size=(400, 2))
        assert a.is_elliptic_on(points)

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from conftest import band_limited, nodes, ring
from fracshape.curve import (
    DiffeoSample,
    TangentField,
    build_curve,
    circle,
    compose,
    diameter,
    ds_derivative,
    invert_lift,
    random_curve,
    random_diffeo,
    srv_transform,
    to_constant_speed,
)
from fracshape.errors import ConfigurationError, DomainError, GenerationFailure, ImmersionViolation
from fracshape.spectral import SampledFunction, resample


def ellipse(n, a=2.0, b=1.0):
    t = nodes(n)
    return build_curve(np.stack([a * np.cos(2 * np.pi * t), b * np.sin(2 * np.pi * t)], axis=1))


class TestBuildCurve:
    @pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
    def test_circle(self, r):
        c = circle(64, r)
        assert np.allclose(c.speed, 2 * np.pi * r, rtol=1e-13)
        assert c.length == pytest.approx(2 * np.pi * r, rel=1e-13)
        assert np.allclose(c.psi(nodes(64)), nodes(64), atol=1e-13)
        assert c.is_constant_speed

    def test_ellipse_psi_against_cumulative_quadrature(self):
        c = ellipse(64)
        psi = c.psi(nodes(64))
        assert np.all(np.diff(psi) > 0)
        assert c.psi(np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-10)
        # independent oracle: closed-form speed, cumulative trapezoid on a 64x finer grid
        fine = np.linspace(0, 1, 64 * 64 + 1)
        speed = 2 * np.pi * np.sqrt(4 * np.sin(2 * np.pi * fine) ** 2 + np.cos(2 * np.pi * fine) ** 2)
        cum = cumulative_trapezoid(speed, fine, initial=0.0)
        oracle = cum[::64][:64] / cum[-1]
        assert np.abs(psi - oracle).max() < 1e-6
        assert c.length == pytest.approx(cum[-1], rel=1e-6)

    def test_length_is_trapezoid_of_fine_speed(self):
        c = ellipse(32)
        assert c.length == pytest.approx(np.mean(c.speed_fine), rel=1e-14)

    def test_psi_inverse_round_trip(self, rng):
        c = random_curve(3, n=64)
        u = rng.random(200)
        assert np.abs(c.psi(c.psi_inverse(u)) - u).max() <= 1e-8

    def test_stationary_point_is_rejected(self):
        # cardioid: the derivative vanishes at theta = 0
        t = nodes(64)
        r = 1 - np.cos(2 * np.pi * t)
        x = np.stack([r * np.cos(2 * np.pi * t), r * np.sin(2 * np.pi * t)], axis=1)
        with pytest.raises(ImmersionViolation, match="ImmersionViolation"):
            build_curve(x)

    def test_constant_curve_is_rejected(self):
        with pytest.raises(ImmersionViolation):
            build_curve(np.ones((16, 2)))

    def test_needs_two_dimensions(self):
        with pytest.raises(ConfigurationError):
            build_curve(np.sin(2 * np.pi * nodes(16)))

    def test_circle_in_three_dimensions(self):
        c = circle(32, 2.0, center=(1, 2, 3), d=3)
        assert c.d == 3 and c.length == pytest.approx(4 * np.pi)

    def test_length_scaling(self):
        c = random_curve(5, n=64)
        for lam in (0.1, 3.7):
            assert build_curve(lam * c.x).length == pytest.approx(lam * c.length, rel=1e-12)


class TestTangentField:
    def test_grid_mismatch(self):
        with pytest.raises(ConfigurationError):
            TangentField(SampledFunction(np.zeros((16, 2))), circle(32))


class TestArcLengthDerivative:
    def test_constant_field(self):
        c = random_curve(1, n=32)
        assert np.abs(ds_derivative(c, np.ones((32, 2))).h).max() < 1e-12

    def test_unit_circle_tangent(self):
        c = circle(64)
        t = ds_derivative(c, c.x).h
        assert np.abs(np.linalg.norm(t, axis=1) - 1).max() < 1e-10

    def test_mismatch(self):
        with pytest.raises(ConfigurationError):
            ds_derivative(circle(16), np.zeros((8, 2)))


class TestConstantSpeed:
    def test_circle_is_fixed_point(self):
        c = circle(32)
        assert np.abs(to_constant_speed(c).x - c.x).max() < 1e-10

    def test_ellipse(self):
        c = to_constant_speed(ellipse(256))
        assert np.ptp(c.speed_fine) / c.length < 1e-6
        assert c.length == pytest.approx(ellipse(256).length, rel=1e-10)

    def test_same_image(self):
        e = ellipse(128)
        c = to_constant_speed(e)
        # nodes of the result lie on the ellipse x^2/4 + y^2 = 1
        assert np.abs(c.x[:, 0] ** 2 / 4 + c.x[:, 1] ** 2 - 1).max() < 1e-10

    def test_reparametrised_circle(self):
        phi = random_diffeo(2, n=64, amplitude=0.3)
        c = build_curve(compose(circle(64, 1.5), phi))
        out = to_constant_speed(c)
        assert np.abs(out.speed_fine - 3 * np.pi).max() / (3 * np.pi) < 1e-6


class TestDiameter:
    @pytest.mark.parametrize("r", [0.5, 2.0])
    def test_circle(self, r):
        assert diameter(circle(256, r)) == pytest.approx(2 * r, rel=1e-6)

    def test_flat_ellipse_against_brute_force(self):
        a = 3.0
        c = ellipse(64, a, 0.01 * a)
        fine = resample(c.x, 256)
        brute = max(np.linalg.norm(p - q) for p in fine[::2] for q in fine)
        assert diameter(c) == pytest.approx(brute, rel=1e-3)
        assert diameter(c) == pytest.approx(2 * a, rel=1e-3)

    def test_translation_invariance(self):
        c = random_curve(7, n=64)
        assert diameter(c.x + np.array([5.0, -2.0])) == pytest.approx(diameter(c), rel=1e-12)

    def test_at_most_half_length(self):
        for seed in range(50):
            c = random_curve(seed, n=64)
            assert diameter(c) <= c.length / 2 + 1e-9


class TestSRV:
    def test_unit_circle_magnitude(self):
        q = srv_transform(circle(64)).samples
        assert np.allclose(np.linalg.norm(q, axis=1), np.sqrt(2 * np.pi), rtol=1e-12)

    def test_scaling(self):
        c = random_curve(4, n=64)
        lam = 2.5
        assert np.allclose(srv_transform(build_curve(lam * c.x)).samples, np.sqrt(lam) * srv_transform(c).samples)

    def test_l2_norm_is_length(self):
        c = random_curve(8, n=256)
        q = srv_transform(c).samples
        assert np.mean(np.sum(q**2, axis=1)) == pytest.approx(c.length, rel=1e-8)


class TestRandomCurve:
    def test_deterministic(self):
        assert np.array_equal(random_curve(11, n=64).x, random_curve(11, n=64).x)

    def test_many_draws_are_immersed(self):
        for seed in range(1000):
            c = random_curve(seed, n=32, decay=3.0)
            assert c.speed_fine.min() > 0

    def test_impossible_speed_fails(self):
        with pytest.raises(GenerationFailure):
            random_curve(0, n=32, min_speed=100.0, amplitude=2.0)

    def test_decay_must_exceed_one(self):
        with pytest.raises(DomainError):
            random_curve(0, decay=1.0)


class TestDiffeo:
    def test_zero_amplitude_is_identity(self):
        phi = random_diffeo(0, n=32, amplitude=0.0)
        assert np.array_equal(phi.values, nodes(32))

    def test_positive_derivative(self):
        for seed in range(20):
            assert random_diffeo(seed, n=64).min_derivative() > 0

    def test_inverse(self, rng):
        phi = random_diffeo(3, n=64, amplitude=0.8)
        u = rng.random(100)
        assert np.abs(phi(phi.inverse(u)) - u).max() <= 1e-8
        assert np.abs(phi.inverse(phi(u)) - u).max() <= 1e-8

    def test_lift_is_periodic(self):
        phi = random_diffeo(5, n=64)
        assert phi(np.array([1.3]))[0] == pytest.approx(phi(np.array([0.3]))[0] + 1, abs=1e-12)

    def test_non_monotone_rejected(self):
        with pytest.raises(DomainError):
            DiffeoSample(0.5 * np.sin(2 * np.pi * nodes(32)))

    def test_impossible_bound_fails(self):
        with pytest.raises(GenerationFailure):
            random_diffeo(0, n=32, amplitude=50.0, min_derivative=0.9)

    def test_invert_lift_identity(self):
        u = np.linspace(0, 1, 11)
        assert np.allclose(invert_lift(np.zeros(16), u), u)

    def test_reparametrisation_invariance_of_length_and_diameter(self, rng):
        c = build_curve(ring(64) + 0.2 * band_limited(rng, 64, 2, decay=3))
        phi = random_diffeo(9, n=64, amplitude=0.4)
        big = 4096
        up = resample(c.x, big)
        comp = compose(c, phi, big)
        assert build_curve(comp).length == pytest.approx(build_curve(up).length, rel=1e-6)
        assert diameter(comp) == pytest.approx(diameter(up), rel=1e-6)

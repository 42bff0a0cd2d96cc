import math

import numpy as np
import pytest

from thermogeom.connection import (
    ConnectionSpec,
    HolonomyResult,
    Loop,
    curvature,
    flatness_check,
    gamma_coeffs,
    holonomy_via_curvature,
    holonomy_via_lift,
    horizontal_lift,
    rectangle_loop,
)
from thermogeom.contact import MMetricSpec, ThermoPoint, fiber_path_length
from thermogeom.errors import DegenerateMetricError, ValidationError
from thermogeom.processes import ParamPath


def spec2(g_S="1", h=("0", "0"), fd_step=1e-5):
    return ConnectionSpec.parsed(g_S, list(h), 2, fd_step)


def point(lam, n=None):
    lam = np.asarray(lam, dtype=float)
    n = lam.size if n is None else n
    return ThermoPoint(0.0, np.zeros(n), lam)


def line_path(lam_a, lam_b, steps=64, duration=1.0):
    a = np.asarray(lam_a, dtype=float)
    b = np.asarray(lam_b, dtype=float)
    ts = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return ParamPath(duration, a + ts * (b - a))


UNIT_SQUARE = rectangle_loop([0.0, 0.0], [1.0, 1.0], steps=256)


class TestGammaCoeffs:
    def test_zero_h_gives_zero_gamma(self):
        out = gamma_coeffs(spec2(), [0.3, 0.7])
        assert np.array_equal(out.entropy, [0.0, 0.0])
        assert np.array_equal(out.expectation, np.zeros((2, 2)))

    def test_scalar_division(self):
        out = gamma_coeffs(spec2(g_S="2", h=("4", "0")), [0.0, 0.0])
        assert out.entropy[0] == pytest.approx(2.0)

    def test_expression_evaluation(self):
        out = gamma_coeffs(spec2(h=("l2", "0")), [0.3, 0.7])
        assert out.entropy[0] == pytest.approx(0.7, rel=1e-14)

    def test_degenerate_g_S(self):
        spec = spec2(g_S="l1")
        with pytest.raises(DegenerateMetricError):
            gamma_coeffs(spec, [0.0, 1.0])


class TestHorizontalLift:
    def test_flat_connection_lifts_constant(self):
        lift = horizontal_lift(spec2(), line_path([0, 0], [1, 1]), point([0, 0]))
        assert all(q.S == 0.0 for q in lift)
        assert all(np.array_equal(q.a, [0.0, 0.0]) for q in lift)

    def test_constant_gamma_integrates_exactly(self):
        spec = spec2(h=("1", "0"))  # Gamma^1_0 = 1
        lift = horizontal_lift(spec, line_path([0, 0], [1, 0]), point([0, 0]))
        assert lift[-1].S == pytest.approx(-1.0, abs=1e-12)

    def test_gradient_field_loop_closes(self):
        # Gamma = grad of phi(l1,l2) = sin(l1 l2): exact line integral is 0
        spec = spec2(h=("l2*cos(l1*l2)", "l1*cos(l1*l2)"))
        lift = horizontal_lift(spec, UNIT_SQUARE.path, point([0, 0]))
        assert abs(lift[-1].S - lift[0].S) < 1e-8

    def test_projection_invariant(self):
        base = line_path([0.2, -0.4], [1.0, 0.8])
        lift = horizontal_lift(spec2(h=("l1", "l2")), base, point([0.2, -0.4]))
        for q, row in zip(lift, base.samples):
            assert np.array_equal(q.lam, row)

    def test_base_point_compatibility_checked(self):
        with pytest.raises(ValidationError):
            horizontal_lift(spec2(), line_path([0, 0], [1, 0]), point([0.5, 0]))


class TestCurvature:
    def test_gradient_field_is_flat(self):
        spec = spec2(h=("l2*cos(l1*l2)", "l1*cos(l1*l2)"))
        for lam in ([0.0, 0.0], [0.5, -0.3], [1.0, 1.0]):
            assert abs(curvature(spec, lam, 0, 1)) < 1e-8

    def test_unit_curvature(self):
        spec = spec2(h=("0", "l1"))
        for lam in ([0.0, 0.0], [0.7, 0.2], [-1.0, 3.0]):
            assert curvature(spec, lam, 0, 1) == pytest.approx(1.0, abs=1e-9)

    def test_antisymmetry(self):
        spec = spec2(h=("sin(l2)", "l1*l2"))
        lam = [0.4, 1.3]
        r_kl = curvature(spec, lam, 0, 1)
        r_lk = curvature(spec, lam, 1, 0)
        assert abs(r_kl + r_lk) < 1e-12

    def test_needs_two_parameters(self):
        spec = ConnectionSpec.parsed("1", ["0"], 1)
        with pytest.raises(ValidationError):
            curvature(spec, [0.0], 0, 0)


class TestHolonomy:
    def test_flat_spec_any_loop(self):
        result = holonomy_via_lift(spec2(), UNIT_SQUARE, point([0, 0]))
        assert abs(result.dS) < 1e-10
        assert np.array_equal(result.da, [0.0, 0.0])
        assert result.method == "lift"

    def test_area_holonomy_ccw_square(self):
        spec = spec2(h=("0", "l1"))
        result = holonomy_via_lift(spec, UNIT_SQUARE, point([0, 0]))
        assert result.dS == pytest.approx(-1.0, abs=1e-6)

    def test_orientation_reversal_flips_sign(self):
        spec = spec2(h=("0", "l1"))
        reversed_loop = Loop(
            ParamPath(1.0, UNIT_SQUARE.path.samples[::-1].copy())
        )
        result = holonomy_via_lift(spec, reversed_loop, point([0, 0]))
        assert result.dS == pytest.approx(1.0, abs=1e-6)

    def test_curvature_integral_constant_r(self):
        spec = spec2(h=("0", "l1"))  # R = 1 on the unit square
        result = holonomy_via_curvature(spec, [0, 0], [1, 1], 0, 1, grid=(64, 64))
        assert result.dS == pytest.approx(-1.0, abs=1e-9)
        assert result.method == "curvature-integral"

    def test_curvature_integral_iterated(self):
        spec = spec2(h=("0", "l1*l2"))  # R = l2, integral over square = 1/2
        result = holonomy_via_curvature(spec, [0, 0], [1, 1], 0, 1, grid=(64, 64))
        assert result.dS == pytest.approx(-0.5, abs=1e-6)

    def test_zero_area_rectangle(self):
        spec = spec2(h=("0", "l1"))
        result = holonomy_via_curvature(spec, [0.3, 0.1], [0.3, 0.9], 0, 1)
        assert result.dS == 0.0

    def test_stokes_equivalence_smooth_spec(self):
        spec = spec2(g_S="1+l2^2", h=("0", "sin(l1)*(1+l2^2)"))
        # Gamma^2_0 = sin(l1) so R_12 = cos(l1); flux over square = sin(1)
        loop = rectangle_loop([0.0, 0.0], [1.0, 1.0], steps=256)
        lift = holonomy_via_lift(spec, loop, point([0, 0]))
        surf = holonomy_via_curvature(spec, [0, 0], [1, 1], 0, 1, grid=(128, 128))
        assert abs(lift.dS - surf.dS) <= 1e-5
        assert lift.dS == pytest.approx(-math.sin(1.0), abs=1e-5)

    def test_loop_concatenation_is_additive(self):
        spec = spec2(h=("0", "l1*l1"))
        left = rectangle_loop([0.0, 0.0], [1.0, 1.0], steps=256)
        right = rectangle_loop([1.0, 0.0], [2.0, 1.0], steps=256)
        big = rectangle_loop([0.0, 0.0], [2.0, 1.0], steps=512)
        h_left = holonomy_via_lift(spec, left, point([0, 0])).dS
        h_right = holonomy_via_lift(spec, right, point([1, 0])).dS
        h_big = holonomy_via_lift(spec, big, point([0, 0])).dS
        assert abs(h_big - (h_left + h_right)) < 1e-8

    def test_independent_of_vertical_base_point(self):
        spec = spec2(h=("0", "l1"))
        a = holonomy_via_lift(
            spec, UNIT_SQUARE, ThermoPoint(0.0, np.zeros(2), np.zeros(2))
        )
        b = holonomy_via_lift(
            spec, UNIT_SQUARE, ThermoPoint(55.0, np.array([3.0, -2.0]), np.zeros(2))
        )
        assert a.dS == b.dS

    def test_lift_never_moves_expectations(self):
        spec = spec2(h=("l2", "l1*l2"))
        lift = horizontal_lift(spec, UNIT_SQUARE.path, point([0, 0]))
        for q in lift:
            assert np.array_equal(q.a, [0.0, 0.0])

    def test_nonzero_holonomy_costs_vertical_length(self):
        # closing the lifted loop vertically has strictly positive cost
        spec = spec2(h=("0", "l1"))
        hol = holonomy_via_lift(spec, UNIT_SQUARE, point([0, 0]))
        assert abs(hol.dS) > 0
        vertical = MMetricSpec.parsed("1", ["1", "1"], ["0", "0"], 2)
        lam = UNIT_SQUARE.path.samples[0]
        ends = [
            ThermoPoint(0.0 + hol.dS * t, np.zeros(2), lam)
            for t in np.linspace(0.0, 1.0, 9)
        ]
        assert fiber_path_length(vertical, ends, 1.0) > 0.9 * abs(hol.dS)


class TestLoopValidation:
    def test_open_path_rejected(self):
        with pytest.raises(ValidationError):
            Loop(line_path([0, 0], [1, 0], steps=32))

    def test_minimum_steps(self):
        tiny = rectangle_loop([0, 0], [1, 1], steps=16)
        assert tiny.path.steps >= 16
        samples = np.zeros((13, 2))
        with pytest.raises(ValidationError):
            Loop(ParamPath(1.0, samples))


class TestFlatness:
    def test_h_proportional_to_g_S_is_flat(self):
        spec = spec2(g_S="1+l1^2", h=("3*(1+l1^2)", "0.5*(1+l1^2)"))
        grid = np.stack(
            np.meshgrid(np.linspace(-1, 1, 5), np.linspace(-1, 1, 5), indexing="ij"),
            axis=-1,
        ).reshape(-1, 2)
        report = flatness_check(spec, grid)
        assert report.flat
        assert report.max_abs_curvature < 1e-7

    def test_explicit_gradient_is_flat(self):
        spec = spec2(h=("l2*cos(l1*l2)", "l1*cos(l1*l2)"))
        grid = np.stack(
            np.meshgrid(np.linspace(-1, 1, 4), np.linspace(-1, 1, 4), indexing="ij"),
            axis=-1,
        ).reshape(-1, 2)
        assert flatness_check(spec, grid).flat

    def test_area_spec_is_not_flat(self):
        spec = spec2(h=("0", "l1"))
        grid = np.array([[0.0, 0.0], [0.5, 0.5]])
        report = flatness_check(spec, grid)
        assert not report.flat
        assert report.max_abs_curvature == pytest.approx(1.0, abs=1e-8)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            flatness_check(spec2(), np.empty((0, 2)))


class TestHolonomyResult:
    def test_nonzero_da_rejected(self):
        with pytest.raises(ValidationError):
            HolonomyResult(dS=0.1, da=np.array([1.0]), method="lift")

    def test_unknown_method_rejected(self):
        with pytest.raises(ValidationError):
            HolonomyResult(dS=0.0, da=np.zeros(1), method="guess")

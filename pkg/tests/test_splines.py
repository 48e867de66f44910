import numpy as np
import pytest

from camcurves import InputError, build_basis, center_basis, place_knots
from camcurves.splines import _cardinal_rows

LOG_LADDER = np.log([10.0, 20.0, 50.0, 150.0, 500.0, 1000.0])


def default_knots(k=5):
    return place_knots(LOG_LADDER, k)


class TestPlaceKnots:
    def test_rank_quantiles_over_log_ladder(self):
        kv = default_knots()
        assert kv.count == 5
        assert kv.knots[0] == pytest.approx(np.log(10.0), abs=1e-12)
        assert kv.knots[-1] == pytest.approx(np.log(1000.0), abs=1e-12)
        # rank 2.5 falls halfway between the 3rd and 4th distinct values
        assert kv.knots[2] == pytest.approx((np.log(50.0) + np.log(150.0)) / 2, abs=1e-12)

    def test_two_values_three_knots(self):
        kv = place_knots([0.0, 1.0], 3)
        np.testing.assert_allclose(kv.knots, [0.0, 0.5, 1.0])

    def test_too_few_knots_rejected(self):
        with pytest.raises(InputError):
            place_knots([0.0, 1.0], 2)

    def test_too_few_values_rejected(self):
        with pytest.raises(InputError):
            place_knots([3.0, 3.0], 5)


class TestBuildBasis:
    def test_cardinal_identity_at_knots(self):
        kv = default_knots()
        basis = build_basis(kv.knots, kv)
        np.testing.assert_allclose(basis.basis_matrix, np.eye(5), atol=1e-12)

    def test_affine_functions_are_unpenalized(self):
        kv = default_knots()
        basis = build_basis(kv.knots, kv)
        coef = 0.7 - 0.3 * kv.knots  # spline equal to an affine function
        assert abs(coef @ basis.penalty_matrix @ coef) < 1e-12

    def test_penalty_matches_integrated_squared_second_derivative(self):
        # oracle: trapezoid rule over a 10000-point grid; the second
        # derivative of a natural cubic interpolant is piecewise linear
        kv = default_knots()
        basis = build_basis(kv.knots, kv)
        rng = np.random.default_rng(0)
        for _ in range(5):
            coef = rng.normal(size=5)
            grid = np.linspace(kv.knots[0], kv.knots[-1], 10_000)
            h = grid[1] - grid[0]
            values = _cardinal_rows(grid, kv.knots) @ coef
            second = np.gradient(np.gradient(values, h), h)
            # drop edge cells where np.gradient is one-sided
            quad = np.trapezoid(second[2:-2] ** 2, grid[2:-2])
            target = coef @ basis.penalty_matrix @ coef
            assert quad == pytest.approx(target, rel=1e-3)

    def test_penalty_matches_exact_second_derivative_oracle(self):
        # sharper oracle: evaluate the analytic piecewise-linear second
        # derivative on the grid, then trapezoid; relative error < 1e-6
        from camcurves.splines import _natural_spline_system

        kv = default_knots()
        basis = build_basis(kv.knots, kv)
        F, _ = _natural_spline_system(kv.knots)
        rng = np.random.default_rng(1)
        coef = rng.normal(size=5)
        grid = np.linspace(kv.knots[0], kv.knots[-1], 10_000)
        second = np.interp(grid, kv.knots, F @ coef)
        quad = np.trapezoid(second**2, grid)
        target = coef @ basis.penalty_matrix @ coef
        assert abs(quad - target) / abs(target) < 1e-6

    def test_penalty_positive_semidefinite(self):
        kv = default_knots()
        basis = build_basis(kv.knots, kv)
        eigs = np.linalg.eigvalsh(basis.penalty_matrix)
        assert eigs.min() > -1e-10

    def test_penalty_invariant_under_affine_shift(self):
        kv = default_knots()
        basis = build_basis(kv.knots, kv)
        rng = np.random.default_rng(2)
        coef = rng.normal(size=5)
        shifted = coef + 1.3 - 0.8 * kv.knots
        q0 = coef @ basis.penalty_matrix @ coef
        q1 = shifted @ basis.penalty_matrix @ shifted
        assert q0 == pytest.approx(q1, rel=1e-9)

    def test_smooth_across_knots(self):
        # one-sided finite-difference limits of f, f' and f'' agree at each
        # interior knot to 1e-6 relative
        kv = default_knots()
        rng = np.random.default_rng(3)
        coef = rng.normal(size=5)
        h = 1e-4

        def f(pts):
            return _cardinal_rows(np.asarray(pts), kv.knots) @ coef

        for t in kv.knots[1:-1]:
            v_left, v_right = f([t - 1e-9, t + 1e-9])
            assert v_left == pytest.approx(v_right, rel=1e-6, abs=1e-9)
            # second-order one-sided first-derivative stencils at t
            fl = f([t - 2 * h, t - h, t])
            fr = f([t, t + h, t + 2 * h])
            d1_left = (3 * fl[2] - 4 * fl[1] + fl[0]) / (2 * h)
            d1_right = (-3 * fr[0] + 4 * fr[1] - fr[2]) / (2 * h)
            assert d1_left == pytest.approx(d1_right, rel=1e-6, abs=1e-8)
            # f'' is piecewise linear: central second differences inside each
            # segment extrapolate linearly to the knot
            gl = f([t - 3 * h, t - 2 * h, t - h, t])
            gr = f([t, t + h, t + 2 * h, t + 3 * h])
            d2_l1 = (gl[3] - 2 * gl[2] + gl[1]) / h**2  # f''(t - h)
            d2_l2 = (gl[2] - 2 * gl[1] + gl[0]) / h**2  # f''(t - 2h)
            d2_r1 = (gr[2] - 2 * gr[1] + gr[0]) / h**2  # f''(t + h)
            d2_r2 = (gr[3] - 2 * gr[2] + gr[1]) / h**2  # f''(t + 2h)
            d2_left = 2 * d2_l1 - d2_l2
            d2_right = 2 * d2_r1 - d2_r2
            assert d2_left == pytest.approx(d2_right, rel=1e-6, abs=1e-6)

    def test_linear_extrapolation_outside_knots(self):
        kv = default_knots()
        rng = np.random.default_rng(4)
        coef = rng.normal(size=5)
        lo, hi = kv.knots[0], kv.knots[-1]
        for a, b, c in [(lo - 2.0, lo - 1.0, lo - 0.5), (hi + 0.5, hi + 1.0, hi + 2.0)]:
            vals = _cardinal_rows(np.array([a, b, c]), kv.knots) @ coef
            slope1 = (vals[1] - vals[0]) / (b - a)
            slope2 = (vals[2] - vals[1]) / (c - b)
            assert slope1 == pytest.approx(slope2, rel=1e-10)

    def test_non_finite_rejected(self):
        kv = default_knots()
        with pytest.raises(InputError):
            build_basis([np.nan], kv)

    def test_deterministic_construction(self):
        kv = default_knots()
        x = np.linspace(2.0, 7.0, 40)
        b1 = build_basis(x, kv)
        b2 = build_basis(x, kv)
        assert np.array_equal(b1.basis_matrix, b2.basis_matrix)
        assert np.array_equal(b1.penalty_matrix, b2.penalty_matrix)


class TestCenterBasis:
    def setup_method(self):
        self.kv = default_knots()
        self.x = np.repeat(LOG_LADDER, 7)
        self.basis = build_basis(self.x, self.kv)

    def test_rank_drops_by_one(self):
        centered = center_basis(self.basis)
        assert centered.rank == 4

    def test_columns_sum_to_zero_over_data(self):
        centered = center_basis(self.basis)
        np.testing.assert_allclose(centered.basis_matrix.sum(axis=0), 0.0, atol=1e-10)

    def test_constant_fit_through_centered_basis_is_zero(self):
        centered = center_basis(self.basis)
        coef, *_ = np.linalg.lstsq(centered.basis_matrix, np.ones(self.x.size), rcond=None)
        np.testing.assert_allclose(centered.basis_matrix @ coef, 0.0, atol=1e-10)

    def test_centering_is_idempotent(self):
        once = center_basis(self.basis)
        twice = center_basis(once)
        assert np.array_equal(once.basis_matrix, twice.basis_matrix)
        assert np.array_equal(once.penalty_matrix, twice.penalty_matrix)

    def test_evaluate_matches_training_rows(self):
        centered = center_basis(self.basis)
        np.testing.assert_allclose(
            centered.evaluate(self.x), centered.basis_matrix, atol=1e-12
        )

"""Quasi-Newton minimizer fixtures and line-search behavior."""

import numpy as np
import pytest

from hassvm.solver import (
    LineSearchResult,
    NonDescentDirectionError,
    SolveOptions,
    line_search,
    minimize,
)

TIGHT = SolveOptions(gradient_tolerance=1e-10, objective_tolerance=1e-18)


def quadratic_around(a):
    a = np.asarray(a, dtype=float)

    def f(x):
        d = x - a
        return 0.5 * float(d @ d), d

    return f


def rosenbrock(x):
    v = (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2
    g = np.array([
        -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
        200.0 * (x[1] - x[0] ** 2),
    ])
    return v, g


def hinge_2d(x):
    # 0.5*||x||^2 + max(0, 1 - x_0); kink exactly at the minimizer (1, 0).
    v = 0.5 * float(x @ x) + max(0.0, 1.0 - x[0])
    g = x.copy()
    if 1.0 - x[0] > 0.0:
        g[0] -= 1.0
    return v, g


class TestMinimize:
    def test_identity_quadratic(self):
        rng = np.random.default_rng(0)
        for dim in (2, 8, 30):
            a = rng.normal(size=dim)
            x0 = rng.normal(size=dim) * 5.0
            result = minimize(quadratic_around(a), x0, TIGHT)
            assert np.max(np.abs(result.point - a)) <= 1e-10
            assert result.iterations <= dim + 5
            assert result.status == "converged-gradient"

    def test_rosenbrock(self):
        result = minimize(rosenbrock, np.array([-1.2, 1.0]), TIGHT)
        assert np.max(np.abs(result.point - 1.0)) <= 1e-6
        assert result.value <= 1e-12

    def test_hinge_fixture_against_grid_oracle(self):
        # Independent oracle: fine 1-D grid along the only active coordinate.
        grid = np.linspace(0.0, 2.0, 2_000_001)
        values = 0.5 * grid ** 2 + np.maximum(0.0, 1.0 - grid)
        k = int(np.argmin(values))
        oracle_point = np.array([grid[k], 0.0])
        oracle_value = float(values[k])
        assert oracle_value == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(oracle_point, [1.0, 0.0], atol=1e-6)

        result = minimize(hinge_2d, np.zeros(2), SolveOptions())
        assert result.value <= oracle_value + 1e-6
        assert np.max(np.abs(result.point - oracle_point)) <= 1e-3

    def test_strongly_convex_quadratics_converge_fast(self):
        # Moderately conditioned quadratics, d <= 50: gradient norm 1e-10
        # within 2d iterations.
        rng = np.random.default_rng(1)
        for dim in (5, 10, 25, 50):
            diag = np.logspace(0, 1, dim)
            a = rng.normal(size=dim)

            def f(x, diag=diag, a=a):
                d = x - a
                return 0.5 * float(d @ (diag * d)), diag * d

            result = minimize(f, np.zeros(dim),
                              SolveOptions(gradient_tolerance=1e-11,
                                           objective_tolerance=0.0,
                                           max_iterations=2 * dim))
            assert result.gradient_norm <= 1e-10
            assert result.iterations <= 2 * dim

    def test_non_finite_start_rejected(self):
        def f(x):
            return np.inf, x

        with pytest.raises(ValueError):
            minimize(f, np.zeros(2))

    def test_determinism(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=12)
        x0 = rng.normal(size=12)
        r1 = minimize(quadratic_around(a), x0)
        r2 = minimize(quadratic_around(a), x0)
        np.testing.assert_array_equal(r1.point, r2.point)
        assert r1.value == r2.value
        assert r1.iterations == r2.iterations

    def test_accepted_steps_strictly_decrease(self):
        # Every accepted line-search step must lower the objective, which
        # makes the accepted-value sequence of minimize non-increasing.
        rng = np.random.default_rng(19)
        f = quadratic_around(rng.normal(size=6))
        for _ in range(50):
            point = rng.normal(size=6) * 3.0
            value, gradient = f(point)
            direction = -gradient + 0.1 * rng.normal(size=6)
            if float(direction @ gradient) >= 0.0:
                continue
            result = line_search(f, point, direction,
                                 float(rng.uniform(0.05, 2.0)),
                                 SolveOptions(), value, gradient)
            if result.success:
                assert result.value < value

    def test_converges_at_start_when_already_optimal(self):
        a = np.array([1.0, -2.0])
        result = minimize(quadratic_around(a), a.copy())
        assert result.iterations == 0
        assert result.status == "converged-gradient"
        np.testing.assert_array_equal(result.point, a)


class TestSolveOptions:
    def test_wolfe_constants_validated(self):
        with pytest.raises(ValueError):
            SolveOptions(wolfe_c1=0.5, wolfe_c2=0.1)
        with pytest.raises(ValueError):
            SolveOptions(memory=0)


class TestLineSearch:
    def test_unit_step_accepted_when_wolfe_holds(self):
        # Quadratic with minimizer exactly one unit step away.
        f = quadratic_around(np.array([1.0, 0.0]))
        point = np.zeros(2)
        value, gradient = f(point)
        result = line_search(f, point, -gradient, 1.0, SolveOptions(),
                             value, gradient)
        assert result.wolfe_satisfied
        assert result.step == 1.0
        assert result.evaluations == 1

    def test_quadratic_minimizing_step_found(self):
        f = quadratic_around(np.array([3.0, -4.0]))
        point = np.zeros(2)
        value, gradient = f(point)
        result = line_search(f, point, -gradient, 0.05, SolveOptions(),
                             value, gradient)
        assert result.wolfe_satisfied
        moved = point + result.step * -gradient
        # Any Wolfe step on this quadratic lies in the middle of the valley.
        assert f(moved)[0] < value

    def test_non_descent_direction_raises(self):
        f = quadratic_around(np.zeros(2))
        point = np.array([1.0, 1.0])
        value, gradient = f(point)
        with pytest.raises(NonDescentDirectionError):
            line_search(f, point, gradient, 1.0, SolveOptions(), value, gradient)

    def test_flat_direction_exhausts_without_looping(self):
        # Function flat ahead but the reported slope claims descent: the
        # search must signal exhaustion within its evaluation budget.
        def liar(x):
            return 0.0, np.array([-1.0])

        opts = SolveOptions(max_line_search_steps=17)
        result = line_search(liar, np.zeros(1), np.ones(1), 1.0, opts)
        assert not result.success
        assert result.evaluations <= 17

    def test_exhaustion_returns_best_decrease(self):
        # Strict Wolfe curvature is unattainable on a sharp piecewise-linear
        # valley; the best sufficient-decrease point must come back instead.
        def vee(x):
            return abs(x[0] - 0.3), np.array([1.0 if x[0] > 0.3 else -1.0])

        opts = SolveOptions(max_line_search_steps=8, wolfe_c2=0.1)
        value, gradient = vee(np.zeros(1))
        result = line_search(vee, np.zeros(1), np.array([1.0]), 1.0, opts,
                             value, gradient)
        assert result.success
        assert result.value < value

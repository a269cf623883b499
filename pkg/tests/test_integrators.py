import numpy as np
import pytest
from unittest.mock import patch

from src.errors import (
    DegenerateStateError,
    NewtonConvergenceError,
    SingularSystemError,
    StepFailureError,
)
from src.grid import Grid, StateVector, h_distance, l2_sq, laplacian, max_asymmetry, zeros
from src.integrators import (
    SchemeKind,
    TridiagonalSystem,
    normalize,
    solve_fully_implicit,
    solve_tridiagonal,
    step,
    step_fully_implicit,
    step_linearly_implicit,
    step_semi_explicit,
)
from src.soliton import sample_soliton


def dense(system):
    n = system.size
    matrix = np.diag(system.diag)
    matrix[np.arange(1, n), np.arange(n - 1)] = system.sub
    matrix[np.arange(n - 1), np.arange(1, n)] = system.sup
    return matrix


class TestTridiagonalSolver:
    """Test cases for Thomas elimination."""

    def test_matches_dense_solve(self):
        rng = np.random.default_rng(3)
        n = 50
        sub = rng.uniform(-1, 1, n - 1)
        sup = rng.uniform(-1, 1, n - 1)
        diag = 3.0 + rng.uniform(0, 1, n)
        system = TridiagonalSystem(sub, diag, sup)
        rhs = rng.standard_normal(n)
        x = solve_tridiagonal(system, rhs)
        np.testing.assert_allclose(x, np.linalg.solve(dense(system), rhs), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(system.matvec(x), rhs, atol=1e-13)

    def test_single_unknown(self):
        system = TridiagonalSystem([], [4.0], [])
        assert solve_tridiagonal(system, [2.0]).tolist() == [0.5]

    def test_two_by_two(self):
        system = TridiagonalSystem([1.0], [2.0, 2.0], [1.0])
        np.testing.assert_allclose(solve_tridiagonal(system, [3.0, 3.0]), [1.0, 1.0], rtol=1e-15)

    def test_identity_returns_rhs(self):
        rhs = [0.5, -2.0, 7.25]
        system = TridiagonalSystem([0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0])
        assert solve_tridiagonal(system, rhs).tolist() == rhs

    def test_persymmetric_system_keeps_symmetry(self):
        rng = np.random.default_rng(17)
        n = 41
        off = rng.uniform(-1, 0, n - 1)
        off = 0.5 * (off + off[::-1])
        diag = 3.0 + rng.uniform(0, 1, n)
        diag = 0.5 * (diag + diag[::-1])
        rhs = rng.standard_normal(n)
        rhs = 0.5 * (rhs + rhs[::-1])
        x = solve_tridiagonal(TridiagonalSystem(off, diag, off), rhs)
        assert np.max(np.abs(x - x[::-1])) <= 1e-13 * np.max(np.abs(x))

    def test_zero_leading_pivot(self):
        system = TridiagonalSystem([1.0], [0.0, 1.0], [1.0])
        with pytest.raises(SingularSystemError) as excinfo:
            solve_tridiagonal(system, [1.0, 1.0])
        assert excinfo.value.row == 0

    def test_vanishing_pivot_reports_row(self):
        system = TridiagonalSystem([1.0], [1.0, 1.0], [1.0])
        with pytest.raises(SingularSystemError) as excinfo:
            solve_tridiagonal(system, [1.0, 2.0])
        assert excinfo.value.row == 1

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            TridiagonalSystem([1.0, 1.0], [1.0, 1.0], [1.0])
        system = TridiagonalSystem([1.0], [3.0, 3.0], [1.0])
        with pytest.raises(ValueError):
            solve_tridiagonal(system, [1.0, 2.0, 3.0])


class TestSteps:
    """Test cases for the three single-step schemes."""

    def setup_method(self):
        self.grid = Grid(0.2, 100)
        self.psi = normalize(sample_soliton(self.grid))
        self.tau = 0.1

    def test_linearly_implicit_solves_its_system(self):
        star = step_linearly_implicit(self.psi, self.tau)
        p = self.psi.values
        lhs = star.values - self.tau * (0.5 * laplacian(star).values + p * p * star.values)
        np.testing.assert_allclose(lhs, p, atol=1e-13)

    def test_semi_explicit_solves_its_system(self):
        star = step_semi_explicit(self.psi, self.tau)
        p = self.psi.values
        lhs = star.values - self.tau * 0.5 * laplacian(star).values
        np.testing.assert_allclose(lhs, p + self.tau * p ** 3, atol=1e-13)

    def test_fully_implicit_solves_nonlinear_equation(self):
        result = solve_fully_implicit(self.psi, self.tau)
        star = result.state.values
        residual = star - self.psi.values - self.tau * (0.5 * laplacian(result.state).values + star ** 3)
        assert np.max(np.abs(residual)) <= 1e-11
        assert 1 <= result.iterations <= 10
        assert np.array_equal(step_fully_implicit(self.psi, self.tau).values, star)

    def test_linearly_implicit_scales_ground_state(self, ground_state):
        eta = ground_state.state
        for tau in (0.05, 0.3, 1.0):
            expected = eta * (1.0 / (1.0 - tau * ground_state.lambda_h))
            assert h_distance(step_linearly_implicit(eta, tau), expected) <= 1e-11

    def test_tiny_tau_is_identity(self):
        for scheme in SchemeKind:
            out = step(self.psi, 1e-12, scheme)
            np.testing.assert_allclose(out.values, self.psi.values, rtol=0, atol=1e-9 * np.max(self.psi.values))

    def test_first_order_consistency(self):
        def local_error(scheme, tau):
            drift = 0.5 * laplacian(self.psi).values + self.psi.values ** 3
            expected = self.psi.with_values(self.psi.values + tau * drift)
            return h_distance(step(self.psi, tau, scheme), expected)

        for scheme in SchemeKind:
            ratio = local_error(scheme, 1e-3) / local_error(scheme, 1e-4)
            assert 80.0 <= ratio <= 120.0

    def test_newton_converges_quickly_near_ground_state(self):
        psi = normalize(sample_soliton(Grid(0.1, 400)))
        assert solve_fully_implicit(psi, 0.1).iterations <= 6

    def test_steps_keep_symmetry(self):
        for scheme in SchemeKind:
            assert max_asymmetry(step(self.psi, self.tau, scheme)) <= 1e-13

    def test_steps_of_zero_stay_zero(self):
        for scheme in SchemeKind:
            assert l2_sq(step(zeros(self.grid), self.tau, scheme)) == 0.0

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            step_linearly_implicit(self.psi, 0.0)
        with pytest.raises(ValueError):
            step_semi_explicit(self.psi, -0.1)

    def test_singular_solve_becomes_step_failure(self):
        with patch('src.integrators.solve_tridiagonal', side_effect=SingularSystemError(5, 0.0)):
            with pytest.raises(StepFailureError, match="row 5"):
                step_linearly_implicit(self.psi, self.tau)
            with pytest.raises(StepFailureError):
                step_semi_explicit(self.psi, self.tau)

    def test_newton_gives_up_after_max_iterations(self):
        with patch('src.integrators.NEWTON_TOL', 0.0), patch('src.integrators.NEWTON_MAX_ITERS', 2):
            with pytest.raises(NewtonConvergenceError) as excinfo:
                solve_fully_implicit(self.psi, self.tau)
        assert excinfo.value.iterations == 2
        assert isinstance(excinfo.value, StepFailureError)


class TestNormalize:
    """Test cases for the projection back to the unit sphere."""

    def test_unit_norm(self):
        grid = Grid(0.1, 50)
        rng = np.random.default_rng(11)
        for _ in range(5):
            psi = StateVector(grid, rng.uniform(-3, 3, grid.size))
            assert abs(l2_sq(normalize(psi)) - 1.0) <= 1e-14

    def test_square_root_convention(self):
        grid = Grid(0.5, 2)
        psi = StateVector(grid, np.full(5, 2.0))
        # N_h = 0.5 * 5 * 4 = 10
        np.testing.assert_allclose(normalize(psi).values, 2.0 / np.sqrt(10.0), rtol=1e-15)

    def test_zero_state_is_degenerate(self):
        with pytest.raises(DegenerateStateError):
            normalize(zeros(Grid(0.1, 10)))


class TestSchemeKind:
    def test_parse(self):
        assert SchemeKind.parse("semiexp") is SchemeKind.SEMI_EXPLICIT
        with pytest.raises(ValueError, match="linimp"):
            SchemeKind.parse("rk4")

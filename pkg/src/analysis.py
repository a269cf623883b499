"""Local coordinates around the discrete ground state, the linearized operator A,
its coercivity on W, and rate/order fits for convergence studies.

W is the set of symmetric lattice vectors orthogonal to eta_ref. All
projections use the discrete inner product <., .>_h.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh, null_space
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from .config import Config
from .errors import (
    EigenSolverError,
    GridMismatchError,
    InsufficientDataError,
    NotInSubspaceError,
    OutOfChartError,
)
from .flow import FlowTrace, GroundStateRef
from .grid import StateVector, flow_energy, inner, l2_sq, laplacian

ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class Decomposition:
    r: float
    u: StateVector


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through log data.

    For exponential fits `rate` is the decay per unit time; for power fits it
    is the slope (order), also exposed as `order`.
    """

    rate: float
    intercept: float
    r_squared: float
    points_used: int
    degenerate: bool = False

    @property
    def order(self) -> float:
        return self.rate


def _same_grid(psi: StateVector, ref: GroundStateRef) -> None:
    if psi.grid != ref.grid:
        raise GridMismatchError(f"Grid mismatch: {psi.grid} vs reference {ref.grid}")


def project_P_eta(psi: StateVector, ref: GroundStateRef) -> StateVector:
    _same_grid(psi, ref)
    return inner(psi, ref.state) * ref.state


def project_P_W(psi: StateVector, ref: GroundStateRef) -> StateVector:
    return psi - project_P_eta(psi, ref)


def decompose(psi: StateVector, ref: GroundStateRef) -> Decomposition:
    """psi -> (r, u) = (<psi, eta> - 1, psi - <psi, eta> eta)."""
    _same_grid(psi, ref)
    c = inner(psi, ref.state)
    return Decomposition(r=c - 1.0, u=psi - c * ref.state)


def compose(r: float, u: StateVector, ref: GroundStateRef) -> StateVector:
    """(r, u) -> (1 + r) eta + u."""
    _same_grid(u, ref)
    return (1.0 + r) * ref.state + u


def r_of_u(u: StateVector) -> float:
    """r(u) = -1 + sqrt(1 - N_h(u)), keeping (1 + r) eta + u on the unit sphere."""
    n2 = l2_sq(u)
    if n2 >= 1.0:
        raise OutOfChartError(f"N_h(u) = {n2:.6g} >= 1: u lies outside the sphere chart")
    return -1.0 + math.sqrt(1.0 - n2)


def chart_energy(u: StateVector, ref: GroundStateRef) -> float:
    """Reduced energy E_h(chi(r(u), u)); u = 0 is its non-degenerate minimum."""
    return flow_energy(compose(r_of_u(u), u, ref))


def _check_in_W(u: StateVector, ref: GroundStateRef) -> None:
    _same_grid(u, ref)
    overlap = abs(inner(u, ref.state))
    if overlap > ORTHOGONALITY_TOL * max(1.0, math.sqrt(l2_sq(u))):
        raise NotInSubspaceError(
            f"Input has overlap {overlap:.3e} with the ground state; project with P_W first"
        )


def operator_A(u: StateVector, ref: GroundStateRef) -> StateVector:
    """A u = P_W(lambda_h u - Delta_h u / 2 - 3 eta^2 u)."""
    _check_in_W(u, ref)
    eta2 = ref.state.values ** 2
    lu = ref.lambda_h * u.values - 0.5 * laplacian(u).values - 3.0 * eta2 * u.values
    return project_P_W(u.with_values(lu), ref)


def _symmetric_basis(K: int, h: float) -> np.ndarray:
    """h-orthonormal basis of symmetric vectors: e_0 and e_j + e_-j."""
    n = 2 * K + 1
    basis = np.zeros((n, K + 1))
    basis[K, 0] = 1.0 / math.sqrt(h)
    j = np.arange(1, K + 1)
    basis[K + j, j] = 1.0 / math.sqrt(2.0 * h)
    basis[K - j, j] = 1.0 / math.sqrt(2.0 * h)
    return basis


def _laplacian_columns(x: np.ndarray, h: float) -> np.ndarray:
    padded = np.pad(x, ((1, 1), (0, 0)))
    return (padded[2:] + padded[:-2] - 2.0 * x) / (h * h)


def smallest_eigenvalue_on_W(ref: GroundStateRef,
                             operator: Callable[[np.ndarray], np.ndarray],
                             max_K: Optional[int] = None) -> float:
    """Smallest eigenvalue of a symmetric operator restricted to symmetric W.

    `operator` maps an (n, m) array of column states to their images. The
    restriction is assembled densely in an h-orthonormal basis of W.
    """
    grid = ref.grid
    max_K = Config.DENSE_EIGEN_MAX_K if max_K is None else max_K
    if grid.K > max_K:
        raise EigenSolverError(
            f"K={grid.K} exceeds the dense eigensolver limit {max_K}; use an iterative eigensolver"
        )
    basis = _symmetric_basis(grid.K, grid.h)
    coeffs = grid.h * basis.T @ ref.state.values
    complement = null_space(coeffs[None, :])
    w_basis = basis @ complement
    matrix = grid.h * w_basis.T @ operator(w_basis)
    matrix = 0.5 * (matrix + matrix.T)
    try:
        values = eigh(matrix, eigvals_only=True, subset_by_index=[0, 0])
    except LinAlgError as e:
        raise EigenSolverError(f"Failed to compute the smallest eigenvalue: {str(e)}") from e
    return float(values[0])


def min_eigenvalue_A(ref: GroundStateRef, max_K: Optional[int] = None) -> float:
    """Coercivity constant of A in the discrete L2 norm on symmetric W."""
    h = ref.grid.h
    eta2 = (ref.state.values ** 2)[:, None]

    def apply_A(x: np.ndarray) -> np.ndarray:
        # P_W is dropped: the columns of x span W and A's matrix is taken against W
        return ref.lambda_h * x - 0.5 * _laplacian_columns(x, h) - 3.0 * eta2 * x

    return smallest_eigenvalue_on_W(ref, apply_A, max_K)


def _line_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float, bool]:
    if np.ptp(y) == 0.0:
        return 0.0, float(y[0]), 0.0, True
    model = LinearRegression()
    model.fit(x.reshape(-1, 1), y)
    r_squared = float(r2_score(y, model.predict(x.reshape(-1, 1))))
    return float(model.coef_[0]), float(model.intercept_), r_squared, False


def fit_exponential_rate(trace: FlowTrace, tau: float,
                         window: Tuple[float, float] = (1e-10, 1e-2),
                         field: str = "err_ref", skip: int = 10) -> RateFit:
    """Fit err ~ C exp(-rate * n * tau) over records with err inside `window`.

    Records before iteration `skip` are treated as transient and ignored.
    """
    lo, hi = window
    points = [
        (r.n * tau, getattr(r, field))
        for r in trace.records
        if r.n >= skip and getattr(r, field) is not None and lo <= getattr(r, field) <= hi
    ]
    if len(points) < 3:
        raise InsufficientDataError(
            f"Need at least 3 {field} values in [{lo:.1e}, {hi:.1e}], got {len(points)}"
        )
    t = np.array([p[0] for p in points])
    log_err = np.log(np.array([p[1] for p in points]))
    slope, intercept, r_squared, degenerate = _line_fit(t, log_err)
    return RateFit(rate=-slope, intercept=intercept, r_squared=r_squared,
                   points_used=len(points), degenerate=degenerate)


def fit_power_slope(pairs: Sequence[Tuple[float, float]]) -> RateFit:
    """Fit error ~ C parameter^order in log-log coordinates."""
    if len(pairs) < 3:
        raise InsufficientDataError(f"Need at least 3 (parameter, error) pairs, got {len(pairs)}")
    params = np.array([p for p, _ in pairs], dtype=np.float64)
    errors = np.array([e for _, e in pairs], dtype=np.float64)
    if np.any(params <= 0) or np.any(errors <= 0):
        raise InsufficientDataError("Power fits need strictly positive parameters and errors")
    slope, intercept, r_squared, degenerate = _line_fit(np.log(params), np.log(errors))
    return RateFit(rate=slope, intercept=intercept, r_squared=r_squared,
                   points_used=len(pairs), degenerate=degenerate)

"""Single steps of the three time discretizations of d/dt psi = Delta_h psi / 2 + psi^3.

Every step solves a tridiagonal system (the Laplacian is always implicit):

    linimp   (I - tau(Delta_h/2 + diag(psi_n^2))) psi* = psi_n
    semiexp  (I - tau Delta_h/2) psi* = psi_n + tau psi_n^3
    fullimp  psi* - psi_n - tau(Delta_h psi*/2 + psi*^3) = 0   (Newton)

Only the linearly implicit step keeps the discrete ground state as an exact
fixed point after normalization.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateStateError,
    NewtonConvergenceError,
    SingularSystemError,
    StepFailureError,
)
from .grid import StateVector, l2_sq, laplacian

PIVOT_RTOL = 1e-30
NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 50
DEGENERATE_L2 = 1e-30


class SchemeKind(Enum):
    LINEARLY_IMPLICIT = "linimp"
    SEMI_EXPLICIT = "semiexp"
    FULLY_IMPLICIT = "fullimp"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"Unknown scheme {name!r}; expected one of {choices}")


@dataclass(frozen=True)
class TridiagonalSystem:
    """Rows i: sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1]."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        sub = np.asarray(self.sub, dtype=np.float64)
        diag = np.asarray(self.diag, dtype=np.float64)
        sup = np.asarray(self.sup, dtype=np.float64)
        n = diag.shape[0]
        if diag.ndim != 1 or n < 1:
            raise ValueError("Diagonal must be a nonempty 1D sequence")
        if sub.shape != (n - 1,) or sup.shape != (n - 1,):
            raise ValueError(
                f"Off-diagonals must have length {n - 1}, got {sub.shape[0]} and {sup.shape[0]}"
            )
        if not (np.all(np.isfinite(sub)) and np.all(np.isfinite(diag)) and np.all(np.isfinite(sup))):
            raise ValueError("Tridiagonal entries must be finite")
        object.__setattr__(self, "sub", sub)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "sup", sup)

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = self.diag * x
        y[1:] += self.sub * x[:-1]
        y[:-1] += self.sup * x[1:]
        return y


def solve_tridiagonal(system: TridiagonalSystem, rhs: Sequence[float]) -> np.ndarray:
    """Thomas elimination without pivoting.

    A pivot smaller than 1e-30 times its row scale raises SingularSystemError
    naming the row.
    """
    n = system.size
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (n,):
        raise ValueError(f"Right-hand side must have length {n}, got shape {rhs.shape}")

    # Plain floats: the recurrence is sequential and list indexing beats ndarray indexing.
    a: List[float] = system.sub.tolist()
    b: List[float] = system.diag.tolist()
    c: List[float] = system.sup.tolist()
    d: List[float] = rhs.tolist()
    cp = [0.0] * n
    dp = [0.0] * n

    pivot = b[0]
    scale = max(abs(b[0]), abs(c[0]) if n > 1 else 0.0)
    if abs(pivot) <= PIVOT_RTOL * scale or pivot == 0.0:
        raise SingularSystemError(0, pivot)
    if n > 1:
        cp[0] = c[0] / pivot
    dp[0] = d[0] / pivot

    for i in range(1, n):
        ai = a[i - 1]
        pivot = b[i] - ai * cp[i - 1]
        scale = max(abs(ai), abs(b[i]), abs(c[i]) if i < n - 1 else 0.0)
        if abs(pivot) <= PIVOT_RTOL * scale or pivot == 0.0:
            raise SingularSystemError(i, pivot)
        if i < n - 1:
            cp[i] = c[i] / pivot
        dp[i] = (d[i] - ai * dp[i - 1]) / pivot

    x = dp
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def _laplacian_system(psi: StateVector, tau: float, diag_shift: np.ndarray) -> TridiagonalSystem:
    """I - tau*Delta_h/2 - diag(diag_shift)."""
    grid = psi.grid
    off = -tau / (2.0 * grid.h * grid.h)
    n = grid.size
    diag = 1.0 + tau / (grid.h * grid.h) - diag_shift
    return TridiagonalSystem(np.full(n - 1, off), diag, np.full(n - 1, off))


def _check_tau(tau: float) -> None:
    if not (math.isfinite(tau) and tau > 0):
        raise ValueError(f"Time step tau must be positive, got {tau}")


def step_linearly_implicit(psi: StateVector, tau: float) -> StateVector:
    """Solve (I - tau(Delta_h/2 + psi^2)) psi* = psi with the nonlinearity frozen at psi."""
    _check_tau(tau)
    system = _laplacian_system(psi, tau, tau * psi.values * psi.values)
    try:
        values = solve_tridiagonal(system, psi.values)
    except SingularSystemError as e:
        raise StepFailureError(f"Linearly implicit step failed at tau={tau}: {e}; use a smaller tau") from e
    if not np.all(np.isfinite(values)):
        raise StepFailureError(f"Linearly implicit step produced non-finite values at tau={tau}; use a smaller tau")
    return psi.with_values(values)


def step_semi_explicit(psi: StateVector, tau: float) -> StateVector:
    """Solve (I - tau Delta_h/2) psi* = psi + tau psi^3."""
    _check_tau(tau)
    system = _laplacian_system(psi, tau, np.zeros(psi.grid.size))
    rhs = psi.values + tau * psi.values ** 3
    try:
        values = solve_tridiagonal(system, rhs)
    except SingularSystemError as e:
        # strictly diagonally dominant: a failure here means corrupt input
        raise StepFailureError(f"Semi-explicit step failed at tau={tau}: {e}") from e
    if not np.all(np.isfinite(values)):
        raise StepFailureError(f"Semi-explicit step produced non-finite values at tau={tau}; use a smaller tau")
    return psi.with_values(values)


class NewtonResult(NamedTuple):
    state: StateVector
    iterations: int


def solve_fully_implicit(psi: StateVector, tau: float) -> NewtonResult:
    """Newton iteration for psi* - psi - tau(Delta_h psi*/2 + psi*^3) = 0.

    Warm start from the linearly implicit step; stop once
    ||update||_inf <= 1e-12 (1 + ||psi*||_inf).
    """
    phi = step_linearly_implicit(psi, tau).values
    last_update = math.inf
    for iteration in range(1, NEWTON_MAX_ITERS + 1):
        current = psi.with_values(phi)
        residual = phi - psi.values - tau * (0.5 * laplacian(current).values + phi ** 3)
        jacobian = _laplacian_system(psi, tau, 3.0 * tau * phi * phi)
        try:
            update = solve_tridiagonal(jacobian, -residual)
        except SingularSystemError as e:
            raise StepFailureError(f"Fully implicit Newton step failed at tau={tau}: {e}; use a smaller tau") from e
        phi = phi + update
        if not np.all(np.isfinite(phi)):
            raise StepFailureError(f"Fully implicit Newton step diverged at tau={tau}; use a smaller tau")
        last_update = float(np.max(np.abs(update)))
        if last_update <= NEWTON_TOL * (1.0 + float(np.max(np.abs(phi)))):
            return NewtonResult(psi.with_values(phi), iteration)
    raise NewtonConvergenceError(NEWTON_MAX_ITERS, last_update)


def step_fully_implicit(psi: StateVector, tau: float) -> StateVector:
    """Fully implicit step; see solve_fully_implicit."""
    return solve_fully_implicit(psi, tau).state


_STEPS = {
    SchemeKind.LINEARLY_IMPLICIT: step_linearly_implicit,
    SchemeKind.SEMI_EXPLICIT: step_semi_explicit,
    SchemeKind.FULLY_IMPLICIT: step_fully_implicit,
}


def step(psi: StateVector, tau: float, scheme: SchemeKind) -> StateVector:
    """Dispatch one un-normalized step of the given scheme."""
    return _STEPS[scheme](psi, tau)


def normalize(psi: StateVector) -> StateVector:
    """psi / sqrt(N_h(psi)).

    The lattice algorithm is sometimes printed dividing by N_h itself; that
    would leave the unit sphere, so the square root is used throughout.
    """
    n2 = l2_sq(psi)
    if n2 <= DEGENERATE_L2:
        raise DegenerateStateError(f"Cannot normalize a state with N_h = {n2:.3e}; the flow collapsed to zero")
    return psi.with_values(psi.values / math.sqrt(n2))

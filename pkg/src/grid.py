"""Discrete function space on the cutoff lattice {-K, ..., K} with spacing h.

Values outside |l| <= K are zero (Dirichlet cutoff) and are never stored.
The discrete Hamiltonian and H1 norm are implemented exactly as written in
the finite difference formulation, including their constant weights: the
H1 norm carries a factor 2 on the difference term, and H_h weighs the
gradient term by 1 and the quartic term by 1/2. Neither matches four times
the continuous energy; H_h is used as a diagnostic only, the flow itself is
driven by the lattice equation.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class Grid:
    """Uniform 1D mesh x_l = l*h for l in {-K, ..., K}."""

    h: float
    K: int

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"Grid spacing h must be positive and finite, got {self.h}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"Cutoff index K must be an integer >= 1, got {self.K}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "K", int(self.K))

    @property
    def size(self) -> int:
        return 2 * self.K + 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @property
    def nodes(self) -> np.ndarray:
        # l*h per node, never a cumulative sum
        return self.indices * self.h


@dataclass(frozen=True, eq=False)
class StateVector:
    """Real node values on a Grid, indexed by l = -K..K (array position l + K)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"State needs {self.grid.size} values for K={self.grid.K}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("State values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def at(self, l: int) -> float:
        """Value at lattice index l; zero beyond the cutoff."""
        if abs(l) > self.grid.K:
            return 0.0
        return float(self.values[l + self.grid.K])

    def with_values(self, values: np.ndarray) -> "StateVector":
        return StateVector(self.grid, values)

    def _check(self, other: "StateVector") -> None:
        if other.grid != self.grid:
            raise GridMismatchError(f"Grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        return StateVector(self.grid, self.values + other.values)

    def __sub__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        return StateVector(self.grid, self.values - other.values)

    def __neg__(self) -> "StateVector":
        return StateVector(self.grid, -self.values)

    def __mul__(self, scalar: float) -> "StateVector":
        return StateVector(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__


def zeros(grid: Grid) -> StateVector:
    return StateVector(grid, np.zeros(grid.size))


def from_function(grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> StateVector:
    """Sample f at the grid nodes."""
    return StateVector(grid, f(grid.nodes))


def _padded(psi: StateVector) -> np.ndarray:
    return np.concatenate(([0.0], psi.values, [0.0]))


def laplacian(psi: StateVector) -> StateVector:
    """Second order finite difference Laplacian with zero neighbors past the cutoff."""
    p = _padded(psi)
    h = psi.grid.h
    return StateVector(psi.grid, (p[2:] + p[:-2] - 2.0 * psi.values) / (h * h))


def l2_sq(psi: StateVector) -> float:
    """N_h(psi) = h * sum psi_l^2."""
    return psi.grid.h * float(np.dot(psi.values, psi.values))


def inner(psi: StateVector, phi: StateVector) -> float:
    """<psi, phi>_h = h * sum psi_l phi_l."""
    if psi.grid != phi.grid:
        raise GridMismatchError(f"Grid mismatch: {psi.grid} vs {phi.grid}")
    return psi.grid.h * float(np.dot(psi.values, phi.values))


def h1_norm_sq(psi: StateVector) -> float:
    """Discrete H1 norm squared: 2h sum |d psi|^2 / h^2 + h sum |psi|^2."""
    h = psi.grid.h
    d = np.diff(_padded(psi))
    return 2.0 * float(np.dot(d, d)) / h + l2_sq(psi)


def h_distance(psi: StateVector, phi: StateVector) -> float:
    """Distance in the discrete H1 norm."""
    return math.sqrt(h1_norm_sq(psi - phi))


def hamiltonian_h(psi: StateVector) -> float:
    """H_h(psi) = h sum [ ((psi_j - psi_{j-1}) / h)^2 - psi_j^4 / 2 ]."""
    h = psi.grid.h
    d = np.diff(_padded(psi))
    v2 = psi.values * psi.values
    return float(np.dot(d, d)) / h - 0.5 * h * float(np.dot(v2, v2))


def max_asymmetry(psi: StateVector) -> float:
    """max_l |psi_l - psi_{-l}|."""
    return float(np.max(np.abs(psi.values - psi.values[::-1])))


def flow_energy(psi: StateVector) -> float:
    """E_h(psi) = h sum [ |d psi / h|^2 / 4 - psi^4 / 4 ].

    Its h-gradient is -(Delta_h psi / 2 + psi^3), so the gradient flow of E_h on
    the unit sphere is the flow the schemes discretize, and eta_{h,K} is its
    constrained minimizer.
    """
    h = psi.grid.h
    d = np.diff(_padded(psi))
    v2 = psi.values * psi.values
    return 0.25 * float(np.dot(d, d)) / h - 0.25 * h * float(np.dot(v2, v2))

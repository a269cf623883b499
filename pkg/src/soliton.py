"""Exact ground state eta(x) = sech(x/2)/2 and continuous error measurement.

sech is evaluated as 2e^{-|x|/2} / (1 + e^{-|x|}) so nothing overflows for
large |x|, and every profile is computed from |x| to keep it exactly even.
"""

import math
from typing import Optional, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .config import Config
from .grid import Grid, StateVector

ArrayLike = Union[float, np.ndarray]

# Lagrange multiplier of -eta''/2 - eta^3 = -lambda*eta for eta = sech(x/2)/2
LAMBDA_EXACT = 0.125


def _scalar_or_array(x, result):
    return float(result) if np.ndim(x) == 0 else result


def _sech_and_tanh_half(x: ArrayLike):
    ax = np.abs(np.asarray(x, dtype=np.float64))
    e = np.exp(-0.5 * ax)
    e2 = e * e
    sech = 2.0 * e / (1.0 + e2)
    tanh_abs = (1.0 - e2) / (1.0 + e2)
    return sech, tanh_abs


def eta(x: ArrayLike) -> ArrayLike:
    """eta(x) = sech(x/2) / 2."""
    sech, _ = _sech_and_tanh_half(x)
    return _scalar_or_array(x, 0.5 * sech)


def eta_prime(x: ArrayLike) -> ArrayLike:
    """eta'(x) = -sech(x/2) tanh(x/2) / 4."""
    sech, tanh_abs = _sech_and_tanh_half(x)
    return _scalar_or_array(x, -0.25 * sech * tanh_abs * np.sign(x))


def eta_second(x: ArrayLike) -> ArrayLike:
    """eta''(x) = (s - 2 s^3) / 8 with s = sech(x/2)."""
    sech, _ = _sech_and_tanh_half(x)
    return _scalar_or_array(x, 0.125 * (sech - 2.0 * sech ** 3))


def stationary_residual(x: ArrayLike, lam: float) -> ArrayLike:
    """-eta''/2 - eta^3 + lam*eta, which vanishes identically for lam = 1/8."""
    e = eta(x)
    return -0.5 * eta_second(x) - e ** 3 + lam * e


def lambda_exact() -> float:
    """Multiplier of the unit-mass soliton, 1/8."""
    return LAMBDA_EXACT


def sample_soliton(grid: Grid) -> StateVector:
    """eta at the grid nodes; exactly symmetric because eta depends on |x| only."""
    return StateVector(grid, np.asarray(eta(grid.nodes)))


class PiecewiseLinear:
    """The hat-function interpolant i_h psi = sum_j psi_j s(x/h - j).

    Supported on |x| < (K+1)h; reproduces psi_j at x = jh.
    """

    def __init__(self, psi: StateVector):
        grid = psi.grid
        self.h = grid.h
        self.K = grid.K
        self._x = np.arange(-grid.K - 1, grid.K + 2) * grid.h
        self._v = np.concatenate(([0.0], psi.values, [0.0]))

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return _scalar_or_array(x, np.interp(x, self._x, self._v, left=0.0, right=0.0))

    def derivative(self, x: ArrayLike) -> ArrayLike:
        """Cellwise slope; at nodes the slope of the cell to the right."""
        xs = np.asarray(x, dtype=np.float64)
        cell = np.floor(xs / self.h).astype(np.int64)
        inside = (cell >= -self.K - 1) & (cell <= self.K)
        idx = np.clip(cell + self.K + 1, 0, len(self._v) - 2)
        slope = (self._v[idx + 1] - self._v[idx]) / self.h
        return _scalar_or_array(x, np.where(inside, slope, 0.0))


def embed(psi: StateVector) -> PiecewiseLinear:
    """Piecewise linear interpolant of psi, zero beyond the cutoff."""
    return PiecewiseLinear(psi)


def _gauss_cells(left: np.ndarray, width: float, order: int):
    t, w = leggauss(order)
    s = 0.5 * (1.0 + t)
    x = left[:, None] + width * s[None, :]
    return s, x, 0.5 * width * w


def h1_error_vs_exact(psi: StateVector, order: Optional[int] = None, tail_extent: Optional[float] = None) -> float:
    """Continuous H1(R) norm of i_h psi - eta by per-cell Gauss-Legendre quadrature.

    Covers the 2K+2 cells carrying the interpolant, then the tail
    (K+1)h <= |x| <= max((K+1)h, tail_extent) where only eta contributes.
    Beyond the tail eta^2 + eta'^2 < e^-80 and is dropped.
    """
    order = order or Config.QUADRATURE_ORDER
    tail_extent = Config.TAIL_EXTENT if tail_extent is None else tail_extent
    grid = psi.grid
    h, K = grid.h, grid.K

    # Cells [jh, (j+1)h] for j = -K-1..K; node values padded with the cutoff zeros.
    j = np.arange(-K - 1, K + 1)
    v = np.concatenate(([0.0], psi.values, [0.0]))
    s, x, w = _gauss_cells(j * h, h, order)
    v_left = v[:-1][:, None]
    v_right = v[1:][:, None]
    interp = v_left * (1.0 - s[None, :]) + v_right * s[None, :]
    slope = (v_right - v_left) / h
    integrand = (interp - eta(x)) ** 2 + (slope - eta_prime(x)) ** 2
    total = float(np.sum(integrand * w[None, :]))

    support = (K + 1) * h
    x_tail = max(support, tail_extent)
    n_tail = int(math.ceil((x_tail - support) / h - 1e-12))
    if n_tail > 0:
        left = support + np.arange(n_tail) * h
        _, xt, wt = _gauss_cells(left, h, order)
        tail = float(np.sum((eta(xt) ** 2 + eta_prime(xt) ** 2) * wt[None, :]))
        # both tails, eta and eta'^2 are even
        total += 2.0 * tail

    return math.sqrt(total)

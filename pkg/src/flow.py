"""Normalized gradient flow: iterate a time step then project back to N_h = 1.

Convergence is declared on the ground-state residual
||Delta_h psi/2 + psi^3 - lambda_h(psi) psi||, which measures the distance
to the stationary lattice equation independently of the scheme. Schemes
whose fixed point is a modified soliton never reach a small residual; they
stop on stagnation of consecutive iterates instead.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .config import Config
from .errors import (
    BlowUpError,
    DegenerateStateError,
    FlowAbortedError,
    GroundStateNonConvergenceError,
    ImagTimeError,
)
from .grid import (
    Grid,
    StateVector,
    h_distance,
    hamiltonian_h,
    inner,
    l2_sq,
    laplacian,
)
from .integrators import SchemeKind, normalize, step
from .soliton import h1_error_vs_exact, sample_soliton

UNIT_NORM_TOL = 1e-10
MIN_TOL = 1e-14


class InitKind(Enum):
    SOLITON = "soliton-sample"
    PERTURBED = "perturbed"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FlowConfig:
    scheme: SchemeKind = SchemeKind.LINEARLY_IMPLICIT
    tau: float = 0.1
    max_iters: int = 100_000
    tol_residual: float = 1e-12
    init: InitKind = InitKind.PERTURBED
    eps: float = 0.05
    seed: int = 0
    record_every: int = 1
    tol_stagnation: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.tau <= 1):
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol_residual < MIN_TOL:
            raise ValueError(f"tol_residual must be >= {MIN_TOL}, got {self.tol_residual}")
        if not (0 <= self.eps <= 0.5):
            raise ValueError(f"eps must lie in [0, 0.5], got {self.eps}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if self.tol_stagnation is not None and self.tol_stagnation <= 0:
            raise ValueError(f"tol_stagnation must be positive, got {self.tol_stagnation}")


@dataclass(frozen=True)
class FlowRecord:
    n: int
    energy: float
    prenorm_l2sq: float
    residual: float
    lambda_h: float
    increment: float
    err_ref: Optional[float] = None
    err_exact: Optional[float] = None


@dataclass
class FlowTrace:
    records: List[FlowRecord] = field(default_factory=list)
    final_state: Optional[StateVector] = None
    converged: bool = False
    iterations_used: int = 0
    exit_reason: str = "max_iters"

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)


@dataclass(frozen=True)
class GroundStateRef:
    """Converged discrete ground state eta_{h,K} with its multiplier."""

    state: StateVector
    lambda_h: float
    residual: float
    grid: Grid
    iterations: int = 0
    tol: float = 1e-13


def _check_unit(psi: StateVector, what: str) -> None:
    n2 = l2_sq(psi)
    if abs(n2 - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{what} must have unit N_h, got N_h = {n2!r}")


def _advance(psi: StateVector, tau: float, scheme: SchemeKind) -> Tuple[StateVector, StateVector]:
    star = step(psi, tau, scheme)
    return star, normalize(star)


def gradient_step(psi: StateVector, tau: float, scheme: SchemeKind) -> StateVector:
    """One normalized gradient step: normalize(step_scheme(psi, tau))."""
    _check_unit(psi, "gradient_step input")
    return _advance(psi, tau, scheme)[1]


def _stationary_operator(psi: StateVector) -> StateVector:
    """Delta_h psi / 2 + psi^3."""
    return psi.with_values(0.5 * laplacian(psi).values + psi.values ** 3)


def lambda_and_residual(psi: StateVector) -> Tuple[float, float]:
    """Rayleigh multiplier lambda_h(psi) and the residual of the stationary equation."""
    n2 = l2_sq(psi)
    if n2 <= 0.0:
        raise DegenerateStateError("Multiplier undefined for the zero state")
    g = _stationary_operator(psi)
    lam = inner(g, psi) / n2
    residual = math.sqrt(l2_sq(g - lam * psi))
    return lam, residual


def perturbation_bump(grid: Grid) -> StateVector:
    """Fixed symmetric bump g_l = exp(-(l h)^2)."""
    x = grid.nodes
    return StateVector(grid, np.exp(-(x * x)))


def init_state(grid: Grid, kind: InitKind = InitKind.PERTURBED, eps: float = 0.05, seed: int = 0) -> StateVector:
    """Unit-norm symmetric initial data built around the sampled soliton."""
    base = sample_soliton(grid)
    if kind is InitKind.SOLITON:
        return normalize(base)
    if kind is InitKind.PERTURBED:
        return normalize(base + eps * perturbation_bump(grid))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.size)
    noise = 0.5 * (noise + noise[::-1])
    return normalize(base + eps * StateVector(grid, noise))


def _record(n: int, psi: StateVector, star: StateVector, lam: float, residual: float,
            increment: float, reference: Optional[GroundStateRef], exact_error: bool) -> FlowRecord:
    return FlowRecord(
        n=n,
        energy=hamiltonian_h(psi),
        prenorm_l2sq=l2_sq(star),
        residual=residual,
        lambda_h=lam,
        increment=increment,
        err_ref=h_distance(psi, reference.state) if reference is not None else None,
        err_exact=h1_error_vs_exact(psi) if exact_error else None,
    )


def run_flow(psi0: StateVector, config: FlowConfig, reference: Optional[GroundStateRef] = None,
             exact_error: bool = False) -> FlowTrace:
    """Iterate gradient steps until the residual (or stagnation) tolerance or max_iters.

    Diagnostics are recorded every `record_every` iterations and always for
    the last one. Step failures abort with FlowAbortedError carrying the
    partial trace.
    """
    _check_unit(psi0, "Initial state")
    if reference is not None and reference.grid != psi0.grid:
        raise ValueError("Reference ground state lives on a different grid")

    trace = FlowTrace()
    psi = psi0
    for n in range(1, config.max_iters + 1):
        try:
            star, new = _advance(psi, config.tau, config.scheme)
        except ImagTimeError as e:
            trace.final_state = psi
            trace.iterations_used = n - 1
            raise FlowAbortedError(f"Flow aborted at iteration {n}: {e}", trace) from e

        increment = h_distance(new, psi)
        psi = new
        lam, residual = lambda_and_residual(psi)

        if residual <= config.tol_residual:
            trace.exit_reason = "residual"
        elif config.tol_stagnation is not None and increment <= config.tol_stagnation:
            trace.exit_reason = "stagnation"
        done = trace.exit_reason != "max_iters" or n == config.max_iters

        if n % config.record_every == 0 or done:
            trace.records.append(_record(n, psi, star, lam, residual, increment, reference, exact_error))
        if done:
            break

    trace.final_state = psi
    trace.iterations_used = n
    trace.converged = trace.exit_reason != "max_iters"
    return trace


def compute_ground_state(grid: Grid, tau: float = 0.5, tol: float = 1e-13,
                         max_iters: int = 100_000) -> GroundStateRef:
    """Discrete ground state eta_{h,K} by the linearly implicit flow from the sampled soliton."""
    if tol < MIN_TOL:
        raise ValueError(f"tol must be >= {MIN_TOL}, got {tol}")
    config = FlowConfig(
        scheme=SchemeKind.LINEARLY_IMPLICIT,
        tau=tau,
        max_iters=max_iters,
        tol_residual=tol,
        init=InitKind.SOLITON,
        record_every=max_iters,
    )
    trace = run_flow(init_state(grid, InitKind.SOLITON), config)
    last = trace.records[-1]
    if not trace.converged:
        raise GroundStateNonConvergenceError(last.residual, trace.iterations_used)
    return GroundStateRef(
        state=trace.final_state,
        lambda_h=last.lambda_h,
        residual=last.residual,
        grid=grid,
        iterations=trace.iterations_used,
        tol=tol,
    )


def reference_ground_state(grid: Grid, tol: Optional[float] = None) -> GroundStateRef:
    """compute_ground_state with the configured reference step and tolerance."""
    return compute_ground_state(
        grid,
        tau=Config.GROUND_STATE_TAU,
        tol=Config.GROUND_STATE_TOL if tol is None else tol,
        max_iters=Config.GROUND_STATE_MAX_ITERS,
    )


def cngf_rhs(psi: StateVector) -> StateVector:
    """Projection of Delta_h psi/2 + psi^3 onto the tangent space of the sphere at psi."""
    n2 = l2_sq(psi)
    if n2 <= 0.0:
        raise DegenerateStateError("Normalized flow undefined for the zero state")
    g = _stationary_operator(psi)
    unit = psi * (1.0 / math.sqrt(n2))
    return g - inner(g, unit) * unit


def integrate_cngf(psi0: StateVector, dt: float, T: float) -> StateVector:
    """Classical RK4 on d/dt psi = cngf_rhs(psi), renormalized after each step."""
    if not (dt > 0 and T > 0):
        raise ValueError(f"dt and T must be positive, got dt={dt}, T={T}")
    _check_unit(psi0, "Initial state")
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    psi = psi0
    for k in range(1, steps + 1):
        try:
            k1 = cngf_rhs(psi)
            k2 = cngf_rhs(psi + (0.5 * dt) * k1)
            k3 = cngf_rhs(psi + (0.5 * dt) * k2)
            k4 = cngf_rhs(psi + dt * k3)
        except ValueError:
            # a stage left the finite range
            raise BlowUpError(k * dt)
        raw = psi.values + (dt / 6.0) * (k1.values + 2.0 * k2.values + 2.0 * k3.values + k4.values)
        if not np.all(np.isfinite(raw)):
            raise BlowUpError(k * dt)
        psi = normalize(psi.with_values(raw))
    return psi

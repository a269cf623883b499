"""Orchestrates the experiments behind each CLI subcommand.

Every subcommand produces one CsvReport. Sweep points are independent and
run through a process pool; Pool.map keeps results in sweep order so the
file does not depend on the worker count.
"""

import time
import uuid
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .analysis import fit_exponential_rate, fit_power_slope, min_eigenvalue_A
from .config import Config
from .errors import (
    FlowAbortedError,
    GroundStateNonConvergenceError,
    ImagTimeError,
    InsufficientDataError,
    ReportWriteError,
)
from .flow import (
    MIN_TOL,
    FlowConfig,
    GroundStateRef,
    InitKind,
    compute_ground_state,
    init_state,
    integrate_cngf,
    reference_ground_state,
    run_flow,
)
from .grid import Grid, h_distance
from .integrators import SchemeKind
from .observability import ObservabilityManager
from .report_generator import CsvReport, write_csv
from .run_spec import RunSpec, grids_for_kh
from .soliton import h1_error_vs_exact

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3

SOLVE_COLUMNS = ["n", "t", "energy_Hh", "residual", "lambda_h", "err_ref_h1disc", "err_exact_h1cont"]
GROUND_STATE_COLUMNS = ["h", "K", "lambda_h", "residual", "iterations"]
SWEEP_COLUMNS = ["h", "K", "lambda_h", "residual", "iterations", "h1_error"]
COERCIVITY_COLUMNS = ["h", "K", "lambda_h", "min_eigenvalue"]
TAU_COLUMNS = ["tau", "scheme", "iterations", "converged", "fixed_point_distance", "rate", "r_squared"]
CNGF_COLUMNS = ["tau", "steps", "discrepancy"]

REFERENCE_RATE_WINDOW = (1e-10, 1e-2)
INCREMENT_RATE_WINDOW = (1e-12, 1e-3)


def _ground_state_point(args: Tuple[float, int, float, bool]) -> Dict[str, Any]:
    h, K, tol, with_error = args
    result = {"h": h, "K": K, "lambda_h": None, "residual": None, "iterations": None,
              "h1_error": None, "error": None}
    try:
        ref = compute_ground_state(Grid(h, K), tau=Config.GROUND_STATE_TAU, tol=tol,
                                   max_iters=Config.GROUND_STATE_MAX_ITERS)
    except GroundStateNonConvergenceError as e:
        result.update(residual=e.last_residual, iterations=e.iterations, error=str(e))
        return result
    except ImagTimeError as e:
        result["error"] = f"h={h}, K={K}: {str(e)}"
        return result
    result.update(lambda_h=ref.lambda_h, residual=ref.residual, iterations=ref.iterations)
    if with_error:
        result["h1_error"] = h1_error_vs_exact(ref.state)
    return result


def _coercivity_point(args: Tuple[float, int, float]) -> Dict[str, Any]:
    h, K, tol = args
    result = {"h": h, "K": K, "lambda_h": None, "min_eigenvalue": None, "iterations": 0, "error": None}
    try:
        ref = compute_ground_state(Grid(h, K), tau=Config.GROUND_STATE_TAU, tol=tol,
                                   max_iters=Config.GROUND_STATE_MAX_ITERS)
        result.update(lambda_h=ref.lambda_h, iterations=ref.iterations,
                      min_eigenvalue=min_eigenvalue_A(ref))
    except ImagTimeError as e:
        result["error"] = f"h={h}, K={K}: {str(e)}"
    return result


def _tau_point(args: Tuple[GroundStateRef, float, str, RunSpec]) -> Dict[str, Any]:
    """One flow run at step tau with the given scheme, measured against the reference."""
    ref, tau, scheme_name, spec = args
    scheme = SchemeKind.parse(scheme_name)
    linear = scheme is SchemeKind.LINEARLY_IMPLICIT
    stagnation = spec.tol_stagnation
    if stagnation is None and not linear:
        stagnation = Config.STAGNATION_TOL
    config = FlowConfig(
        scheme=scheme,
        tau=tau,
        max_iters=spec.max_iters,
        tol_residual=spec.tol,
        init=InitKind(spec.init),
        eps=spec.eps,
        seed=spec.seed,
        tol_stagnation=stagnation,
    )
    result = {"tau": tau, "scheme": scheme_name, "iterations": None, "converged": False,
              "fixed_point_distance": None, "rate": None, "r_squared": None, "error": None}
    psi0 = init_state(ref.grid, config.init, config.eps, config.seed)
    try:
        trace = run_flow(psi0, config, reference=ref if linear else None)
    except FlowAbortedError as e:
        result.update(iterations=e.trace.iterations_used, error=f"{scheme_name} at tau={tau}: {str(e)}")
        return result

    result.update(
        iterations=trace.iterations_used,
        converged=trace.converged,
        fixed_point_distance=h_distance(trace.final_state, ref.state),
    )
    if not trace.converged:
        result["error"] = f"{scheme_name} at tau={tau} stopped after {trace.iterations_used} iterations"
    try:
        if linear:
            fit = fit_exponential_rate(trace, tau, window=REFERENCE_RATE_WINDOW, field="err_ref")
        else:
            fit = fit_exponential_rate(trace, tau, window=INCREMENT_RATE_WINDOW, field="increment")
        result.update(rate=fit.rate, r_squared=fit.r_squared)
    except InsufficientDataError:
        pass
    return result


def _cngf_point(args: Tuple[Any, Any, float, float]) -> Dict[str, Any]:
    psi0, target, tau, T = args
    steps = max(1, int(round(T / tau)))
    config = FlowConfig(tau=tau, max_iters=steps, tol_residual=MIN_TOL, record_every=steps)
    result = {"tau": tau, "steps": steps, "discrepancy": None, "error": None}
    try:
        trace = run_flow(psi0, config)
    except FlowAbortedError as e:
        result["error"] = f"tau={tau}: {str(e)}"
        return result
    result["discrepancy"] = h_distance(trace.final_state, target)
    return result


class ExperimentRunner:
    """Runs one RunSpec, writes its CSV and records the session in the ledger."""

    def __init__(self, observability: Optional[ObservabilityManager] = None):
        self.observability = observability or ObservabilityManager()
        self._handlers: Dict[str, Callable[[RunSpec, str], Tuple[CsvReport, List[str]]]] = {
            "solve": self._solve,
            "ground-state": self._ground_state,
            "sweep-h": self._sweep_h,
            "sweep-k": self._sweep_k,
            "sweep-tau": self._sweep_tau,
            "compare-schemes": self._compare_schemes,
            "coercivity": self._coercivity,
            "cngf-check": self._cngf_check,
        }

    def execute(self, spec: RunSpec) -> int:
        """Run the experiment; returns the process exit code (0, 1, 2 or 3)."""
        session_id = str(uuid.uuid4())
        started = time.time()
        self.observability.start_session(session_id, spec.subcommand, spec.to_dict())

        try:
            report, problems = self._handlers[spec.subcommand](spec, session_id)
        except ValueError as e:
            self.observability.log_error(session_id, str(e))
            self.observability.end_session(session_id, "error")
            raise

        for problem in problems:
            self.observability.log_error(session_id, problem)
        if problems:
            report.add_comment(f"not converged: {'; '.join(problems)}")

        try:
            write_csv(report, spec.out)
        except ReportWriteError as e:
            self.observability.log_error(session_id, str(e))
            self.observability.end_session(session_id, "error")
            raise

        status = "nonconverged" if problems else "success"
        self.observability.end_session(session_id, status, rows=len(report.rows),
                                       runtime=round(time.time() - started, 3))
        return EXIT_NONCONVERGED if problems else EXIT_OK

    def _map(self, worker: Callable[[Any], Dict[str, Any]], points: Sequence[Any],
             spec: RunSpec) -> List[Dict[str, Any]]:
        workers = min(Config.worker_count(spec.workers), len(points))
        if workers <= 1:
            return [worker(p) for p in points]
        with Pool(processes=workers) as pool:
            return pool.map(worker, points)

    def _log_points(self, session_id: str, results: Sequence[Dict[str, Any]]) -> List[str]:
        problems = []
        for result in results:
            iterations = result.get("iterations") or 0
            self.observability.log_flow_run(session_id, iterations, result["error"] is None)
            if result["error"]:
                problems.append(result["error"])
        return problems

    def _solve(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        grid = Grid(spec.h, spec.K)
        config = FlowConfig(
            scheme=SchemeKind.parse(spec.scheme),
            tau=spec.tau,
            max_iters=spec.max_iters,
            tol_residual=spec.tol,
            init=InitKind(spec.init),
            eps=spec.eps,
            seed=spec.seed,
            record_every=spec.record_every,
            tol_stagnation=spec.tol_stagnation,
        )
        report = CsvReport(header=list(SOLVE_COLUMNS))
        problems: List[str] = []

        reference = None
        if spec.reference:
            try:
                reference = reference_ground_state(grid)
            except GroundStateNonConvergenceError as e:
                return report, [f"reference ground state: {str(e)}"]

        psi0 = init_state(grid, config.init, config.eps, config.seed)
        try:
            trace = run_flow(psi0, config, reference=reference, exact_error=spec.reference)
        except FlowAbortedError as e:
            trace = e.trace
            problems.append(str(e))

        for r in trace.records:
            report.add_row([r.n, r.n * spec.tau, r.energy, r.residual, r.lambda_h, r.err_ref, r.err_exact])
        self.observability.log_flow_run(session_id, trace.iterations_used, trace.converged)
        if not problems and not trace.converged:
            last = trace.records[-1].residual if trace.records else float("nan")
            problems.append(f"residual {last:.3e} above tol {spec.tol:.1e} after {trace.iterations_used} iterations")
        return report, problems

    def _ground_state(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        result = _ground_state_point((spec.h, spec.K, spec.tol, False))
        report = CsvReport(header=list(GROUND_STATE_COLUMNS))
        if result["iterations"] is not None:
            report.add_row([result[c] for c in GROUND_STATE_COLUMNS])
        return report, self._log_points(session_id, [result])

    def _sweep(self, grids: Sequence[Tuple[float, int]], spec: RunSpec,
               session_id: str) -> Tuple[CsvReport, List[Dict[str, Any]], List[str]]:
        results = self._map(_ground_state_point, [(h, K, spec.tol, True) for h, K in grids], spec)
        report = CsvReport(header=list(SWEEP_COLUMNS))
        for result in results:
            report.add_row([result[c] for c in SWEEP_COLUMNS])
        return report, results, self._log_points(session_id, results)

    def _sweep_h(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        report, results, problems = self._sweep(grids_for_kh(spec.h_list, spec.kh), spec, session_id)
        pairs = [(r["h"], r["h1_error"]) for r in results if r["h1_error"] is not None]
        if len(pairs) >= 3:
            fit = fit_power_slope(pairs)
            report.add_comment(f"order={fit.order!r} r_squared={fit.r_squared!r}")
        return report, problems

    def _sweep_k(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        grids = [grids_for_kh([spec.h], kh)[0] for kh in spec.kh_list]
        report, _, problems = self._sweep(grids, spec, session_id)
        return report, problems

    def _coercivity(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        grids = grids_for_kh(spec.h_list, spec.kh) if spec.h_list else [(spec.h, spec.K)]
        results = self._map(_coercivity_point, [(h, K, spec.tol) for h, K in grids], spec)
        report = CsvReport(header=list(COERCIVITY_COLUMNS))
        for result in results:
            report.add_row([result[c] for c in COERCIVITY_COLUMNS])
        return report, self._log_points(session_id, results)

    def _tau_report(self, spec: RunSpec, session_id: str,
                    points: Sequence[Tuple[float, str]]) -> Tuple[CsvReport, List[str]]:
        report = CsvReport(header=list(TAU_COLUMNS))
        try:
            ref = reference_ground_state(Grid(spec.h, spec.K))
        except GroundStateNonConvergenceError as e:
            return report, [f"reference ground state: {str(e)}"]
        results = self._map(_tau_point, [(ref, tau, scheme, spec) for tau, scheme in points], spec)
        for result in results:
            report.add_row([result[c] for c in TAU_COLUMNS])
        return report, self._log_points(session_id, results)

    def _sweep_tau(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        return self._tau_report(spec, session_id, [(tau, spec.scheme) for tau in spec.tau_list])

    def _compare_schemes(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        taus = spec.tau_list or (spec.tau,)
        points = [(tau, scheme.value) for tau in taus for scheme in SchemeKind]
        return self._tau_report(spec, session_id, points)

    def _cngf_check(self, spec: RunSpec, session_id: str) -> Tuple[CsvReport, List[str]]:
        grid = Grid(spec.h, spec.K)
        psi0 = init_state(grid, InitKind(spec.init), spec.eps, spec.seed)
        report = CsvReport(header=list(CNGF_COLUMNS))
        try:
            target = integrate_cngf(psi0, spec.dt, spec.T)
        except ImagTimeError as e:
            return report, [f"continuous flow: {str(e)}"]
        results = self._map(_cngf_point, [(psi0, target, tau, spec.T) for tau in spec.tau_list], spec)
        for result in results:
            report.add_row([result[c] for c in CNGF_COLUMNS])
        values = [r["discrepancy"] for r in results]
        if len(values) >= 2 and all(v for v in values):
            ratios = [a / b for a, b in zip(values, values[1:])]
            report.add_comment("ratios=" + ",".join(repr(r) for r in ratios))
        return report, self._log_points(session_id, results)

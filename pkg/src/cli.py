import sys
from typing import Any, Dict, Sequence

import click
from colorama import Fore, Style, init

from .config import Config
from .errors import ReportWriteError
from .experiment_runner import (
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_NONCONVERGED,
    ExperimentRunner,
)
from .observability import ObservabilityManager
from .run_spec import SUBCOMMANDS, RunSpec, validate_run_spec

# Initialize colorama for cross-platform colored output
init()

NORMALIZATION_NOTICE = (
    "Note: each step is normalized as psi / sqrt(N_h(psi)); dividing by N_h(psi) "
    "itself would not return to the unit sphere."
)

_RUN_OPTIONS = [
    click.option('--h', 'h', type=float, default=Config.DEFAULT_H, show_default=True, help='Grid spacing'),
    click.option('--K', 'K', type=int, default=Config.DEFAULT_K, show_default=True, help='Cutoff index'),
    click.option('--tau', type=float, default=Config.DEFAULT_TAU, show_default=True, help='Time step'),
    click.option('--scheme', type=click.Choice(['linimp', 'semiexp', 'fullimp']),
                 default=Config.DEFAULT_SCHEME, show_default=True, help='Time discretization'),
    click.option('--max-iters', type=int, default=Config.DEFAULT_MAX_ITERS, show_default=True,
                 help='Iteration cap per flow run'),
    click.option('--tol', type=float, default=Config.DEFAULT_TOL, show_default=True,
                 help='Residual tolerance'),
    click.option('--init', 'init', type=click.Choice(['soliton-sample', 'perturbed', 'custom']),
                 default=Config.DEFAULT_INIT, show_default=True, help='Initial data'),
    click.option('--eps', type=float, default=Config.DEFAULT_EPS, show_default=True,
                 help='Perturbation amplitude'),
    click.option('--seed', type=int, default=0, show_default=True, help='Seed for custom initial data'),
    click.option('--record-every', type=int, default=Config.DEFAULT_RECORD_EVERY, show_default=True,
                 help='Record diagnostics every N iterations'),
    click.option('--reference', is_flag=True, help='Measure errors against the discrete and exact ground state'),
    click.option('--tol-stagnation', type=float, default=None,
                 help='Stop once consecutive iterates differ by less than this'),
    click.option('--h-list', default=None, help='Comma separated grid spacings'),
    click.option('--kh', type=float, default=Config.DEFAULT_KH, show_default=True,
                 help='Physical half-extent K*h for h sweeps'),
    click.option('--kh-list', default=None, help='Comma separated K*h values'),
    click.option('--tau-list', default=None, help='Comma separated time steps'),
    click.option('--dt', type=float, default=Config.DEFAULT_DT, show_default=True,
                 help='RK4 step of the continuous flow'),
    click.option('--T', 'T', type=float, default=Config.DEFAULT_T, show_default=True,
                 help='Physical time for cngf-check'),
    click.option('--workers', type=int, default=None, help='Worker processes for sweeps'),
    click.option('--out', '-o', required=True, help='Output CSV path'),
]


def run_options(func):
    for option in reversed(_RUN_OPTIONS):
        func = option(func)
    return func


def build_run_spec(subcommand: str, params: Dict[str, Any]) -> RunSpec:
    """Validate click parameters; range violations become usage errors (exit 2)."""
    try:
        return validate_run_spec({**params, "subcommand": subcommand})
    except ValueError as e:
        raise click.UsageError(str(e))


def parse_args(argv: Sequence[str]) -> RunSpec:
    """Parse `<subcommand> [options]` into a validated RunSpec without running it."""
    argv = list(argv)
    if not argv:
        raise click.UsageError("Missing subcommand")
    name, rest = argv[0], argv[1:]
    command = cli.commands.get(name)
    if name not in SUBCOMMANDS or command is None:
        raise click.UsageError(f"No such subcommand: {name}")
    ctx = command.make_context(name, rest)
    return build_run_spec(name, ctx.params)


def _run(subcommand: str, params: Dict[str, Any]) -> None:
    spec = build_run_spec(subcommand, params)
    click.echo(f"{Fore.CYAN}{NORMALIZATION_NOTICE}{Style.RESET_ALL}", err=True)

    try:
        Config.validate()
        code = ExperimentRunner().execute(spec)
    except ReportWriteError as e:
        click.echo(f"{Fore.RED}✗ {str(e)}{Style.RESET_ALL}", err=True)
        sys.exit(EXIT_IO_ERROR)
    except ValueError as e:
        click.echo(f"{Fore.RED}✗ Configuration error: {str(e)}{Style.RESET_ALL}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    if code == EXIT_NONCONVERGED:
        click.echo(f"{Fore.YELLOW}⚠ Not converged; partial results written to {spec.out}{Style.RESET_ALL}", err=True)
    else:
        click.echo(f"{Fore.GREEN}✓ Results written to {spec.out}{Style.RESET_ALL}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version="1.0.0")
def cli():
    """Imaginary-time ground state solver for the 1D focusing cubic NLS."""
    pass


@cli.command()
@run_options
def solve(**params):
    """Run one normalized gradient flow and record its diagnostics."""
    _run("solve", params)


@cli.command(name="ground-state")
@run_options
def ground_state(**params):
    """Compute the discrete ground state and its multiplier."""
    _run("ground-state", params)


@cli.command(name="sweep-h")
@run_options
def sweep_h(**params):
    """Spatial convergence at fixed K*h."""
    _run("sweep-h", params)


@cli.command(name="sweep-k")
@run_options
def sweep_k(**params):
    """Cutoff convergence at fixed h."""
    _run("sweep-k", params)


@cli.command(name="sweep-tau")
@run_options
def sweep_tau(**params):
    """Convergence rate of one scheme across time steps."""
    _run("sweep-tau", params)


@cli.command(name="compare-schemes")
@run_options
def compare_schemes(**params):
    """Fixed points and rates of all three schemes."""
    _run("compare-schemes", params)


@cli.command()
@run_options
def coercivity(**params):
    """Smallest eigenvalue of the linearized operator on the tangent space."""
    _run("coercivity", params)


@cli.command(name="cngf-check")
@run_options
def cngf_check(**params):
    """Discrepancy between the discrete flow and the continuous normalized flow."""
    _run("cngf-check", params)


@cli.command()
@click.option('--limit', '-l', default=5, help='Number of recent sessions to show')
def sessions(limit):
    """Show recent runs from the session ledger."""
    manager = ObservabilityManager()
    summary = manager.get_metrics_summary()
    recent = manager.get_recent_sessions(limit)

    click.echo(f"{Fore.CYAN}Recent Sessions ({len(recent)}){Style.RESET_ALL}")
    click.echo("=" * 40)
    click.echo(f"Total Runs: {summary['total_runs']}")
    click.echo(f"Success Rate: {Fore.GREEN}{summary['success_rate']}%{Style.RESET_ALL}")
    click.echo(f"Average Runtime: {summary['average_runtime']}s")
    click.echo()

    for session in recent:
        status = session.get('status', 'Unknown')
        status_color = Fore.GREEN if status == 'success' else Fore.YELLOW if status == 'nonconverged' else Fore.RED
        click.echo(f"Session: {session.get('session_id', 'Unknown')[:8]}...")
        click.echo(f"  Command: {session.get('subcommand', 'Unknown')}")
        click.echo(f"  Status: {status_color}{status}{Style.RESET_ALL}")
        click.echo(f"  Start: {session.get('start_time', 'Unknown')}")
        click.echo(f"  End: {session.get('end_time') or 'Running...'}")
        click.echo(f"  Flow runs: {session.get('flow_runs', 0)}")
        click.echo(f"  Iterations: {session.get('iterations', 0):,}")
        if session.get('errors'):
            click.echo(f"  Errors: {Fore.RED}{len(session['errors'])}{Style.RESET_ALL}")
        click.echo()


if __name__ == '__main__':
    cli()

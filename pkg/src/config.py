import os
from typing import Optional
from dotenv import load_dotenv

load_dotenv()


def _env_flag(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() not in ("0", "false", "no", "off", "")


class Config:
    """Configuration settings for the imaginary-time ground state solver."""

    BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

    # Parallel sweeps
    THREADS = os.getenv("IMAGTIME_THREADS")

    # File paths
    SCHEMA_PATH = os.path.join(BASE_DIR, "schema", "run_spec.schema.json")
    REPORTS_DIR = os.getenv("IMAGTIME_REPORTS_DIR", "reports")
    METRICS_ENABLED = _env_flag("IMAGTIME_METRICS", True)

    # Run defaults
    DEFAULT_H = 0.1
    DEFAULT_K = 400
    DEFAULT_TAU = 0.1
    DEFAULT_SCHEME = "linimp"
    DEFAULT_MAX_ITERS = 100_000
    DEFAULT_TOL = 1e-12
    DEFAULT_INIT = "perturbed"
    DEFAULT_EPS = 0.05
    DEFAULT_RECORD_EVERY = 1
    DEFAULT_KH = 40.0
    DEFAULT_DT = 1e-3
    DEFAULT_T = 5.0

    # Sweep lists used when a sweep subcommand gets none
    SWEEP_H_LIST = (0.4, 0.2, 0.1, 0.05)
    SWEEP_KH_LIST = (5.0, 10.0, 20.0, 40.0)
    SWEEP_TAU_LIST = (0.05, 0.1, 0.2)
    CNGF_TAU_LIST = (0.02, 0.01)

    # Reference ground state
    GROUND_STATE_TAU = 0.5
    GROUND_STATE_TOL = 1e-13
    GROUND_STATE_MAX_ITERS = 100_000

    # Modified-fixed-point runs stop once consecutive iterates agree this well
    STAGNATION_TOL = 1e-13

    # Numerical plumbing
    DENSE_EIGEN_MAX_K = 2048
    QUADRATURE_ORDER = 4
    TAIL_EXTENT = 80.0

    @classmethod
    def worker_count(cls, override: Optional[int] = None) -> int:
        """Resolve the sweep worker count: flag, then environment, then CPU count."""
        if override is not None:
            return max(1, int(override))
        if cls.THREADS:
            return max(1, int(cls.THREADS))
        return os.cpu_count() or 1

    @classmethod
    def validate(cls):
        """Validate that required configuration is present."""
        if cls.THREADS is not None:
            try:
                threads = int(cls.THREADS)
            except ValueError:
                raise ValueError(f"IMAGTIME_THREADS must be an integer, got {cls.THREADS!r}")
            if threads < 1:
                raise ValueError(f"IMAGTIME_THREADS must be positive, got {threads}")

        if not os.path.exists(cls.SCHEMA_PATH):
            raise ValueError(f"Run spec schema not found at {cls.SCHEMA_PATH}")

        # Create reports directory if it doesn't exist
        if cls.METRICS_ENABLED:
            os.makedirs(cls.REPORTS_DIR, exist_ok=True)

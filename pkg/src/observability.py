import json
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

import click
from colorama import Fore, Style

from .config import Config


def _empty_metrics() -> Dict[str, Any]:
    return {
        "total_runs": 0,
        "successful_runs": 0,
        "failed_runs": 0,
        "nonconverged_runs": 0,
        "total_iterations": 0,
        "average_runtime": 0.0,
        "sessions": []
    }


class ObservabilityManager:
    """Persistent ledger of CLI runs kept in REPORTS_DIR/metrics.json.

    The ledger is bookkeeping only: nothing in it feeds back into results.
    """

    def __init__(self, reports_dir: Optional[str] = None, enabled: Optional[bool] = None):
        self.enabled = Config.METRICS_ENABLED if enabled is None else enabled
        self.metrics_file = os.path.join(reports_dir or Config.REPORTS_DIR, "metrics.json")
        self.metrics = self._load_metrics() if self.enabled else _empty_metrics()

    def _load_metrics(self) -> Dict[str, Any]:
        """Load existing metrics from file."""
        if os.path.exists(self.metrics_file):
            try:
                with open(self.metrics_file, 'r') as f:
                    return json.load(f)
            except (OSError, json.JSONDecodeError):
                pass
        return _empty_metrics()

    def _save_metrics(self) -> None:
        if not self.enabled:
            return
        try:
            os.makedirs(os.path.dirname(self.metrics_file) or ".", exist_ok=True)
            with open(self.metrics_file, 'w') as f:
                json.dump(self.metrics, f, indent=2)
        except OSError as e:
            click.echo(f"{Fore.YELLOW}Warning: Failed to save metrics: {str(e)}{Style.RESET_ALL}", err=True)

    def start_session(self, session_id: str, subcommand: str, parameters: Dict[str, Any]) -> None:
        session = {
            "session_id": session_id,
            "subcommand": subcommand,
            "parameters": parameters,
            "start_time": datetime.now().isoformat(),
            "end_time": None,
            "status": "running",
            "flow_runs": 0,
            "iterations": 0,
            "nonconverged_flows": 0,
            "errors": []
        }
        self.metrics["sessions"].append(session)
        self._save_metrics()

    def _get_current_session(self, session_id: str) -> Optional[Dict[str, Any]]:
        for session in reversed(self.metrics["sessions"]):
            if session.get("session_id") == session_id:
                return session
        return None

    def log_flow_run(self, session_id: str, iterations: int, converged: bool) -> None:
        session = self._get_current_session(session_id)
        if session:
            session["flow_runs"] += 1
            session["iterations"] += int(iterations)
            if not converged:
                session["nonconverged_flows"] += 1
            self._save_metrics()

    def log_error(self, session_id: str, message: str) -> None:
        session = self._get_current_session(session_id)
        if session:
            session["errors"].append(message)
            self._save_metrics()

    def end_session(self, session_id: str, status: str, **kwargs) -> None:
        """Close a session with status success, nonconverged or error."""
        session = self._get_current_session(session_id)
        if not session:
            return

        session["end_time"] = datetime.now().isoformat()
        session["status"] = status
        for key, value in kwargs.items():
            session[key] = value

        self.metrics["total_runs"] += 1
        if status == "success":
            self.metrics["successful_runs"] += 1
        elif status == "nonconverged":
            self.metrics["nonconverged_runs"] += 1
        else:
            self.metrics["failed_runs"] += 1
        self.metrics["total_iterations"] += session.get("iterations", 0)

        start_time = datetime.fromisoformat(session["start_time"])
        end_time = datetime.fromisoformat(session["end_time"])
        runtime = (end_time - start_time).total_seconds()
        finished = len([s for s in self.metrics["sessions"] if s.get("end_time")])
        current_avg = self.metrics["average_runtime"]
        self.metrics["average_runtime"] = (current_avg * (finished - 1) + runtime) / finished

        self._save_metrics()

    def get_metrics_summary(self) -> Dict[str, Any]:
        total = self.metrics["total_runs"]
        success_rate = (self.metrics["successful_runs"] / total * 100) if total > 0 else 0
        return {
            "total_runs": total,
            "success_rate": round(success_rate, 2),
            "nonconverged_runs": self.metrics["nonconverged_runs"],
            "failed_runs": self.metrics["failed_runs"],
            "total_iterations": self.metrics["total_iterations"],
            "average_runtime": round(self.metrics["average_runtime"], 2)
        }

    def get_recent_sessions(self, limit: int = 10) -> List[Dict[str, Any]]:
        return self.metrics["sessions"][-limit:]

    def reset_metrics(self) -> None:
        """Reset all metrics (use with caution)."""
        self.metrics = _empty_metrics()
        self._save_metrics()

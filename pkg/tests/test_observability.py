import json
import os
import tempfile

from src.observability import ObservabilityManager


class TestObservabilityManager:
    """Test cases for the run session ledger."""

    def setup_method(self):
        self.temp_dir = tempfile.mkdtemp()
        self.manager = ObservabilityManager(reports_dir=self.temp_dir, enabled=True)

    def test_session_lifecycle(self):
        self.manager.start_session("s1", "solve", {"h": 0.1})
        self.manager.log_flow_run("s1", 120, True)
        self.manager.log_flow_run("s1", 80, False)
        self.manager.log_error("s1", "residual above tol")
        self.manager.end_session("s1", "nonconverged", rows=3)

        session = self.manager.get_recent_sessions(1)[0]
        assert session["status"] == "nonconverged"
        assert session["flow_runs"] == 2
        assert session["iterations"] == 200
        assert session["nonconverged_flows"] == 1
        assert session["errors"] == ["residual above tol"]
        assert session["rows"] == 3

        summary = self.manager.get_metrics_summary()
        assert summary["total_runs"] == 1
        assert summary["nonconverged_runs"] == 1
        assert summary["total_iterations"] == 200
        assert summary["success_rate"] == 0

    def test_persisted_and_reloaded(self):
        self.manager.start_session("s2", "ground-state", {})
        self.manager.end_session("s2", "success")
        with open(os.path.join(self.temp_dir, "metrics.json")) as f:
            data = json.load(f)
        assert data["successful_runs"] == 1

        reloaded = ObservabilityManager(reports_dir=self.temp_dir, enabled=True)
        assert reloaded.get_metrics_summary()["success_rate"] == 100.0

    def test_unknown_session_is_ignored(self):
        self.manager.end_session("missing", "success")
        self.manager.log_flow_run("missing", 5, True)
        assert self.manager.get_metrics_summary()["total_runs"] == 0

    def test_disabled_ledger_writes_nothing(self):
        temp_dir = tempfile.mkdtemp()
        manager = ObservabilityManager(reports_dir=temp_dir, enabled=False)
        manager.start_session("s3", "solve", {})
        manager.end_session("s3", "error")
        assert not os.path.exists(os.path.join(temp_dir, "metrics.json"))

    def test_reset(self):
        self.manager.start_session("s4", "solve", {})
        self.manager.end_session("s4", "error")
        self.manager.reset_metrics()
        assert self.manager.get_metrics_summary()["total_runs"] == 0
        assert self.manager.get_recent_sessions() == []

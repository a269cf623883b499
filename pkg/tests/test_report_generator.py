import os
import tempfile

import numpy as np
import pytest
from unittest.mock import patch

from src.errors import ReportWriteError
from src.report_generator import CsvReport, format_cell, parse_cell, read_csv, write_csv


class TestFormatCell:
    """Test cases for platform-independent cell formatting."""

    def test_floats_round_trip(self):
        for value in (1.0, 0.1, 1e-300, 2.0 / 3.0, -123456.789e10, np.float64(0.125)):
            text = format_cell(value)
            assert float(text) == value
        assert format_cell(1.0) == "1.0"

    def test_other_types(self):
        assert format_cell(None) == ""
        assert format_cell(True) == "true"
        assert format_cell(False) == "false"
        assert format_cell(42) == "42"
        assert format_cell(np.int64(7)) == "7"
        assert format_cell("linimp") == "linimp"

    def test_parse_cell(self):
        assert parse_cell("") is None
        assert parse_cell("true") is True
        assert parse_cell("12") == 12
        assert parse_cell("1e-05") == 1e-05
        assert parse_cell("semiexp") == "semiexp"


class TestWriteCsv:
    """Test cases for writing and re-reading reports."""

    def setup_method(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, 'run.csv')

    def test_header_only_for_empty_report(self):
        write_csv(CsvReport(header=["n", "t"]), self.path)
        with open(self.path, 'rb') as f:
            assert f.read() == b"n,t\n"

    def test_round_trip_is_bit_exact(self):
        rng = np.random.default_rng(0)
        report = CsvReport(header=["n", "value", "err"])
        for n in range(20):
            report.add_row([n, float(rng.standard_normal() * 10.0 ** int(rng.integers(-20, 20))), None])
        report.add_comment("order=1.02 r_squared=0.999")
        write_csv(report, self.path)

        back = read_csv(self.path)
        assert back.header == report.header
        assert back.rows == report.rows
        assert back.comments == ["order=1.02 r_squared=0.999"]

    def test_lf_endings_and_trailing_comment(self):
        report = CsvReport(header=["a"])
        report.add_row([1.5])
        report.add_comment("not converged: residual too large")
        write_csv(report, self.path)
        with open(self.path, 'rb') as f:
            content = f.read()
        assert b"\r" not in content
        assert content.endswith(b"# not converged: residual too large\n")

    def test_deterministic_bytes(self):
        report = CsvReport(header=["x"], rows=[[0.1], [1e-17]])
        other = os.path.join(self.temp_dir, 'again.csv')
        write_csv(report, self.path)
        write_csv(report, other)
        with open(self.path, 'rb') as a, open(other, 'rb') as b:
            assert a.read() == b.read()

    def test_row_width_checked(self):
        report = CsvReport(header=["a", "b"])
        with pytest.raises(ValueError):
            report.add_row([1])

    def test_io_failure_names_path(self):
        with patch('builtins.open', side_effect=PermissionError("denied")):
            with pytest.raises(ReportWriteError) as excinfo:
                write_csv(CsvReport(header=["a"]), self.path)
        assert self.path in str(excinfo.value)
        assert excinfo.value.path == self.path

import csv
import os
from dataclasses import dataclass, field
from typing import Any, List, Sequence

from .errors import ReportWriteError


@dataclass
class CsvReport:
    """Header row, data rows and trailing '#' comment lines of one CSV file."""

    header: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    comments: List[str] = field(default_factory=list)

    def add_row(self, row: Sequence[Any]) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"Row has {len(row)} cells, header has {len(self.header)}")
        self.rows.append(list(row))

    def add_comment(self, text: str) -> None:
        self.comments.append(text)

    def column(self, name: str) -> List[Any]:
        index = self.header.index(name)
        return [row[index] for row in self.rows]


def format_cell(value: Any) -> str:
    """Platform-independent cell text.

    Floats use the shortest repr that parses back to the same double.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        if hasattr(value, "dtype") and value.dtype.kind in "iu":
            return str(int(value))
        return repr(float(value))
    return str(value)


def parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(report: CsvReport, path: str) -> None:
    """Write UTF-8, comma separated, LF terminated; header first, comments last."""
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(report.header)
            for row in report.rows:
                writer.writerow([format_cell(v) for v in row])
            for comment in report.comments:
                f.write(f"# {comment}\n")
    except OSError as e:
        raise ReportWriteError(path, e) from e


def read_csv(path: str) -> CsvReport:
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = f.read().split("\n")
    data = [line for line in lines if line and not line.startswith("#")]
    comments = [line[1:].strip() for line in lines if line.startswith("#")]
    if not data:
        raise ValueError(f"No header row in {path}")
    parsed = list(csv.reader(data))
    report = CsvReport(header=parsed[0], comments=comments)
    for row in parsed[1:]:
        report.add_row([parse_cell(cell) for cell in row])
    return report

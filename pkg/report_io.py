import csv
import json
import logging
from pathlib import Path
from typing import IO, Iterable

from openpyxl import Workbook
from openpyxl.styles import Font

from errors import ConfigurationError, ReportIOError
from models import CheckResult, CorpusReport

logger = logging.getLogger(__name__)

HEADERS = [
    "Function",
    "Check",
    "Status",
    "LHS",
    "RHS",
    "Ratio",
    "SE",
    "Samples",
    "Meta",
]

TRACE_HEADERS = ["path_id", "t", "f_t", "event"]
HEADER_FONT = Font(bold=True)


def _cells(r: CheckResult) -> list:
    return [
        r.function,
        r.check,
        r.status.value,
        r.lhs,
        r.rhs,
        r.ratio,
        r.se,
        r.n_samples,
        json.dumps(r.meta, sort_keys=True) if r.meta else "",
    ]


def dump_jsonl(report: CorpusReport, stream: IO[str]):
    """Environment header line, then one CheckResult per line."""
    stream.write(json.dumps({"environment": report.environment}, sort_keys=True) + "\n")
    for r in report.results:
        stream.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def write_jsonl(report: CorpusReport, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            dump_jsonl(report, f)
    except OSError as e:
        raise ReportIOError(f"cannot write report {path}: {e}")
    logger.info(f"Wrote {len(report.results)} rows to {path}")
    return path


def read_jsonl(path: str | Path) -> CorpusReport:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ReportIOError(f"cannot read report {path}: {e}")

    report = CorpusReport(environment={})
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if "environment" in record and "check" not in record:
                report.environment = record["environment"]
            else:
                report.results.append(CheckResult.from_dict(record))
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise ReportIOError(f"{path}:{lineno}: not a report record ({e})")
    return report


def merge_reports(reports: Iterable[CorpusReport], allow_mixed: bool = False) -> CorpusReport:
    """Merge reports; a later (function, check) row replaces an earlier one.

    Reports from different environments are rejected unless allow_mixed.
    """
    reports = list(reports)
    if not reports:
        raise ConfigurationError("nothing to merge")
    base = reports[0].environment
    mixed = [r.environment for r in reports[1:] if r.environment != base]
    if mixed and not allow_mixed:
        keys = sorted({k for env in mixed for k in set(env) | set(base) if env.get(k) != base.get(k)})
        raise ConfigurationError(f"reports come from different environments (differs in: {', '.join(keys)})")

    rows: dict[tuple, CheckResult] = {}
    for report in reports:
        for r in report.results:
            rows[(r.function, r.check)] = r

    environment = dict(base)
    if mixed:
        environment["mixed"] = [base] + mixed
        logger.warning(f"Merged {len(reports)} reports from {len(mixed) + 1} environments")
    return CorpusReport(environment=environment, results=list(rows.values()))


def write_xlsx(report: CorpusReport, path: str | Path) -> tuple[Path, Path]:
    """Workbook with a bold-header Checks sheet and an Environment sheet, plus a CSV mirror."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")

    wb = Workbook()
    ws = wb.active
    ws.title = "Checks"
    ws.append(HEADERS)
    # Bold headers
    for cell in ws[1]:
        cell.font = HEADER_FONT
    rows = [_cells(r) for r in report.results]
    for row in rows:
        ws.append(row)

    env = wb.create_sheet("Environment")
    env.append(["Key", "Value"])
    for cell in env[1]:
        cell.font = HEADER_FONT
    for key, value in sorted(report.environment.items()):
        env.append([key, value if isinstance(value, (int, float, str)) else json.dumps(value)])

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        wb.save(str(path))
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(HEADERS)
            writer.writerows(rows)
    except OSError as e:
        raise ReportIOError(f"cannot write spreadsheet {path}: {e}")

    logger.info(f"Exported {len(rows)} rows to {path} and {csv_path}")
    return path, csv_path


def write_trace_csv(traces: Iterable[tuple[int, list]], stream: IO[str]):
    """traces: (path_id, [(t, f_t, event), ...]) per path."""
    writer = csv.writer(stream)
    writer.writerow(TRACE_HEADERS)
    for path_id, rows in traces:
        for t, value, event in rows:
            writer.writerow([path_id, repr(float(t)), repr(float(value)), event])


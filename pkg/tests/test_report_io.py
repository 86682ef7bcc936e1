import csv
import io
import json

import pytest
from openpyxl import load_workbook

import report_io
from errors import ConfigurationError, ReportIOError
from models import CheckResult, CheckStatus, CorpusReport

ENV = {"version": "1.0.0", "seed": 42, "eps": 1e-6, "n_paths": 1000}


def _result(check="poincare", status=CheckStatus.PASS, lhs=1.0, function="majority:3", **meta):
    return CheckResult(function=function, check=check, lhs=lhs, rhs=1.5, ratio=lhs / 1.5, status=status,
                       meta=meta)


@pytest.fixture
def report():
    return CorpusReport(environment=dict(ENV), results=[
        _result(),
        _result("kkl_ratio", CheckStatus.REPORT, lhs=0.7, note="x"),
        _result("variance_via_qv", CheckStatus.FAIL, lhs=2.0),
    ])


class TestJsonl:

    def test_header_line(self, report):
        buf = io.StringIO()
        report_io.dump_jsonl(report, buf)
        lines = buf.getvalue().splitlines()
        assert json.loads(lines[0]) == {"environment": ENV}
        assert len(lines) == 4
        assert json.loads(lines[3])["status"] == "fail"

    def test_write_then_read(self, report, tmp_path):
        path = report_io.write_jsonl(report, tmp_path / "sub" / "r.jsonl")
        back = report_io.read_jsonl(path)
        assert back.environment == ENV
        assert [r.to_dict() for r in back.results] == [r.to_dict() for r in report.results]
        assert back.counts() == {"pass": 1, "fail": 1, "report": 1}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ReportIOError):
            report_io.read_jsonl(tmp_path / "missing.jsonl")

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"environment": {}}\nnot json\n')
        with pytest.raises(ReportIOError):
            report_io.read_jsonl(path)

    def test_unknown_status(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"function": "f", "check": "c", "status": "maybe"}) + "\n")
        with pytest.raises(ReportIOError):
            report_io.read_jsonl(path)


class TestMerge:

    def test_later_rows_win(self, report):
        newer = CorpusReport(environment=dict(ENV), results=[_result(lhs=1.25), _result("parseval")])
        merged = report_io.merge_reports([report, newer])
        rows = {r.check: r for r in merged.results}
        assert len(merged.results) == 4
        assert rows["poincare"].lhs == 1.25
        assert "mixed" not in merged.environment

    def test_mixed_environments(self, report):
        other = CorpusReport(environment={**ENV, "seed": 7}, results=[_result()])
        with pytest.raises(ConfigurationError, match="seed"):
            report_io.merge_reports([report, other])
        merged = report_io.merge_reports([report, other], allow_mixed=True)
        assert len(merged.environment["mixed"]) == 2

    def test_nothing_to_merge(self):
        with pytest.raises(ConfigurationError):
            report_io.merge_reports([])


class TestSpreadsheet:

    def test_workbook_and_csv(self, report, tmp_path):
        xlsx, csv_path = report_io.write_xlsx(report, tmp_path / "report.xlsx")
        assert csv_path.suffix == ".csv"
        wb = load_workbook(xlsx)
        ws = wb["Checks"]
        assert [c.value for c in ws[1]] == report_io.HEADERS
        assert all(c.font.bold for c in ws[1])
        assert all(c.font.bold for c in wb["Environment"][1])
        assert ws.max_row == 4
        env = {row[0]: row[1] for row in wb["Environment"].iter_rows(min_row=2, values_only=True)}
        assert env["seed"] == 42
        with open(csv_path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == report_io.HEADERS
        assert rows[2][1] == "kkl_ratio"
        assert json.loads(rows[2][8]) == {"note": "x"}


class TestTraces:

    def test_trace_csv(self):
        buf = io.StringIO()
        report_io.write_trace_csv([(0, [(0.001, -0.001, "grid"), (1.0, 1.0, "grid")])], buf)
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert rows[0] == report_io.TRACE_HEADERS
        assert rows[1] == ["0", "0.001", "-0.001", "grid"]
        assert rows[2] == ["0", "1.0", "1.0", "grid"]

import sqlite3

import pytest

import database
from models import CheckResult, CheckStatus, CorpusReport

ENV = {"version": "1.0.0", "seed": 42, "eps": 1e-6, "n_paths": 1000}


def _report(n_fail=0):
    rows = [
        CheckResult(function="majority:3", check="poincare", lhs=1.0, rhs=1.5, ratio=2 / 3,
                    status=CheckStatus.PASS),
        CheckResult(function="majority:3", check="kkl_ratio", lhs=0.69, rhs=1.5, ratio=0.46,
                    status=CheckStatus.REPORT, meta={"note": "fitted"}),
    ]
    rows += [
        CheckResult(function="parity:3", check="variance_via_qv", lhs=1.2, rhs=1.0, ratio=1.2,
                    status=CheckStatus.FAIL, se=0.01, n_samples=1000)
        for _ in range(n_fail)
    ]
    return CorpusReport(environment=dict(ENV), results=rows)


class TestLedger:

    def test_failed_insert_rolls_back_and_closes(self, ledger, monkeypatch):
        opened = []
        real_get_db = database.get_db

        def tracking_get_db():
            opened.append(real_get_db())
            return opened[-1]

        def broken_checks(db, run_id, results):
            raise RuntimeError("disk full")

        monkeypatch.setattr(database, "get_db", tracking_get_db)
        monkeypatch.setattr(database, "record_checks", broken_checks)
        with pytest.raises(RuntimeError):
            database.record_run(_report(), "verify", ["majority:3"])
        with pytest.raises(sqlite3.ProgrammingError):
            opened[0].execute("SELECT 1")
        assert database.get_runs() == []

    def test_record_and_list(self, ledger):
        first = database.record_run(_report(), "verify", ["majority:3"])
        second = database.record_run(_report(n_fail=1), "verify", ["majority:3", "parity:3"], report_path="r.jsonl")
        assert second > first
        runs = database.get_runs()
        assert [r["id"] for r in runs] == [second, first]
        assert runs[0]["corpus"] == "majority:3,parity:3"
        assert runs[0]["n_fail"] == 1
        assert runs[0]["report_path"] == "r.jsonl"
        assert runs[1]["n_pass"] == 1
        assert runs[1]["n_report"] == 1
        assert runs[1]["seed"] == 42

    def test_failed_only(self, ledger):
        database.record_run(_report(), "verify", ["majority:3"])
        failing = database.record_run(_report(n_fail=2), "verify", ["parity:3"])
        runs = database.get_runs(failed_only=True)
        assert [r["id"] for r in runs] == [failing]

    def test_limit(self, ledger):
        for _ in range(3):
            database.record_run(_report(), "verify", ["majority:3"])
        assert len(database.get_runs(limit=2)) == 2

    def test_rebuild_report(self, ledger):
        report = _report(n_fail=1)
        run_id = database.record_run(report, "verify", ["majority:3"])
        back = database.get_run_report(run_id)
        assert back.environment == ENV
        assert [r.to_dict() for r in back.results] == [r.to_dict() for r in report.results]

    def test_unknown_run(self, ledger):
        assert database.get_run_report(999) is None

    def test_check_history(self, ledger):
        database.record_run(_report(n_fail=1), "verify", ["parity:3"])
        database.record_run(_report(n_fail=1), "verify", ["parity:3"])
        rows = database.get_check_history("variance_via_qv")
        assert len(rows) == 2
        assert rows[0]["run_id"] > rows[1]["run_id"]
        assert database.get_check_history("poincare", function="parity:3") == []

    def test_status_constraint(self, ledger):
        db = database.get_db()
        with pytest.raises(sqlite3.IntegrityError):
            db.execute(
                "INSERT INTO checks (run_id, function, check_id, status) VALUES (1, 'f', 'c', 'maybe')"
            )
        db.close()

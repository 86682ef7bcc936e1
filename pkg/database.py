import json
import sqlite3
import time
from contextlib import closing
from typing import Optional

import config
from models import CheckResult, CorpusReport

DB_PATH = config.BFA_DB_PATH

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    timestamp REAL NOT NULL,
    command TEXT NOT NULL,
    corpus TEXT NOT NULL,
    seed INTEGER NOT NULL,
    n_paths INTEGER NOT NULL,
    eps REAL NOT NULL,
    environment TEXT NOT NULL,
    n_pass INTEGER NOT NULL DEFAULT 0,
    n_fail INTEGER NOT NULL DEFAULT 0,
    n_report INTEGER NOT NULL DEFAULT 0,
    report_path TEXT
);

CREATE TABLE IF NOT EXISTS checks (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_id INTEGER NOT NULL REFERENCES runs(id),
    function TEXT NOT NULL,
    check_id TEXT NOT NULL,
    status TEXT NOT NULL CHECK(status IN ('pass', 'fail', 'report')),
    lhs REAL,
    rhs REAL,
    ratio REAL,
    se REAL,
    n_samples INTEGER,
    meta TEXT
);

CREATE INDEX IF NOT EXISTS idx_checks_run ON checks(run_id);
CREATE INDEX IF NOT EXISTS idx_checks_status ON checks(status);
CREATE INDEX IF NOT EXISTS idx_checks_function ON checks(function);
"""


def get_db() -> sqlite3.Connection:
    DB_PATH.parent.mkdir(parents=True, exist_ok=True)
    db = sqlite3.connect(str(DB_PATH))
    db.row_factory = sqlite3.Row
    db.execute("PRAGMA journal_mode=WAL")
    db.execute("PRAGMA foreign_keys=ON")
    return db


def init_db():
    with closing(get_db()) as db:
        db.executescript(SCHEMA)


def record_run(report: CorpusReport, command: str, corpus: list[str], report_path: Optional[str] = None) -> int:
    """Store a finished run and all of its rows in one transaction. Returns the run id."""
    env = report.environment
    counts = report.counts()
    with closing(get_db()) as db, db:
        cur = db.execute(
            """INSERT INTO runs
            (timestamp, command, corpus, seed, n_paths, eps, environment,
             n_pass, n_fail, n_report, report_path)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)""",
            (time.time(), command, ",".join(corpus), env.get("seed", 0), env.get("n_paths", 0),
             env.get("eps", 0.0), json.dumps(env, sort_keys=True),
             counts["pass"], counts["fail"], counts["report"], report_path),
        )
        run_id = cur.lastrowid
        record_checks(db, run_id, report.results)
    return run_id


def record_checks(db: sqlite3.Connection, run_id: int, results: list[CheckResult]):
    db.executemany(
        """INSERT INTO checks
        (run_id, function, check_id, status, lhs, rhs, ratio, se, n_samples, meta)
        VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)""",
        [
            (run_id, r.function, r.check, r.status.value, r.lhs, r.rhs, r.ratio, r.se,
             r.n_samples, json.dumps(r.meta, sort_keys=True))
            for r in results
        ],
    )


def get_runs(limit: int = 20, failed_only: bool = False) -> list[dict]:
    """Most recent runs first."""
    query = """
        SELECT id, timestamp, command, corpus, seed, n_paths, eps,
               n_pass, n_fail, n_report, report_path
        FROM runs
        WHERE 1=1
    """
    params = []
    if failed_only:
        query += " AND n_fail > 0"
    query += " ORDER BY id DESC LIMIT ?"
    params.append(limit)
    with closing(get_db()) as db:
        rows = db.execute(query, params).fetchall()
    return [dict(r) for r in rows]


def get_run_report(run_id: int) -> Optional[CorpusReport]:
    """Rebuild the CorpusReport of a stored run; None if the id is unknown."""
    with closing(get_db()) as db:
        run = db.execute("SELECT environment FROM runs WHERE id = ?", (run_id,)).fetchone()
        if not run:
            return None
        rows = db.execute(
            """SELECT function, check_id, status, lhs, rhs, ratio, se, n_samples, meta
            FROM checks WHERE run_id = ? ORDER BY id""",
            (run_id,),
        ).fetchall()
    results = [
        CheckResult.from_dict({
            "function": r["function"], "check": r["check_id"], "status": r["status"],
            "lhs": r["lhs"], "rhs": r["rhs"], "ratio": r["ratio"], "se": r["se"],
            "n_samples": r["n_samples"], "meta": json.loads(r["meta"]) if r["meta"] else {},
        })
        for r in rows
    ]
    return CorpusReport(environment=json.loads(run["environment"]), results=results)


def get_check_history(check_id: str, function: Optional[str] = None, limit: int = 50) -> list[dict]:
    """A check's rows across runs, newest first."""
    query = """
        SELECT c.run_id, r.timestamp, c.function, c.status, c.lhs, c.rhs, c.ratio, c.se
        FROM checks c
        JOIN runs r ON r.id = c.run_id
        WHERE c.check_id = ?
    """
    params: list = [check_id]
    if function:
        query += " AND c.function = ?"
        params.append(function)
    query += " ORDER BY c.run_id DESC LIMIT ?"
    params.append(limit)
    with closing(get_db()) as db:
        rows = db.execute(query, params).fetchall()
    return [dict(r) for r in rows]

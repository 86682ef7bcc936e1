import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import database
import families
from models import RunConfig


@pytest.fixture
def ledger(tmp_path, monkeypatch):
    """Point the sqlite ledger at a fresh file."""
    path = tmp_path / "runs.db"
    monkeypatch.setattr(database, "DB_PATH", path)
    database.init_db()
    return path


@pytest.fixture
def maj3():
    return families.make("majority:3")


@pytest.fixture
def small_run():
    return RunConfig(command="verify", n_paths=200, eps=1e-6, seed=7, workers=1).validate()

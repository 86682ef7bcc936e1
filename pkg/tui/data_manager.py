"""Shared state between the background verify runner and the TUI widgets."""

import asyncio
import time
from dataclasses import dataclass, field
from typing import Optional

import config
from models import CheckStatus, ScanStage

MAX_STAGE_LOG = 2000


@dataclass
class RunSnapshot:
    """Summary of one finished verify run."""
    timestamp: float = 0.0
    corpus: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    duration: float = 0.0
    run_id: Optional[int] = None
    error: Optional[str] = None


class DataManager:
    """Thread-safe shared state for the TUI."""

    def __init__(self, corpus: list[str], n_paths: int = 10000, seed: int = config.BFA_SEED,
                 workers: int = config.BFA_WORKERS):
        self._lock = asyncio.Lock()
        self.corpus = corpus
        self.n_paths = n_paths
        self.seed = seed
        self.workers = workers
        self.current_run: Optional[RunSnapshot] = None
        self.run_count: int = 0
        self.start_time: float = time.time()
        self.status: str = "STARTING"  # STARTING, RUNNING, DONE, ERROR
        self.last_error: Optional[str] = None
        self.current_function: str = ""
        self.functions_done: int = 0
        # Live counts for the run in progress
        self.counts: dict = {s.value: 0 for s in CheckStatus}
        self.results: list[dict] = []
        self.recent_runs: list[dict] = []
        self.stage_log: list[ScanStage] = []
        self.force_run: asyncio.Event = asyncio.Event()
        self._on_update = None
        self._on_stage = None

    def set_update_callback(self, callback):
        self._on_update = callback

    def set_stage_callback(self, callback):
        self._on_stage = callback

    def reset_run(self):
        self.stage_log = []
        self.results = []
        self.counts = {s.value: 0 for s in CheckStatus}
        self.functions_done = 0
        self.current_function = ""

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.results if r["status"] == CheckStatus.FAIL.value]

    async def push_stage(self, stage: ScanStage):
        async with self._lock:
            self.stage_log.append(stage)
            if len(self.stage_log) > MAX_STAGE_LOG:
                self.stage_log = self.stage_log[-MAX_STAGE_LOG:]
            if stage.name == "check":
                self.results.append(stage.data)
                self.counts[stage.data["status"]] += 1
            elif stage.name == "load_function":
                if self.current_function:
                    self.functions_done += 1
                self.current_function = stage.data.get("function", "")
        if self._on_stage:
            self._on_stage(stage)

    async def update_run(self, snapshot: RunSnapshot):
        async with self._lock:
            self.current_run = snapshot
            self.run_count += 1
            if snapshot.error:
                self.status = "ERROR"
                self.last_error = snapshot.error
            else:
                self.status = "DONE"
                self.functions_done = len(snapshot.corpus)
            self.current_function = ""
        if self._on_update:
            self._on_update()

    async def set_status(self, status: str):
        async with self._lock:
            self.status = status
        if self._on_update:
            self._on_update()

    async def update_history(self, recent_runs: list[dict]):
        async with self._lock:
            self.recent_runs = recent_runs

    @property
    def uptime_str(self) -> str:
        elapsed = int(time.time() - self.start_time)
        hours, rem = divmod(elapsed, 3600)
        mins, secs = divmod(rem, 60)
        if hours:
            return f"{hours}:{mins:02d}:{secs:02d}"
        return f"{mins}:{secs:02d}"

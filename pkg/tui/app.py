"""Main Textual application for the verification dashboard."""

import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional

from textual.app import App, ComposeResult
from textual.containers import Horizontal, Vertical
from textual.message import Message
from textual.widgets import Footer, Static

import config
from tui.data_manager import DataManager
from tui.scheduler import run_verify_loop
from tui.widgets.check_table import CheckTable
from tui.widgets.header_bar import HeaderBar
from tui.widgets.run_log import RunLog
from tui.widgets.sidebar import Sidebar


HELP_TEXT = """
[bold #00ff00]∂ Boolean Pathwise: Help[/]

[bold #00aa00]What This Does[/]
Runs the check suite over a corpus of Boolean
functions: exact Fourier identities, constant-free
inequalities, Monte Carlo checks on the jump
process, and fitted constants for the bounds that
only assert existence.

[bold #00aa00]Statuses[/]
[bold #00ff00]✓ pass[/]    Holds exactly, or within 3 standard errors
[bold #ff5555]✗ fail[/]    Violated
[#888888]· report[/]  Fitted constant or degenerate case

[bold #00aa00]Keys[/]
[#00cc00]Q[/]  Quit    [#00cc00]R[/]  Re-run corpus
[#00cc00]F[/]  Toggle failures only
[#00cc00]H[/]  Toggle help
"""


class HelpPanel(Static):
    """Overlay help panel."""

    def render(self):
        return HELP_TEXT


class StageUpdated(Message):
    """Posted when a new pipeline stage arrives."""

    def __init__(self, stage):
        super().__init__()
        self.stage = stage


class VerifyDashboard(App):
    """Terminal dashboard over a verify run."""

    class DataUpdated(Message):
        """Posted when the DataManager has new data."""

    CSS_PATH = str(Path(__file__).parent / "styles.tcss")
    TITLE = "Boolean Pathwise"
    BINDINGS = [
        ("q", "quit", "Quit"),
        ("r", "rerun", "Re-run"),
        ("f", "toggle_failures", "Failures"),
        ("h", "toggle_help", "Help"),
    ]

    def __init__(
        self,
        corpus: Optional[list[str]] = None,
        n_paths: int = 10000,
        seed: int = config.BFA_SEED,
        workers: int = config.BFA_WORKERS,
        autostart: bool = True,
        record: bool = True,
    ):
        super().__init__()
        # Remove console handlers to prevent log output from corrupting TUI display
        for handler in logging.root.handlers[:]:
            if isinstance(handler, logging.StreamHandler) and handler.stream in (sys.stdout, sys.stderr):
                logging.root.removeHandler(handler)
        self.dm = DataManager(list(corpus or config.DEFAULT_CORPUS), n_paths=n_paths, seed=seed, workers=workers)
        self.dm.set_update_callback(self._on_data_update)
        self.dm.set_stage_callback(self._on_stage_update)
        self._autostart = autostart
        self._record = record
        self._run_task = None
        self._help_visible = False
        self._failures_only = False
        self._table_dirty = False

    def compose(self) -> ComposeResult:
        yield HeaderBar(id="header")
        with Horizontal(id="main-container"):
            yield Sidebar(self.dm, id="sidebar")
            with Vertical(id="main-area"):
                yield RunLog(id="run-log", highlight=True, markup=False, auto_scroll=True)
                yield CheckTable(id="check-table")
                yield HelpPanel(id="help-panel")
        yield Footer()

    def on_mount(self):
        self.query_one("#help-panel").display = False
        run_log: RunLog = self.query_one("#run-log", RunLog)
        run_log.log_line("Verification dashboard starting up...", style="bold #00ff00")
        run_log.log_line("Press H for help  •  R to re-run  •  Q to quit", style="#555555")
        if self._autostart:
            self._run_task = asyncio.create_task(run_verify_loop(self.dm, record=self._record))
        self.set_interval(1.0, self._tick)

    def on_unmount(self):
        if self._run_task:
            self._run_task.cancel()

    def _on_data_update(self):
        """Called from DataManager when a run finishes. Post message to UI."""
        self.post_message(self.DataUpdated())

    def _on_stage_update(self, stage):
        """Called from DataManager when a new stage arrives."""
        self.post_message(StageUpdated(stage))

    def on_stage_updated(self, message: StageUpdated):
        run_log: RunLog = self.query_one("#run-log", RunLog)
        run_log.log_stage(message.stage, show_passes=not self._failures_only)
        if message.stage.name == "check":
            self._table_dirty = True
        self._refresh_header()

    def on_verify_dashboard_data_updated(self, message: DataUpdated):
        self._refresh_ui()

    def _refresh_header(self):
        header: HeaderBar = self.query_one("#header", HeaderBar)
        header.status = self.dm.status
        header.current_function = self.dm.current_function
        header.progress = f"{self.dm.functions_done}/{len(self.dm.corpus)}" if self.dm.status == "RUNNING" else ""
        header.n_pass = self.dm.counts["pass"]
        header.n_fail = self.dm.counts["fail"]
        header.n_report = self.dm.counts["report"]

    def _refresh_table(self):
        table: CheckTable = self.query_one("#check-table", CheckTable)
        table.update_checks(self.dm.results, failures_only=self._failures_only)
        self._table_dirty = False

    def _refresh_ui(self):
        """Refresh all widgets with latest data."""
        self._refresh_header()
        self._refresh_table()
        run = self.dm.current_run
        if run and run.error:
            self.query_one("#run-log", RunLog).log_error(run.error)
        self.query_one("#sidebar", Sidebar).refresh()

    def _tick(self):
        """Clock, uptime and batched table refresh."""
        self.query_one("#header", HeaderBar).refresh()
        self.query_one("#sidebar", Sidebar).refresh()
        if self._table_dirty:
            self._refresh_table()

    def action_rerun(self):
        if self.dm.status == "RUNNING":
            return
        self.dm.force_run.set()
        self.query_one("#run-log", RunLog).log_line("Re-run requested...", style="bold #ffff00")

    def action_toggle_failures(self):
        self._failures_only = not self._failures_only
        self._refresh_table()
        label = "failures only" if self._failures_only else "all rows"
        self.query_one("#run-log", RunLog).log_line(f"Showing {label}", style="#555555")

    def action_toggle_help(self):
        help_panel = self.query_one("#help-panel")
        self._help_visible = not self._help_visible
        help_panel.display = self._help_visible
        self.query_one("#check-table").display = not self._help_visible

"""Left sidebar with run status, settings, counts and ledger history."""

from datetime import datetime

from textual.widgets import Static
from rich.text import Text


def _row(t: Text, label: str, value: str, val_style: str = "#00ff00"):
    """Append a label: value row."""
    t.append(f" {label:<15}", style="#007700")
    t.append(f"{value}\n", style=val_style)


def _heading(t: Text, title: str):
    t.append(f"── {title} ", style="bold #00aa00")
    t.append("─" * max(0, 18 - len(title)) + "\n", style="#003300")


class Sidebar(Static):
    """Left sidebar showing engine status, settings, live counts and recent runs."""

    def __init__(self, data_manager, **kwargs):
        super().__init__(**kwargs)
        self.dm = data_manager

    def render(self) -> Text:
        dm = self.dm
        t = Text()

        _heading(t, "STATUS")
        status_styles = {
            "RUNNING": "bold #ffff00",
            "DONE": "bold #00ff00",
            "STARTING": "#555555",
            "ERROR": "bold #ff0000",
        }
        _row(t, "Engine", dm.status, status_styles.get(dm.status, "#555555"))
        _row(t, "Uptime", dm.uptime_str)
        _row(t, "Runs", str(dm.run_count))
        _row(t, "Functions", f"{dm.functions_done}/{len(dm.corpus)}")

        _heading(t, "SETTINGS")
        _row(t, "Paths", f"{dm.n_paths:,}")
        _row(t, "Seed", str(dm.seed))
        _row(t, "Workers", str(dm.workers))

        _heading(t, "THIS RUN")
        counts = dm.counts
        if sum(counts.values()):
            _row(t, "Pass", str(counts["pass"]))
            _row(t, "Fail", str(counts["fail"]), "bold #ff5555" if counts["fail"] else "#555555")
            _row(t, "Report", str(counts["report"]), "#888888")
        else:
            t.append(" Waiting...\n", style="#555555")

        run = dm.current_run
        if run and run.error:
            _heading(t, "LAST ERROR")
            t.append(f" {run.error[:60]}\n", style="#ff5555")
        elif run:
            _heading(t, "LAST RUN")
            _row(t, "Duration", f"{run.duration:.1f}s")
            if run.run_id is not None:
                _row(t, "Ledger id", f"#{run.run_id}")

        _heading(t, "HISTORY")
        if dm.recent_runs:
            for r in dm.recent_runs[:5]:
                when = datetime.fromtimestamp(r["timestamp"]).strftime("%m-%d %H:%M")
                style = "#ff5555" if r["n_fail"] else "#00cc00"
                t.append(f" #{r['id']:<4}", style="#00aa00")
                t.append(f"{when} ", style="#006600")
                t.append(f"{r['n_pass']}✓ {r['n_fail']}✗\n", style=style)
        else:
            t.append(" No recorded runs\n", style="#555555")

        return t

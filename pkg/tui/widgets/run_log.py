"""Scrolling log of verify stages in the main area."""

from datetime import datetime

from textual.widgets import RichLog
from rich.text import Text

from models import ScanStage

STATUS_STYLES = {
    "pass": ("✓", "#00cc00"),
    "fail": ("✗", "bold #ff5555"),
    "report": ("·", "#888888"),
}


def _fmt(x) -> str:
    if x is None:
        return "-"
    return f"{x:.6g}"


class RunLog(RichLog):
    """Scrolling log of corpus, function and check stages."""

    def log_line(self, message: str, style: str = "#00cc00"):
        ts = datetime.now().strftime("%-I:%M:%S%p").lower()
        line = Text()
        line.append(f" {ts}  ", style="#006600")
        line.append(message, style=style)
        self.write(line)

    def log_stage(self, stage: ScanStage, show_passes: bool = True):
        """Render a pipeline stage as a real-time log entry."""
        name = stage.name
        d = stage.data

        if name == "corpus_start":
            self.write(Text(""))
            divider = Text()
            divider.append(" ─── Verify Run ", style="#00aa00")
            divider.append("─" * 44, style="#003300")
            self.write(divider)
            self.log_line(
                f"{d.get('functions', 0)} functions, seed={d.get('seed')}, paths={d.get('n_paths'):,}",
                style="#007700",
            )

        elif name == "load_function":
            self.log_line(f"{d.get('function', '?')}  (n={d.get('n', '?')})", style="bold #00cc00")

        elif name == "check":
            status = d.get("status", "report")
            if status == "pass" and not show_passes:
                return
            icon, style = STATUS_STYLES.get(status, ("·", "#555555"))
            line = Text()
            ts = datetime.now().strftime("%-I:%M:%S%p").lower()
            line.append(f" {ts}  ", style="#006600")
            line.append("  ├── ", style="#003300")
            line.append(f"{icon} ", style=style)
            line.append(f"{d.get('check', '?'):<34}", style=style)
            line.append(f" lhs={_fmt(d.get('lhs'))}", style="#006600")
            line.append(f"  rhs={_fmt(d.get('rhs'))}", style="#006600")
            if d.get("se") is not None:
                line.append(f"  se={_fmt(d['se'])}", style="#005500")
            reason = (d.get("meta") or {}).get("reason")
            if reason:
                line.append(f"  [{reason}]", style="#555555")
            self.write(line)

        elif name == "corpus_done":
            self.log_line(
                f"  └── Done: {d.get('pass', 0)} pass, {d.get('fail', 0)} fail, {d.get('report', 0)} report",
                style="bold #ff5555" if d.get("fail") else "bold #00ff00",
            )

    def log_error(self, error_msg: str):
        self.log_line(f"⚠️  {error_msg}", style="#ff5555")

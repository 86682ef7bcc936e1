"""Top header bar showing run status, current function, counts and clock."""

from datetime import datetime

from textual.reactive import reactive
from textual.widgets import Static
from rich.text import Text


STATUS_BADGES = {
    "RUNNING": (" RUNNING ", "bold #000000 on #ffff00"),
    "DONE": (" DONE ", "bold #000000 on #00ff00"),
    "STARTING": (" STARTING ", "#000000 on #555555"),
    "ERROR": (" ERROR ", "bold #ffffff on #aa0000"),
}


class HeaderBar(Static):
    """Single-line header with status, function in progress, pass/fail counts, clock."""

    status = reactive("STARTING")
    current_function = reactive("")
    progress = reactive("")
    n_pass = reactive(0)
    n_fail = reactive(0)
    n_report = reactive(0)

    def render(self) -> Text:
        t = Text()
        t.append(" ∂ BOOLEAN PATHWISE", style="bold #00ff00")

        label, style = STATUS_BADGES.get(self.status, (" IDLE ", "#555555 on #111111"))
        t.append(f"  {label}", style=style)

        if self.current_function:
            t.append(f"  {self.current_function}", style="bold #00cc00")
        if self.progress:
            t.append(f"  {self.progress}", style="#007700")

        t.append("  ", style="")
        t.append(f"✓{self.n_pass} ", style="#00ff00")
        t.append(f"✗{self.n_fail} ", style="bold #ff5555" if self.n_fail else "#444444")
        t.append(f"·{self.n_report}", style="#888888")

        now = datetime.now().strftime("%H:%M:%S")
        t.append(f"  {now}", style="#00aa00")
        return t

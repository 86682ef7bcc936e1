"""DataTable of check rows, failures first."""

from textual.widgets import DataTable

STATUS_LABELS = {
    "fail": "✗ FAIL",
    "pass": "✓ pass",
    "report": "· report",
}

STATUS_ORDER = {"fail": 0, "report": 1, "pass": 2}


def _fmt(x) -> str:
    if x is None:
        return "-"
    return f"{x:.6g}"


class CheckTable(DataTable):
    """Check rows of the current run, failures on top."""

    def on_mount(self):
        self.add_columns("Function", "Check", "Status", "LHS", "RHS", "Ratio", "SE")
        self.cursor_type = "row"
        self.zebra_stripes = True
        self.show_header = True

    def update_checks(self, results: list[dict], failures_only: bool = False, limit: int = 200):
        """Refresh the table; rows are sorted by status then function."""
        self.clear()
        rows = [r for r in results if not failures_only or r["status"] == "fail"]
        rows.sort(key=lambda r: (STATUS_ORDER.get(r["status"], 3), r["function"], r["check"]))
        for r in rows[:limit]:
            self.add_row(
                r["function"],
                r["check"],
                STATUS_LABELS.get(r["status"], r["status"]),
                _fmt(r.get("lhs")),
                _fmt(r.get("rhs")),
                _fmt(r.get("ratio")),
                _fmt(r.get("se")),
            )

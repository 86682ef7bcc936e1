"""Command-line front end.

    python3 main.py analyze --function majority:3
    python3 main.py verify --corpus default --out out/report.jsonl --xlsx out/report.xlsx
    python3 main.py paths --function majority:15 --count 5 > traces.csv
    python3 main.py report-merge a.jsonl b.jsonl 7 --out merged.jsonl
    python3 main.py history
    python3 main.py dashboard [--web]
"""

import functools
import json
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

import config
import database
import families
import report_io
from boolfn import level_weights, noise_stability, sensitivity_profile, spectral_stats, wht_forward
from errors import AnalysisError, ReportIOError, SpecError
from functionals import PathTables, path_trace
from models import CheckStatus, RunConfig, ScanStage
from paths import block_rng, sample_batch
from verify import run_corpus, talagrand_sum

logger = logging.getLogger(__name__)

NOISE_GRID = np.linspace(0.0, 1.0, 11)
# Largest n whose per-vertex sensitivity is listed by default
PER_VERTEX_MAX_N = 12


def _handle_errors(fn):
    """Map library errors onto exit codes at the command boundary."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OSError as e:
            err = ReportIOError(str(e))
            logger.error(f"{fn.__name__} failed: {err}", exc_info=True)
            click.echo(f"error: {err}", err=True)
            sys.exit(err.exit_code)
        except AnalysisError as e:
            logger.error(f"{fn.__name__} failed: {e}", exc_info=True)
            click.echo(f"error: {e}", err=True)
            sys.exit(e.exit_code)
    return wrapper


def _run_options(fn):
    """Shared Monte Carlo options."""
    options = [
        click.option("--paths", "n_paths", type=int, default=config.BFA_PATHS, show_default=True,
                     help="Monte Carlo paths per estimate"),
        click.option("--eps", type=float, default=config.BFA_EPS, show_default=True, help="Truncation time"),
        click.option("--seed", type=int, default=config.BFA_SEED, show_default=True, help="Root seed"),
        click.option("--alpha", type=float, default=0.5, show_default=True, help="Large-derivative threshold"),
        click.option("--p", "p", type=float, default=0.5, show_default=True, help="Sensitivity exponent"),
        click.option("--grid-step", type=float, default=config.BFA_GRID_STEP, show_default=True,
                     help="Scan grid on continuous segments"),
        click.option("--workers", type=int, default=config.BFA_WORKERS, show_default=True, help="Worker threads"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _write_text(out: str | None, text: str):
    if out is None:
        click.echo(text, nl=False)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Wrote {path}")


def analyze_function(spec: str, per_vertex: bool | None = None) -> dict:
    """Spectral summary of one function, as emitted by `analyze`.

    h_f(y) is listed in vertex-mask order when per_vertex is set, or by
    default when n <= PER_VERTEX_MAX_N.
    """
    f = families.make(spec)
    if per_vertex is None:
        per_vertex = f.n <= PER_VERTEX_MAX_N
    stats = spectral_stats(f)
    profile = sensitivity_profile(f, powers=(0.5, 1.0))
    W = level_weights(wht_forward(f)).W
    T = talagrand_sum(np.asarray(stats.influences))
    mu = min(float(np.mean(f.values == 1.0)), float(np.mean(f.values == -1.0)))
    iso = 2.0 * mu * math.log2(1.0 / mu) if mu > 0.0 else 0.0
    out = {
        "function": f.label,
        "n": f.n,
        "mean": stats.mean,
        "variance": stats.variance,
        "influences": stats.influences,
        "total_influence": stats.total_influence,
        "sum_sq_influences": stats.sum_sq_influences,
        "max_influence": stats.max_influence,
        "is_monotone": stats.is_monotone,
        "level_weights": [float(w) for w in W],
        "sensitivity_moments": {str(k): v for k, v in profile.moments.items()},
        "mu_boundary": profile.mu_boundary,
        "mu_plus": profile.mu_plus,
        "mu_minus": profile.mu_minus,
        "noise_stability": {f"{e:.1f}": float(s) for e, s in zip(NOISE_GRID, noise_stability(f, NOISE_GRID))},
        "talagrand_sum": T,
        "r_tal": stats.variance / T if T > 0.0 else None,
        "isoperimetry_ratio": stats.total_influence / iso if iso > 0.0 else None,
        "version": config.VERSION,
    }
    if per_vertex:
        out["sensitivity"] = [int(h) for h in profile.sensitivity]
    return out


def traces(spec: str, run: RunConfig) -> list[tuple[int, list]]:
    """(path_id, rows) for run.count sample paths of f(B_t)."""
    f = families.make(spec)
    tables = PathTables(f)
    batch = sample_batch(f.n, run.eps, run.count, block_rng(run.seed, 0), seed_tag=f"philox:{run.seed}:b0")
    return [(k, path_trace(tables, batch.path(k), run.grid_step)) for k in range(run.count)]


def _load_report(ref: str):
    """A JSONL path, or a ledger run id."""
    path = Path(ref)
    if not path.exists() and ref.isdigit():
        report = database.get_run_report(int(ref))
        if report is None:
            raise SpecError(f"no ledger run with id {ref}")
        return report
    return report_io.read_jsonl(path)


@click.group()
@click.option("--log-level", default=config.BFA_LOG_LEVEL, show_default=True, help="Logging level")
def main(log_level: str):
    """Fourier analytics and jump-process checks for Boolean functions."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--function", "spec", required=True, help="Function spec, e.g. majority:3")
@click.option("--out", default=None, help="Output file (stdout if omitted)")
@click.option("--per-vertex/--no-per-vertex", default=None,
              help=f"List h_f per vertex (default: only when n <= {PER_VERTEX_MAX_N})")
@_handle_errors
def analyze(spec: str, out: str | None, per_vertex: bool | None):
    """Spectral statistics, sensitivity, noise stability and T(f)."""
    _write_text(out, json.dumps(analyze_function(spec, per_vertex), indent=2, sort_keys=True) + "\n")


@main.command()
@click.option("--corpus", default="default", show_default=True, help="Comma-separated specs or 'default'")
@click.option("--function", "spec", default=None, help="Single function spec (overrides --corpus)")
@_run_options
@click.option("--out", default=None, help="Report JSONL (stdout if omitted)")
@click.option("--xlsx", default=None, help="Also export an .xlsx workbook and CSV mirror")
@click.option("--ledger/--no-ledger", default=True, show_default=True, help="Record the run in the sqlite ledger")
@_handle_errors
def verify(corpus, spec, n_paths, eps, seed, alpha, p, grid_step, workers, out, xlsx, ledger):
    """Run the check suite; exits 1 if any row fails."""
    specs = [spec] if spec else families.parse_corpus(corpus)
    run = RunConfig(
        command="verify", corpus=tuple(specs), n_paths=n_paths, eps=eps, seed=seed, alpha=alpha, p=p,
        grid_step=grid_step, out=out, workers=workers,
    ).validate()

    def on_stage(stage: ScanStage):
        if stage.name == "check" and stage.data.get("status") == CheckStatus.FAIL.value:
            logger.warning(f"FAIL {stage.data['function']} {stage.data['check']}: "
                           f"lhs={stage.data['lhs']} rhs={stage.data['rhs']}")

    report = run_corpus(specs, run, on_stage=on_stage)

    if out is None:
        report_io.dump_jsonl(report, sys.stdout)
    else:
        report_io.write_jsonl(report, out)
    if xlsx:
        report_io.write_xlsx(report, xlsx)
    if ledger:
        database.init_db()
        run_id = database.record_run(report, "verify", specs, report_path=out)
        logger.info(f"Recorded run {run_id} in {database.DB_PATH}")

    counts = report.counts()
    click.echo(f"{counts['pass']} pass, {counts['fail']} fail, {counts['report']} report", err=True)
    if report.failed:
        sys.exit(1)


@main.command()
@click.option("--function", "spec", required=True, help="Function spec, e.g. majority:15")
@click.option("--count", type=int, default=5, show_default=True, help="Number of sample paths")
@click.option("--eps", type=float, default=config.BFA_EPS, show_default=True, help="Truncation time")
@click.option("--seed", type=int, default=config.BFA_SEED, show_default=True, help="Root seed")
@click.option("--grid-step", type=float, default=config.BFA_GRID_STEP, show_default=True, help="Trace grid step")
@click.option("--out", default=None, help="Trace CSV (stdout if omitted)")
@_handle_errors
def paths(spec, count, eps, seed, grid_step, out):
    """CSV traces of f(B_t): path_id, t, f_t, event."""
    run = RunConfig(command="paths", function=spec, eps=eps, seed=seed, grid_step=grid_step,
                    out=out, count=count).validate()
    rows = traces(spec, run)
    if out is None:
        report_io.write_trace_csv(rows, sys.stdout)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        report_io.write_trace_csv(rows, f)
    logger.info(f"Wrote {count} traces to {path}")


@main.command("report-merge")
@click.argument("inputs", nargs=-1, required=True)
@click.option("--out", default=None, help="Merged JSONL (stdout if omitted)")
@click.option("--allow-mixed", is_flag=True, default=False, help="Merge reports from different environments")
@_handle_errors
def report_merge(inputs, out, allow_mixed):
    """Merge JSONL reports or ledger run ids; later rows win."""
    merged = report_io.merge_reports([_load_report(ref) for ref in inputs], allow_mixed=allow_mixed)
    if out is None:
        report_io.dump_jsonl(merged, sys.stdout)
    else:
        report_io.write_jsonl(merged, out)


@main.command()
@click.option("--limit", type=int, default=20, show_default=True, help="Runs to list")
@click.option("--failed", "failed_only", is_flag=True, default=False, help="Only runs with failures")
@click.option("--check", "check_id", default=None, help="Show one check across runs instead")
@click.option("--function", "spec", default=None, help="With --check, restrict to one function")
@_handle_errors
def history(limit, failed_only, check_id, spec):
    """List recorded verify runs, newest first."""
    database.init_db()
    if check_id:
        rows = database.get_check_history(check_id, function=spec, limit=limit)
        if not rows:
            click.echo(f"No rows recorded for {check_id}")
            return
        for r in rows:
            click.echo(
                f"#{r['run_id']:<4} {r['function']:<16} {r['status']:<6} "
                f"lhs={r['lhs']} rhs={r['rhs']} se={r['se']}"
            )
        return
    runs = database.get_runs(limit=limit, failed_only=failed_only)
    if not runs:
        click.echo("No runs recorded")
        return
    for r in runs:
        click.echo(
            f"#{r['id']:<4} seed={r['seed']:<6} paths={r['n_paths']:<8} "
            f"pass={r['n_pass']:<4} fail={r['n_fail']:<3} report={r['n_report']:<4} {r['corpus']}"
        )


@main.command()
@click.option("--corpus", default="default", show_default=True, help="Comma-separated specs or 'default'")
@click.option("--paths", "n_paths", type=int, default=10000, show_default=True, help="Monte Carlo paths")
@click.option("--web", is_flag=True, default=False, help="Serve in the browser via textual-serve")
@_handle_errors
def dashboard(corpus, n_paths, web):
    """Live dashboard over a verify run."""
    import dashboard as dash

    dash.launch(corpus=corpus, n_paths=n_paths, web=web)


if __name__ == "__main__":
    main()

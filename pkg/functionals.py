"""Pathwise functionals of f(B_t) and their Monte Carlo estimators.

Between jumps B_t = t*sigma for a fixed vertex sigma, so f(B_t), every
derivative and every influence process is a polynomial in t on each path
segment. The functionals below evaluate those polynomials on whole path
batches at once; the estimators run them block by block through the engine.
"""

import logging
import math
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq
from scipy.special import roots_legendre
from scipy.stats import chisquare

import config
from boolfn import (
    SegmentPolynomials,
    _check_index,
    _require_boolean,
    abs_derivative,
    abs_derivative_level_weights,
    check_dimension,
    derivative,
    derivative_level_weights,
    sensitivity,
    spectral_stats,
    time_variance,
)
from engine import merge_sums, run_blocks
from errors import ConfigurationError, ParameterError
from models import CubeFunction, GfEstimate, HesitantOverlay, MCEstimate, PathObservables, SamplePath
from paths import END, START, PathBatch, batch_from_paths, check_path_args, sample_batch

logger = logging.getLogger(__name__)

BISECT_STEPS = 60
REFINE_STEPS = 48
ROOT_TOL = 1e-10

JUMP_TEST_FUNCTIONS = ("one", "deriv_sq", "influence_sq")
MARTINGALE_TIMES = (0.25, 0.5, 0.75)


class PathTables:
    """Segment polynomials of f, of every d_i f and of every |d_i f|.

    Tables are built on first use; coordinates are 0-based here.
    """

    def __init__(self, f: CubeFunction):
        _require_boolean(f, "path functionals")
        self.f = f
        self.n = f.n
        self.value = SegmentPolynomials(f)
        self._deriv: dict[int, SegmentPolynomials] = {}
        self._infl: dict[int, SegmentPolynomials] = {}

    def derivative(self, i: int) -> SegmentPolynomials:
        if i not in self._deriv:
            self._deriv[i] = SegmentPolynomials(derivative(self.f, i + 1))
        return self._deriv[i]

    def influence(self, i: int) -> SegmentPolynomials:
        if i not in self._infl:
            self._infl[i] = SegmentPolynomials(abs_derivative(self.f, i + 1))
        return self._infl[i]

    @cached_property
    def stats(self):
        return spectral_stats(self.f)

    @cached_property
    def sensitivity(self) -> np.ndarray:
        return sensitivity(self.f)

    def grad_sq(self, masks, t) -> np.ndarray:
        """||grad f(t*sigma)||^2 for every (mask, time) pair."""
        out = np.zeros(np.broadcast(np.asarray(masks), np.asarray(t)).shape)
        for i in range(self.n):
            d = self.derivative(i).evaluate(masks, t)
            out += d * d
        return out


def tau_threshold(sum_sq_influences: float, alpha: float, p: float) -> float:
    """alpha/8 * log(2 + e/sum Inf^2)^p; infinite for constant f."""
    if sum_sq_influences <= 0.0:
        return math.inf
    return alpha / 8.0 * math.log(2.0 + math.e / sum_sq_influences) ** p


def subeps_correction(f: CubeFunction, eps: float) -> float:
    """E[f]_eps = Var(f_eps), the quadratic variation the sampler cannot see."""
    return time_variance(f, eps)


def _check_alpha_p(alpha: float, p: float):
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.5 <= p <= 1.0:
        raise ParameterError(f"p must lie in [1/2, 1], got {p}")


def _first_per_path(flag: np.ndarray, first: np.ndarray) -> np.ndarray:
    """Index of the first flagged point of every path, -1 if none."""
    big = flag.size
    idx = np.where(flag, np.arange(flag.size), big)
    j = np.minimum.reduceat(idx, first[:-1])
    return np.where(j < big, j, -1)


def _bisect(pred: Callable, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Shrink [lo, hi] around the first time pred turns true; pred(hi) holds."""
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        up = pred(mid)
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return hi


def _golden_max(fn: Callable, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.astype(np.float64), hi.astype(np.float64)
    for _ in range(REFINE_STEPS):
        c = b - g * (b - a)
        d = a + g * (b - a)
        left = fn(c) >= fn(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return 0.5 * (a + b)


def _event_influence(tables: PathTables, masks: np.ndarray, coords: np.ndarray, times: np.ndarray) -> np.ndarray:
    """f_t^(i) for the coordinate i attached to every event."""
    out = np.empty(times.size)
    for i in range(tables.n):
        sel = coords == i
        if sel.any():
            out[sel] = tables.influence(i).evaluate(masks[sel], times[sel])
    return out


def _below_pieces(c: np.ndarray, alpha: float, a: float, b: float) -> list[tuple[float, float]]:
    """Sub-intervals of [a, b] where the polynomial c stays below alpha."""
    shifted = npoly.polytrim(npoly.polysub(c, [alpha]), tol=1e-14)
    cuts = [a, b]
    if shifted.size > 1:
        for r in npoly.polyroots(shifted):
            if abs(r.imag) < 1e-9 and a < r.real < b:
                cuts.append(_polish_root(shifted, float(r.real), a, b))
    cuts = np.unique(cuts)
    pieces = []
    for u, v in zip(cuts[:-1], cuts[1:]):
        if v > u and npoly.polyval(0.5 * (u + v), shifted) < 0.0:
            pieces.append((float(u), float(v)))
    return pieces


def _polish_root(c: np.ndarray, r: float, a: float, b: float) -> float:
    lo, hi = max(a, r - 1e-6), min(b, r + 1e-6)
    flo, fhi = npoly.polyval(lo, c), npoly.polyval(hi, c)
    if flo * fhi < 0.0:
        return brentq(lambda t: npoly.polyval(t, c), lo, hi, xtol=ROOT_TOL)
    return r


def _poly_integral(c: np.ndarray, u: float, v: float) -> float:
    anti = npoly.polyint(c)
    return float(npoly.polyval(v, anti) - npoly.polyval(u, anti))


def _q_alpha(tables: PathTables, batch: PathBatch, alpha: float) -> np.ndarray:
    """Q_alpha per path: 2 int t (f_t^(i))^2 1{f_t^(i) < alpha} dt over [eps, 1]."""
    seg = batch.segments
    nodes, weights = roots_legendre(max(8, batch.n + 1))
    out = np.zeros(batch.size)
    for i in range(batch.n):
        coeffs = tables.influence(i).coefficients(seg.mask)
        for s in range(seg.start.size):
            c = coeffs[s]
            for u, v in _below_pieces(c, alpha, float(seg.start[s]), float(seg.end[s])):
                half = 0.5 * (v - u)
                x = half * nodes + 0.5 * (u + v)
                g = npoly.polyval(x, c)
                out[seg.path[s]] += half * float(np.sum(weights * 2.0 * x * g * g))
    return out


def observe_batch(
    tables: PathTables,
    batch: PathBatch,
    alpha: float = 1.0,
    p: float = 0.5,
    grid_step: float = config.BFA_GRID_STEP,
    want=frozenset(),
) -> dict:
    """Per-path observables of one batch.

    Quadratic variation and the endpoint are always computed. `want` adds:
    "alpha" (V_alpha, F_alpha), "theta", "sup", "tau", "hesitation" and "Q".

    Returns:
        Dict of arrays indexed by path (plus per-event "jump_sq").
    """
    want = set(want)
    if "tau" in want:
        want.add("sup")
    if "hesitation" in want:
        want.add("alpha")
    size, n = batch.size, batch.n
    F = tables.value
    ev_t = batch.ev_time

    jump_sq = (F.evaluate(batch.after_mask, ev_t) - F.evaluate(batch.before_mask, ev_t)) ** 2
    out = {
        "jump_sq": jump_sq,
        "qv": np.bincount(batch.ev_path, weights=jump_sq, minlength=size),
        "qv_by_coord": np.bincount(
            batch.ev_path * n + batch.ev_coord, weights=jump_sq, minlength=size * n
        ).reshape(size, n),
        "end_mask": batch.end_mask,
        "f_end": tables.f.values[batch.end_mask],
    }

    if "alpha" in want:
        infl = _event_influence(tables, batch.after_mask, batch.ev_coord, ev_t)
        small = infl < alpha
        out["event_influence"] = infl
        out["V_alpha"] = np.bincount(batch.ev_path, weights=jump_sq * small, minlength=size)
        out["F_alpha"] = np.bincount(batch.ev_path, weights=(~small).astype(np.float64), minlength=size) > 0

    if want & {"theta", "sup", "tau"}:
        sp = batch.scan_points(grid_step)
        pm = batch.segments.mask[sp.seg]
        vals = F.evaluate(pm, sp.time)
        f0 = tables.f.mean()
        if "theta" in want:
            out.update(_theta(F, batch, sp, pm, vals, jump_sq))
        if "sup" in want:
            out["sup"] = _sup(F, sp, pm, vals, f0)
        if "tau" in want:
            out.update(_tau(tables, sp, pm, vals, f0, alpha, p))
            h = tables.sensitivity[batch.end_mask].astype(np.float64)
            out["psi_end"] = np.where(h > 0, h ** p, 0.0) * out["sup"]

    if "hesitation" in want:
        out["hesitation"] = _hesitation(tables, batch, out["event_influence"], alpha)

    if "Q" in want:
        out["Q_alpha"] = _q_alpha(tables, batch, alpha)
    return out


def _theta(F, batch, sp, pm, vals, jump_sq) -> dict:
    """theta = first time f_t > 0, the value f_theta and the qv gained after it."""
    size = batch.size
    theta = np.ones(size)
    f_theta = np.full(size, np.nan)
    truncated = np.zeros(size, dtype=bool)

    j = _first_per_path(vals > 0.0, sp.first)
    hit = j >= 0
    jh = j[hit]
    at_start = sp.kind[jh] == START
    th = sp.time[jh].copy()
    fth = vals[jh].copy()
    inner = ~at_start
    if inner.any():
        ji = jh[inner]
        masks = pm[ji]
        th[inner] = _bisect(lambda t: F.evaluate(masks, t) > 0.0, sp.time[ji - 1], sp.time[ji])
        fth[inner] = F.evaluate(masks, th[inner])
    theta[hit] = th
    f_theta[hit] = fth
    truncated[hit] = at_start & (jh == sp.first[:-1][hit])

    after = batch.ev_time > theta[batch.ev_path]
    v_after = np.bincount(batch.ev_path, weights=jump_sq * after, minlength=size)
    return {"theta": theta, "theta_truncated": truncated, "f_theta": f_theta, "qv_after_theta": v_after}


def _sup(F, sp, pm, vals, f0: float) -> np.ndarray:
    """sup over [0, 1] of (1 + f_s)/2: grid maximum refined around its location."""
    v01 = 0.5 * (1.0 + vals)
    pmax = np.maximum.reduceat(v01, sp.first[:-1])
    cand = np.flatnonzero(v01 == pmax[sp.path])
    _, pos = np.unique(sp.path[cand], return_index=True)
    j = cand[pos]
    last = sp.seg.size - 1
    prev = np.maximum(j - 1, 0)
    nxt = np.minimum(j + 1, last)
    lo = np.where((j > 0) & (sp.seg[prev] == sp.seg[j]), sp.time[prev], sp.time[j])
    hi = np.where((j < last) & (sp.seg[nxt] == sp.seg[j]), sp.time[nxt], sp.time[j])
    masks = pm[j]
    x = _golden_max(lambda t: F.evaluate(masks, t), lo, hi)
    refined = 0.5 * (1.0 + F.evaluate(masks, x))
    sup = np.maximum(np.maximum(pmax, refined), 0.5 * (1.0 + f0))
    return np.clip(sup, 0.0, 1.0)


def _tau(tables: PathTables, sp, pm, vals, f0: float, alpha: float, p: float) -> dict:
    """tau_alpha: first time ||grad f_t||^(2p) * sup_{s<=t}(1+f_s)/2 crosses its threshold."""
    F = tables.value
    size = sp.first.size - 1
    thr = tau_threshold(tables.stats.sum_sq_influences, alpha, p)
    base = 0.5 * (1.0 + f0)
    v01 = 0.5 * (1.0 + vals)
    shift = 2.0 * sp.path
    running = np.maximum(np.maximum.accumulate(v01 + shift) - shift, base)
    psi = tables.grad_sq(pm, sp.time) ** p * running

    tau = np.ones(size)
    j = _first_per_path(psi > thr, sp.first)
    hit = j >= 0
    jh = j[hit]
    th = sp.time[jh].copy()
    inner = sp.kind[jh] != START
    if inner.any():
        ji = jh[inner]
        masks = pm[ji]
        prev_run = running[ji - 1]

        def crossed(t):
            level = np.maximum(prev_run, 0.5 * (1.0 + F.evaluate(masks, t)))
            return tables.grad_sq(masks, t) ** p * level > thr

        th[inner] = _bisect(crossed, sp.time[ji - 1], sp.time[ji])
    tau[hit] = th

    at_events = (sp.kind == START) | ((sp.kind == END) & (sp.time == 1.0))
    psi_max = np.maximum.reduceat(np.where(at_events, psi, 0.0), sp.first[:-1])
    return {"tau": tau, "psi_max": psi_max, "tau_threshold": thr}


def _hesitation(tables: PathTables, batch: PathBatch, infl: np.ndarray, alpha: float) -> np.ndarray:
    """First zero of the hesitant process at a coordinate with f_t^(i) >= alpha (else 1)."""
    paths = [batch.ev_path[infl >= alpha]]
    times = [batch.ev_time[infl >= alpha]]
    if batch.extra is not None:
        x_path, x_coord, x_time = batch.extra
        masks = batch.masks_at_times(x_path, x_time)
        big = _event_influence(tables, masks, x_coord, x_time) >= alpha
        paths.append(x_path[big])
        times.append(x_time[big])
    out = np.ones(batch.size)
    np.minimum.at(out, np.concatenate(paths), np.concatenate(times))
    return out


def path_observables(
    f: CubeFunction,
    path: SamplePath,
    overlay: Optional[HesitantOverlay] = None,
    alpha: float = 1.0,
    p: float = 0.5,
    grid_step: float = config.BFA_GRID_STEP,
    require_eps: Optional[float] = None,
    tables: Optional[PathTables] = None,
) -> PathObservables:
    """Every functional of f along one sampled path.

    Args:
        f: Boolean function.
        path: Sampled path.
        overlay: Hesitant extra jumps; adds the hesitation time.
        alpha: Influence threshold in (0, 1].
        p: Exponent in [1/2, 1] of the Psi process.
        grid_step: Scan step on continuous segments.
        require_eps: Latest truncation time the caller can accept.
        tables: Prebuilt polynomial tables for f.
    """
    _check_alpha_p(alpha, p)
    if require_eps is not None and path.eps > require_eps:
        raise ConfigurationError(f"path truncated at {path.eps}, functional needs paths from {require_eps}")
    if path.n != f.n:
        raise ParameterError(f"path has n={path.n}, function has n={f.n}")
    tables = tables or PathTables(f)
    batch = batch_from_paths([path], [overlay] if overlay is not None else None)
    want = {"alpha", "theta", "sup", "tau", "Q"}
    if overlay is not None:
        want.add("hesitation")
    obs = observe_batch(tables, batch, alpha=alpha, p=p, grid_step=grid_step, want=want)
    ones = np.ones(1)
    grad_end = np.array([tables.derivative(i).evaluate(batch.end_mask, ones)[0] for i in range(f.n)])
    return PathObservables(
        qv_total=float(obs["qv"][0]),
        qv_by_coord=obs["qv_by_coord"][0],
        V_alpha=float(obs["V_alpha"][0]),
        Q_alpha=float(obs["Q_alpha"][0]),
        F_alpha_hit=bool(obs["F_alpha"][0]),
        sup_process=float(obs["sup"][0]),
        theta=float(obs["theta"][0]),
        theta_truncated=bool(obs["theta_truncated"][0]),
        tau_alpha=float(obs["tau"][0]),
        psi_max=float(obs["psi_max"][0]),
        f_end=float(obs["f_end"][0]),
        grad_end=grad_end,
        jump_times=batch.ev_time.copy(),
        jump_sq=obs["jump_sq"],
        hesitation_time=float(obs["hesitation"][0]) if overlay is not None else None,
    )


def path_trace(tables: PathTables, path: SamplePath, grid_step: float) -> list[tuple[float, float, str]]:
    """(t, f_t, event) rows along one path.

    Grid rows run from eps to 1 and the last one is the endpoint value. Every
    jump gives two "jump" rows at its time: the left limit, then the new value.
    """
    batch = batch_from_paths([path])
    sp = batch.scan_points(grid_step)
    pm = batch.segments.mask[sp.seg]
    vals = tables.value.evaluate(pm, sp.time)
    rows = []
    last = sp.time.size - 1
    for k in range(sp.time.size):
        kind = sp.kind[k]
        if k == last:
            rows.append((1.0, float(tables.f.values[batch.end_mask[0]]), "grid"))
            continue
        event = "jump" if (kind == START and k > 0) or kind == END else "grid"
        rows.append((float(sp.time[k]), float(vals[k]), event))
    return rows


def _estimate(m: dict, key: str, seed: int, count_key: str = "count") -> MCEstimate:
    return MCEstimate.from_sums(float(m[key]), float(m[key + "_sq"]), int(m[count_key]), seed_tag=f"philox:{seed}")


def mc_variance_via_qv(
    f: CubeFunction,
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    on_stage=None,
) -> MCEstimate:
    """Estimate Var(f) as E[f]_1, adding the exact quadratic variation on [0, eps]."""
    if n_paths < 100:
        raise ParameterError(f"need at least 100 paths, got {n_paths}")
    check_path_args(f.n, eps)
    tables = PathTables(f)

    def kernel(size, rng, tag):
        batch = sample_batch(f.n, eps, size, rng, seed_tag=tag)
        qv = observe_batch(tables, batch)["qv"]
        return {"qv": qv.sum(), "qv_sq": (qv * qv).sum(), "count": size}

    m = merge_sums(run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"qv:{f.label}"))
    est = _estimate(m, "qv", seed)
    correction = subeps_correction(f, eps)
    logger.info(f"Quadratic variation estimate for {f.label}: {est.mean:.6f} + {correction:.3g} (se {est.std_error:.2g})")
    return MCEstimate(mean=est.mean + correction, std_error=est.std_error, n_samples=est.n_samples, seed_tag=est.seed_tag)


def jump_integral_closed(W: Optional[np.ndarray], a: float, b: float) -> float:
    """2 int_a^b t sum_k W_k t^(2k) dt; W=None stands for g = 1."""
    if W is None:
        return b * b - a * a
    k = np.arange(W.size)
    return float(np.sum(W * (b ** (2 * k + 2) - a ** (2 * k + 2)) / (k + 1)))


def mc_jump_integral_check(
    f: CubeFunction,
    i: int,
    t1: float,
    t2: float,
    g: str = "one",
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    on_stage=None,
) -> dict:
    """Both sides of E sum_{t in J_i, t1<=t<=t2} 4t^2 g_t = 2 int_t1^t2 t E g_t dt.

    Args:
        f: Boolean function.
        i: 1-based coordinate.
        t1, t2: Window with 0 <= t1 < t2 <= 1.
        g: "one", "deriv_sq" for (d_i f_t)^2 or "influence_sq" for (f_t^(i))^2.

    Returns:
        {"lhs": MCEstimate, "rhs": float, "correction": float}; the part of
        the window below eps enters lhs through the exact correction.
    """
    _check_index(f, i)
    if not 0.0 <= t1 < t2 <= 1.0:
        raise ParameterError(f"need 0 <= t1 < t2 <= 1, got ({t1}, {t2})")
    if g not in JUMP_TEST_FUNCTIONS:
        raise ParameterError(f"unknown test function {g!r}; choose from {', '.join(JUMP_TEST_FUNCTIONS)}")
    if n_paths < 100:
        raise ParameterError(f"need at least 100 paths, got {n_paths}")
    check_path_args(f.n, eps)
    if t2 <= eps:
        raise ConfigurationError(f"window [{t1}, {t2}] lies below the truncation time {eps}")

    W = None
    if g == "deriv_sq":
        W = derivative_level_weights(f)[i - 1]
    elif g == "influence_sq":
        W = abs_derivative_level_weights(f)[i - 1]
    lo = max(t1, eps)
    rhs = jump_integral_closed(W, t1, t2)
    correction = jump_integral_closed(W, t1, lo) if lo > t1 else 0.0

    tables = PathTables(f)
    poly = None
    if g == "deriv_sq":
        poly = tables.derivative(i - 1)
    elif g == "influence_sq":
        poly = tables.influence(i - 1)

    def kernel(size, rng, tag):
        batch = sample_batch(f.n, eps, size, rng, seed_tag=tag)
        sel = (batch.ev_coord == i - 1) & (batch.ev_time >= lo) & (batch.ev_time <= t2)
        t = batch.ev_time[sel]
        val = np.ones(t.size) if poly is None else poly.evaluate(batch.after_mask[sel], t) ** 2
        per_path = np.bincount(batch.ev_path[sel], weights=4.0 * t * t * val, minlength=size)
        return {"s": per_path.sum(), "s_sq": (per_path * per_path).sum(), "count": size}

    m = merge_sums(run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"jumps:{f.label}:{g}"))
    est = _estimate(m, "s", seed)
    lhs = MCEstimate(mean=est.mean + correction, std_error=est.std_error, n_samples=est.n_samples, seed_tag=est.seed_tag)
    return {"lhs": lhs, "rhs": rhs, "correction": correction}


def estimate_gf(
    f: CubeFunction,
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    grid_step: float = config.BFA_GRID_STEP,
    on_stage=None,
) -> GfEstimate:
    """g_f(y) = E[sup_s (1+f_s)/2 | B_1 = y], bucketed by endpoint vertex.

    Empty buckets hold 1 (the largest possible value) and are flagged together
    with buckets of fewer than 30 samples.
    """
    check_dimension(f.n, config.GF_MAX_N, "endpoint buckets")
    check_path_args(f.n, eps)
    if n_paths < 100 * f.size:
        logger.warning(f"g_f for {f.label}: {n_paths} paths is under 100 per vertex; buckets will be flagged")
    tables = PathTables(f)

    def kernel(size, rng, tag):
        batch = sample_batch(f.n, eps, size, rng, seed_tag=tag)
        s = observe_batch(tables, batch, grid_step=grid_step, want={"sup"})["sup"]
        end = batch.end_mask
        return {
            "sum": np.bincount(end, weights=s, minlength=f.size),
            "sum_sq": np.bincount(end, weights=s * s, minlength=f.size),
            "count": np.bincount(end, minlength=f.size).astype(np.float64),
        }

    m = merge_sums(run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"gf:{f.label}"))
    counts = m["count"]
    safe = np.maximum(counts, 1.0)
    mean = m["sum"] / safe
    var = np.maximum(m["sum_sq"] / safe - mean * mean, 0.0) * counts / np.maximum(counts - 1.0, 1.0)
    se = np.where(counts >= 2, np.sqrt(var / safe), 0.5)
    values = np.where(counts > 0, np.clip(mean, 0.0, 1.0), 1.0)
    low = counts < config.LOW_CONFIDENCE_COUNT
    if low.any():
        logger.warning(f"g_f for {f.label}: {int(low.sum())} of {f.size} buckets have under {config.LOW_CONFIDENCE_COUNT} samples")
    return GfEstimate(
        n=f.n, values=values, counts=counts.astype(np.int64), std_errors=se,
        low_confidence=low, n_samples=n_paths, seed_tag=f"philox:{seed}",
    )


def estimate_boundary_bound(
    f: CubeFunction,
    alpha: float,
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    on_stage=None,
) -> dict:
    """P[F_alpha] against the exact vertex-boundary masses, on hesitant paths.

    Also estimates P[tau < 1] and P[B_1 in the inner boundary | tau < 1] for
    the hesitation time tau.
    """
    _check_alpha_p(alpha, 0.5)
    check_path_args(f.n, eps)
    tables = PathTables(f)
    h = tables.sensitivity
    inner = (h > 0) & (f.values == 1.0)
    outer = (h > 0) & (f.values == -1.0)

    def kernel(size, rng, tag):
        batch = sample_batch(f.n, eps, size, rng, hesitant=True, seed_tag=tag)
        obs = observe_batch(tables, batch, alpha=alpha, want={"alpha", "hesitation"})
        hit = obs["F_alpha"].astype(np.float64)
        hes = obs["hesitation"] < 1.0
        return {
            "F": hit.sum(), "F_sq": hit.sum(),
            "tau": float(hes.sum()), "tau_sq": float(hes.sum()),
            "tau_plus": float((hes & inner[batch.end_mask]).sum()),
            "tau_minus": float((hes & outer[batch.end_mask]).sum()),
            "count": size,
        }

    m = merge_sums(run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"boundary:{f.label}"))
    p_f = _estimate(m, "F", seed)
    p_tau = _estimate(m, "tau", seed)
    mu_plus = float(np.mean(inner))
    mu_minus = float(np.mean(outer))
    bound = 0.5 * alpha * p_f.mean

    cond_plus = cond_minus = None
    if m["tau"] >= 2:
        cond_plus = MCEstimate.from_sums(m["tau_plus"], m["tau_plus"], int(m["tau"]), seed_tag=p_f.seed_tag)
        cond_minus = MCEstimate.from_sums(m["tau_minus"], m["tau_minus"], int(m["tau"]), seed_tag=p_f.seed_tag)
    return {
        "p_F_alpha": p_f,
        "mu_plus": mu_plus,
        "mu_minus": mu_minus,
        "mu_boundary": float(np.mean(h > 0)),
        "bound": bound,
        "margin_plus": mu_plus - bound,
        "margin_minus": mu_minus - bound,
        "p_tau": p_tau,
        "cond_plus": cond_plus,
        "cond_minus": cond_minus,
    }


def estimate_theta_gain(
    f: CubeFunction,
    a: float = 0.5,
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    grid_step: float = config.BFA_GRID_STEP,
    on_stage=None,
) -> dict:
    """Law of theta and of the quadratic variation gained after it.

    q = P[f_theta in [-a, a] | theta < 1]; returns P[theta < 1] and the
    conditional probability that the gain reaches q(1-a)^2/5.
    """
    if not 0.0 <= a < 1.0:
        raise ParameterError(f"a must lie in [0, 1), got {a}")
    check_path_args(f.n, eps)
    tables = PathTables(f)

    def kernel(size, rng, tag):
        batch = sample_batch(f.n, eps, size, rng, seed_tag=tag)
        obs = observe_batch(tables, batch, grid_step=grid_step, want={"theta"})
        hit = obs["theta"] < 1.0
        return {
            "f_theta": obs["f_theta"][hit],
            "gain": obs["qv_after_theta"][hit],
            "truncated": int(obs["theta_truncated"].sum()),
        }

    parts = run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"theta:{f.label}")
    f_theta = np.concatenate([part["f_theta"] for part in parts])
    gain = np.concatenate([part["gain"] for part in parts])
    hits = f_theta.size
    p_theta = MCEstimate.from_sums(float(hits), float(hits), n_paths, seed_tag=f"philox:{seed}")

    out = {"p_theta": p_theta, "hits": hits, "truncated": sum(part["truncated"] for part in parts),
           "q": None, "level": None, "target": None, "p_gain": None}
    if hits >= 2:
        q = float(np.mean(np.abs(f_theta) <= a))
        level = q * (1.0 - a) ** 2 / 5.0
        big = float(np.sum(gain >= level))
        out.update(q=q, level=level, target=q * (1.0 - a) ** 2 / 9.0,
                   p_gain=MCEstimate.from_sums(big, big, hits, seed_tag=p_theta.seed_tag))
    return out


def estimate_tau(
    f: CubeFunction,
    alpha: float,
    p: float,
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    grid_step: float = config.BFA_GRID_STEP,
    on_stage=None,
) -> dict:
    """P[tau_alpha < 1] and E[Psi_1] = E[h(B_1)^p sup_s (1+f_s)/2]."""
    _check_alpha_p(alpha, p)
    check_path_args(f.n, eps)
    tables = PathTables(f)

    def kernel(size, rng, tag):
        batch = sample_batch(f.n, eps, size, rng, seed_tag=tag)
        obs = observe_batch(tables, batch, alpha=alpha, p=p, grid_step=grid_step, want={"tau"})
        hit = (obs["tau"] < 1.0).astype(np.float64)
        psi = obs["psi_end"]
        return {"hit": hit.sum(), "hit_sq": hit.sum(), "psi": psi.sum(), "psi_sq": (psi * psi).sum(), "count": size}

    m = merge_sums(run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"tau:{f.label}"))
    return {
        "p_tau": _estimate(m, "hit", seed),
        "psi_end": _estimate(m, "psi", seed),
        "threshold": tau_threshold(tables.stats.sum_sq_influences, alpha, p),
    }


def martingale_key(s: float) -> str:
    return f"mart@{s:g}"


def mc_jump_law(
    n: int,
    n_paths: int = config.BFA_PATHS,
    eps: float = config.BFA_EPS,
    seed: int = config.BFA_SEED,
    workers: int = 1,
    times: tuple[float, ...] = MARTINGALE_TIMES,
    on_stage=None,
) -> dict:
    """Statistics of the sampler against the exact jump law.

    Returns MCEstimates for: jumps per coordinate on (e^-2, 1] (mean and
    variance, both 1 for Poisson(1)), sign flips between 0.5 and 0.6
    (target 1/12), hesitant zeros on [0.25, 1] (target log 4) and
    E[B_1^(i) sign B~_s^(i)] at each s in `times` (target s). When n <= 12
    the hesitant endpoint counts also get a chi-square test against uniform.
    """
    check_path_args(n, eps)
    for s in times:
        if not eps <= s < 1.0:
            raise ParameterError(f"martingale check time must lie in [eps, 1), got {s}")
    lo = math.exp(-2.0)
    buckets = 1 << n if n <= config.GF_MAX_N else 0

    def kernel(size, rng, tag):
        batch = sample_batch(n, eps, size, rng, hesitant=True, seed_tag=tag)
        jumps = batch.jump_counts(np.nextafter(lo, 2.0), 1.0).astype(np.float64)
        flips = (((batch.masks_at(0.5) ^ batch.masks_at(0.6))[:, None] >> np.arange(n)) & 1).astype(np.float64)
        zeros = (batch.jump_counts(0.25, 1.0) + batch.extra_counts(0.25, 1.0)).astype(np.float64)
        stats = {"jumps": jumps, "jumps_var": (jumps - 1.0) ** 2, "flips": flips, "zeros": zeros}
        ends = batch.end_signs()
        for s in times:
            stats[martingale_key(s)] = ends * np.sign(batch.points_at(s))
        out = {"count": size * n}
        for key, arr in stats.items():
            out[key] = arr.sum()
            out[key + "_sq"] = (arr * arr).sum()
        if buckets:
            out["ends"] = np.bincount(batch.end_mask, minlength=buckets).astype(np.float64)
        return out

    m = merge_sums(run_blocks(kernel, n_paths, seed, workers, on_stage=on_stage, label=f"jump_law:n{n}"))
    keys = ["jumps", "jumps_var", "flips", "zeros"] + [martingale_key(s) for s in times]
    out = {key: _estimate(m, key, seed) for key in keys}
    out["targets"] = {"jumps": 1.0, "jumps_var": 1.0, "flips": 1.0 / 12.0, "zeros": math.log(4.0),
                      **{martingale_key(s): s for s in times}}
    out["endpoint_chisq"] = None
    if buckets:
        test = chisquare(m["ends"])
        out["endpoint_chisq"] = {"statistic": float(test.statistic), "p_value": float(test.pvalue),
                                 "dof": buckets - 1}
    return out


def expected_at_time(g: CubeFunction, t, power: int = 1):
    """E[g(B_t)^power]; B_t is uniform on {-t, t}^n at a fixed time."""
    check_dimension(g.n, config.EXACT_CHECK_MAX_N, "exact fixed-time expectations")
    t = np.asarray(t, dtype=np.float64)
    if np.any((t < 0.0) | (t > 1.0)):
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    poly = SegmentPolynomials(g)
    masks = np.arange(g.size, dtype=np.int64)
    out = np.array([np.mean(poly.evaluate(masks, np.full(g.size, s)) ** power) for s in np.atleast_1d(t)])
    return float(out[0]) if t.ndim == 0 else out


def expected_truncated(f: CubeFunction, alpha: float) -> dict:
    """Exact E[V_alpha^(i)] and E[Q_alpha^(i)] for every coordinate.

    At a fixed time B_t is uniform on {-t, t}^n, so both expectations are
    averages over vertices of integrals of explicit polynomials; identical
    polynomial pairs are integrated once.
    """
    _check_alpha_p(alpha, 0.5)
    check_dimension(f.n, config.EXACT_CHECK_MAX_N, "exact truncated integrals")
    tables = PathTables(f)
    masks = np.arange(f.size, dtype=np.int64)
    EV = np.zeros(f.n)
    EQ = np.zeros(f.n)
    two_t = np.array([0.0, 2.0])
    for i in range(f.n):
        half = masks[((masks >> i) & 1) == 0]
        g = tables.influence(i).coefficients(half)
        d = tables.derivative(i).coefficients(half)
        _, idx, counts = np.unique(np.round(np.hstack([g, d]), 12), axis=0, return_index=True, return_counts=True)
        for k, cnt in zip(idx, counts):
            gq = npoly.polymul(two_t, npoly.polymul(g[k], g[k]))
            dq = npoly.polymul(two_t, npoly.polymul(d[k], d[k]))
            for u, v in _below_pieces(g[k], alpha, 0.0, 1.0):
                EQ[i] += cnt * _poly_integral(gq, u, v)
                EV[i] += cnt * _poly_integral(dq, u, v)
        EV[i] /= half.size
        EQ[i] /= half.size
    logger.debug(f"Exact truncated integrals for {f.label} at alpha={alpha}: V={EV.sum():.6g}, Q={EQ.sum():.6g}")
    return {"V": EV, "Q": EQ}

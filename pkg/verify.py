"""Verification suite: both sides of every identity and inequality, per function.

Rows without a free constant pass or fail (exactly, or by the 3-SE rule for
Monte Carlo rows). Rows that need an unspecified universal constant report
the fitted constant instead.
"""

import logging
import math
import platform
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import lambertw
from scipy.stats import chi2

import config
import families
from biased import biased_derivative_identity, make_params
from boolfn import (
    R_value,
    SegmentPolynomials,
    _require_boolean,
    abs_derivative_level_weights,
    check_dimension,
    derivative,
    derivative_level_weights,
    influences,
    is_monotone,
    level_weights,
    make_function,
    monotonize,
    monotonize_chain,
    noise_stability,
    sensitivity_profile,
    spectral_stats,
    time_variance,
    wht_forward,
    wht_inverse,
)
from errors import SpecError
from functionals import (
    MARTINGALE_TIMES,
    PathTables,
    estimate_boundary_bound,
    estimate_gf,
    estimate_tau,
    estimate_theta_gain,
    expected_at_time,
    expected_truncated,
    martingale_key,
    mc_jump_integral_check,
    mc_jump_law,
    mc_variance_via_qv,
)
from models import CheckResult, CheckStatus, CorpusReport, CubeFunction, FunctionKind, GfEstimate, RunConfig, ScanStage

logger = logging.getLogger(__name__)

PASS, FAIL, REPORT = CheckStatus.PASS, CheckStatus.FAIL, CheckStatus.REPORT

EXACT_TOL = 1e-12
IDENTITY_TOL = 1e-10
QUAD_TOL = 1e-8
FIT_TOL = 1e-6
CONVEXITY_SLACK = -1e-10

# Endpoint buckets for the g_f rows
GF_CHECK_MAX_N = 8
# Second-derivative tables for the level-2 fit
LEVEL2_MAX_N = 10
# Scan-based MC rows (g_f, theta, tau) use this fraction of the requested path count
SCAN_PATH_DIVISOR = 10

BIASED_SWEEP = (0.6, 0.9)
SWEEP_C = (0.25, 0.5, 1.0)
LEVEL_TIMES = (0.0, 0.25, 0.5)
LEVEL2_TIMES = (0.0, 0.25, 0.5)
SAMPLER_N = 4
# Chi-square significance level for hesitant endpoint uniformity
ENDPOINT_LEVEL = 1e-3

DEFAULT_GRIDS = {
    "s": np.linspace(0.0, 6.0, 121),
    "t": np.linspace(0.0, 0.95, 96),
    "t_fit": np.linspace(0.0, 0.95, 1901),
    "r": np.linspace(0.1, 1.9, 19),
    "eps": np.linspace(0.1, 0.9, 9),
    "K": 2.0,
}


def _num(x) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _row(f: CubeFunction, check: str, lhs, rhs, status: CheckStatus, se=None, n_samples=None, **meta) -> CheckResult:
    lhs, rhs = _num(lhs), _num(rhs)
    ratio = lhs / rhs if lhs is not None and rhs not in (None, 0.0) else None
    return CheckResult(
        function=f.label, check=check, lhs=lhs, rhs=rhs, ratio=_num(ratio),
        status=status, se=_num(se), n_samples=n_samples, meta=meta,
    )


def _degenerate(f: CubeFunction, check: str, reason: str = "degenerate", **meta) -> CheckResult:
    return _row(f, check, None, None, REPORT, reason=reason, **meta)


def _at_most(lhs: float, rhs: float, tol: float = EXACT_TOL) -> CheckStatus:
    return PASS if lhs <= rhs + tol else FAIL


def _oriented(f: CubeFunction) -> tuple[CubeFunction, str]:
    """f itself when E f <= 0, otherwise -f."""
    if f.mean() <= 0.0:
        return f, "f"
    return make_function(-f.values, kind=FunctionKind.BOOLEAN, label=f"-{f.label}"), "-f"


def _minority_mass(f: CubeFunction) -> tuple[float, int]:
    """Mass of the smaller side A and its sign."""
    mu_plus = float(np.mean(f.values == 1.0))
    return (mu_plus, 1) if mu_plus <= 0.5 else (1.0 - mu_plus, -1)


def talagrand_sum(inf: np.ndarray) -> float:
    """T(f) = sum Inf_i / (1 + log(1/Inf_i)); zero influences drop out."""
    pos = inf[inf > 0.0]
    return float(np.sum(pos / (1.0 + np.log(1.0 / pos))))


def rho(alpha: float) -> float:
    return alpha * (math.log(1.0 / alpha) + 2.0)


def fit_gamma(f: CubeFunction, step: float = 0.01, cap: float = 20.0) -> Optional[float]:
    """Smallest gamma >= 1 (on a step grid) with phi_i(s) <= gamma Inf_i^(1+s/(2 gamma)) on [0, gamma]."""
    A = abs_derivative_level_weights(f)
    inf = influences(f)
    k = np.arange(f.n + 1)
    for gamma in np.arange(1.0, cap + step / 2, step):
        s = np.linspace(0.0, gamma, 201)
        phi = A @ np.exp(-2.0 * np.outer(k, s))
        bound = gamma * np.power(inf[:, None], 1.0 + s[None, :] / (2.0 * gamma))
        if np.all(phi <= bound + EXACT_TOL):
            return float(round(gamma, 10))
    return None


def run_exact_checks(f: CubeFunction) -> list[CheckResult]:
    """Deterministic identities and constant-free inequalities."""
    _require_boolean(f, "exact checks")
    check_dimension(f.n, config.EXACT_CHECK_MAX_N, "the exact check suite")
    rows = []
    expansion = wht_forward(f)
    c = expansion.coeffs
    stats = spectral_stats(f)
    profile = sensitivity_profile(f, powers=(0.5,))
    var = stats.variance
    inf = np.asarray(stats.influences)

    err = float(np.max(np.abs(wht_inverse(expansion).values - f.values)))
    rows.append(_row(f, "wht_roundtrip", err, 0.0, _at_most(err, 0.0)))

    parseval = float(np.sum(c * c))
    rows.append(_row(f, "parseval", parseval, float(np.mean(f.values ** 2)),
                     PASS if abs(parseval - np.mean(f.values ** 2)) <= EXACT_TOL else FAIL))

    rows.append(_row(f, "poincare", var, stats.total_influence, _at_most(var, stats.total_influence)))

    mu, side = _minority_mass(f)
    iso = 2.0 * mu * math.log2(1.0 / mu) if mu > 0.0 else 0.0
    rows.append(_row(f, "edge_isoperimetry", stats.total_influence, iso,
                     PASS if stats.total_influence >= iso - EXACT_TOL else FAIL, mu=mu, side=side))

    sqrt_h = profile.moments[0.5]
    var01 = var / 4.0
    rows.append(_row(f, "sensitivity_sqrt", var01, sqrt_h / math.sqrt(2.0), _at_most(var01, sqrt_h / math.sqrt(2.0)),
                     pm_lhs=var, pm_rhs=sqrt_h / math.sqrt(2.0), normalization="0/1"))

    D = derivative_level_weights(f)
    k = np.arange(f.n + 1)
    closed = float(np.sum(D / (k + 1.0)))
    rows.append(_row(f, "qv_closed_form", var, closed, PASS if abs(var - closed) <= IDENTITY_TOL else FAIL))

    eps_grid = np.linspace(0.0, 1.0, 11)
    gap = float(np.max(np.abs(noise_stability(f, eps_grid) - time_variance(f, np.sqrt(1.0 - eps_grid)))))
    rows.append(_row(f, "noise_stability_identity", gap, 0.0, _at_most(gap, 0.0), grid=eps_grid.tolist()))

    t = np.linspace(0.0, 1.0, 11)
    second = expected_at_time(f, t, power=2) - c[0] ** 2
    gap = float(np.max(np.abs(second - time_variance(f, t))))
    rows.append(_row(f, "time_variance_identity", gap, 0.0, _at_most(gap, 0.0, IDENTITY_TOL)))

    t = np.linspace(0.0, 1.0, 21)
    W = level_weights(expansion).W
    kk = k[1:]
    lhs_curve = (2.0 * kk * W[1:] * np.power.outer(t, 2 * kk - 1)).sum(axis=-1)
    rhs_curve = 2.0 * t * R_value(f, t, weights=D)
    gap = float(np.max(np.abs(lhs_curve - rhs_curve)))
    rows.append(_row(f, "variance_derivative_identity", gap, 0.0, _at_most(gap, 0.0, IDENTITY_TOL)))

    level1 = np.array([c[1 << i] for i in range(f.n)])
    if stats.is_monotone:
        gap = float(np.max(np.abs(inf - level1)))
        rows.append(_row(f, "monotone_influence", gap, 0.0, _at_most(gap, 0.0)))
    else:
        rows.append(_degenerate(f, "monotone_influence", reason="not_monotone"))

    r0 = float(R_value(f, 0.0, weights=D))
    rows.append(_row(f, "gradient_at_origin", r0, float(np.sum(level1 ** 2)),
                     PASS if abs(r0 - np.sum(level1 ** 2)) <= EXACT_TOL else FAIL,
                     sum_sq_influences=stats.sum_sq_influences, monotone=stats.is_monotone))

    rows.extend(_biased_rows(f))
    return rows


def _biased_rows(f: CubeFunction) -> list[CheckResult]:
    params = make_params(np.linspace(BIASED_SWEEP[0], BIASED_SWEEP[1], f.n))
    worst = 0.0
    printed = []
    subsets = [[1]] + ([[1, 2]] if f.n >= 2 else [])
    for S in subsets:
        out = biased_derivative_identity(f, params, S)
        scale = max(abs(out["lhs"]), 1.0)
        worst = max(worst, abs(out["lhs"] - out["rhs"]) / scale)
        four = biased_derivative_identity(f, params, S, c=4.0)
        printed.append(out["lhs"] / four["rhs"] if four["rhs"] != 0.0 else None)
    return [
        _row(f, "biased_derivative_identity", worst, 0.0, _at_most(worst, 0.0, IDENTITY_TOL),
             p=params.p.tolist(), subsets=subsets),
        _row(f, "biased_derivative_printed_factor", None, None, REPORT,
             ratios=[_num(r) for r in printed], factor=4.0, subsets=subsets),
    ]


def run_constant_sweeps(f: CubeFunction, run: RunConfig, gf: Optional[GfEstimate] = None) -> list[CheckResult]:
    """Report-only rows: ratios that estimate the unspecified universal constants."""
    _require_boolean(f, "constant sweeps")
    names = ("kkl_ratio", "talagrand_ratio", "sensitivity_sqrt_log", "sensitivity_sqrt_log_conjectured",
             "influence_log_bound", "vertex_boundary_constant", "isoperimetric_robustness", "kkl_robustness",
             "noise_stability_decay", "influence_decay_gamma", "level1_constant", "level2_constant")
    stats = spectral_stats(f)
    if stats.variance == 0.0:
        return [_degenerate(f, name) for name in names] + [
            _degenerate(f, f"sensitivity_moment_p{p}") for p in config.P_SWEEP if f.n <= GF_CHECK_MAX_N
        ]

    rows = []
    var = stats.variance
    inf = np.asarray(stats.influences)
    ssq = stats.sum_sq_influences
    profile = sensitivity_profile(f, powers=(0.5,) + tuple(config.P_SWEEP))
    sqrt_h = profile.moments[0.5]
    log_tal = math.log(2.0 + math.e / ssq)
    log_conj = math.log(math.e / ssq)

    if stats.max_influence >= 1.0:
        rows.append(_degenerate(f, "kkl_ratio", note="max influence is 1, log(1/max Inf) = 0"))
    else:
        rows.append(_row(f, "kkl_ratio", var * math.log(1.0 / stats.max_influence), stats.total_influence, REPORT))

    T = talagrand_sum(inf)
    rows.append(_row(f, "talagrand_ratio", var, T, REPORT, T=T, r_tal=var / T))

    rows.append(_row(f, "sensitivity_sqrt_log", sqrt_h, var * math.sqrt(log_tal), REPORT))
    rows.append(_row(f, "sensitivity_sqrt_log_conjectured", sqrt_h, var * math.sqrt(log_conj), REPORT))
    rows.append(_row(f, "influence_log_bound", var * log_conj, stats.total_influence, REPORT))

    m = min(profile.mu_plus, profile.mu_minus)
    r_tal = var / T
    if m <= 0.0:
        rows.append(_degenerate(f, "vertex_boundary_constant", note="one boundary side is empty"))
    else:
        c_b = r_tal * math.exp(float(lambertw(var / m).real))
        rows.append(_row(f, "vertex_boundary_constant", c_b, None, REPORT, r_tal=r_tal, mu_pm=m))

    mu, side = _minority_mass(f)
    inner = profile.mu_plus if side == 1 else profile.mu_minus
    r_iso = 2.0 * mu * math.log2(1.0 / mu) / stats.total_influence
    rows.append(_row(f, "isoperimetric_robustness", inner / mu, r_iso, REPORT, mu=mu, side=side))

    if f.n < 2:
        rows.append(_degenerate(f, "kkl_robustness", note="log n = 0"))
    else:
        c_eff = stats.max_influence * f.n / (var * math.log(f.n))
        rows.append(_row(f, "kkl_robustness", m / var, c_eff, REPORT))

    rows.append(_keller_kindler(f, var, ssq))

    gamma = fit_gamma(f)
    rows.append(_row(f, "influence_decay_gamma", gamma, None, REPORT, searched_up_to=20.0, step=0.01))
    rows.append(_level1_constant(f))
    rows.append(_level2_constant(f))

    if f.n <= GF_CHECK_MAX_N:
        rows.extend(_sensitivity_moment_rows(f, run, gf))
    return rows


def _keller_kindler(f: CubeFunction, var: float, ssq: float) -> CheckResult:
    eps_grid = np.linspace(0.0, 1.0, 21)
    S = noise_stability(f, eps_grid)
    curve = {}
    for c in SWEEP_C:
        curve[str(c)] = float(np.max(S / (var * ssq ** (c * eps_grid))))
    forced = float(S[0] / var)
    return _row(f, "noise_stability_decay", curve[str(0.5)], forced, REPORT, c_min=curve,
                note="C must be at least S_0/Var = 1")


def _level1_constant(f: CubeFunction) -> CheckResult:
    """max ||grad g||^2 (1-t)^4 / (g^2 log(e/g)) for g = (1+f)/2 at |x_i| = t."""
    tables = PathTables(f)
    masks = np.arange(f.size, dtype=np.int64)
    best = 0.0
    for t in LEVEL_TIMES:
        tt = np.full(f.size, t)
        g = 0.5 * (1.0 + tables.value.evaluate(masks, tt))
        grad = 0.25 * tables.grad_sq(masks, tt)
        ok = g > 1e-12
        ratio = grad[ok] * (1.0 - t) ** 4 / (g[ok] ** 2 * np.log(math.e / g[ok]))
        if ratio.size:
            best = max(best, float(ratio.max()))
    return _row(f, "level1_constant", best, None, REPORT, times=list(LEVEL_TIMES))


def _level2_fit(H: np.ndarray, G: np.ndarray) -> float:
    """Smallest C with H <= C G log(C/G) pointwise: C = H / (G W(H/G^2))."""
    w = lambertw(H / G ** 2).real
    return float(np.max(H / (G * w)))


def _level2_constant(f: CubeFunction) -> CheckResult:
    """Smallest C(t) with ||Hess f||_HS^2 <= C G log(C/G), G = ||grad f||^2, over |x_i| = t.

    The lemma is stated for the [-1, 1]-valued extension itself. The fit for
    g = (1+f)/2 rescales H and G by 1/4 and is reported in meta.
    """
    if not is_monotone(f):
        return _degenerate(f, "level2_constant", reason="precondition", note="needs a monotone function")
    if f.n > LEVEL2_MAX_N:
        return _degenerate(f, "level2_constant", reason="capacity", limit=LEVEL2_MAX_N)
    tables = PathTables(f)
    masks = np.arange(f.size, dtype=np.int64)
    second = [
        SegmentPolynomials(derivative(derivative(f, i), j))
        for i in range(1, f.n + 1) for j in range(i + 1, f.n + 1)
    ]
    fitted, unit = {}, {}
    for t in LEVEL2_TIMES:
        tt = np.full(f.size, t)
        G = tables.grad_sq(masks, tt)
        H = np.zeros(f.size)
        for poly in second:
            H += 2.0 * poly.evaluate(masks, tt) ** 2
        ok = (G > 1e-15) & (H > 0.0)
        if not ok.any():
            fitted[str(t)] = unit[str(t)] = 0.0
            continue
        fitted[str(t)] = _level2_fit(H[ok], G[ok])
        unit[str(t)] = _level2_fit(0.25 * H[ok], 0.25 * G[ok])
    return _row(f, "level2_constant", max(fitted.values()), None, REPORT, c_of_t=fitted,
                unit_c_of_t=unit, unit_constant=max(unit.values()))


def _scan_paths(run: RunConfig) -> int:
    return max(run.n_paths // SCAN_PATH_DIVISOR, 100)


def _gf_for(f: CubeFunction, run: RunConfig, on_stage=None) -> tuple[GfEstimate, str, CubeFunction]:
    g, orientation = _oriented(f)
    gf = estimate_gf(
        g, n_paths=config.mc_paths_for(f.n, _scan_paths(run)), eps=run.eps, seed=run.seed,
        workers=run.workers, grid_step=run.grid_step, on_stage=on_stage,
    )
    return gf, orientation, g


def _sensitivity_moment_rows(f: CubeFunction, run: RunConfig, gf=None) -> list[CheckResult]:
    if gf is None:
        gf, orientation, _ = _gf_for(f, run)
    else:
        gf, orientation = gf
    stats = spectral_stats(f)
    h = sensitivity_profile(f).sensitivity.astype(np.float64)
    log_tal = math.log(2.0 + math.e / stats.sum_sq_influences)
    rows = []
    for p in config.P_SWEEP:
        hp = np.where(h > 0, h ** p, 0.0)
        lhs = float(np.mean(hp * gf.values))
        se = float(np.sqrt(np.sum((hp * gf.std_errors) ** 2)) / f.size)
        rows.append(_row(
            f, f"sensitivity_moment_p{p}", lhs, stats.variance * log_tal ** p, REPORT,
            se=se, n_samples=gf.n_samples, orientation=orientation, seed=run.seed,
            low_confidence=int(gf.low_confidence.sum()),
        ))
    return rows


def _second_differences(values: np.ndarray) -> float:
    logs = np.log(values)
    return float(np.min(logs[..., 2:] - 2.0 * logs[..., 1:-1] + logs[..., :-2]))


def run_lemma_checks(
    f: CubeFunction,
    grids: Optional[dict] = None,
    run: Optional[RunConfig] = None,
    gf=None,
    on_stage: Optional[Callable] = None,
) -> list[CheckResult]:
    """Inequalities checked on time grids, plus the Monte Carlo rows when `run` is given."""
    _require_boolean(f, "grid checks")
    grids = {**DEFAULT_GRIDS, **(grids or {})}
    rows = []
    stats = spectral_stats(f)
    inf = np.asarray(stats.influences)
    A = abs_derivative_level_weights(f)
    D = derivative_level_weights(f)
    k = np.arange(f.n + 1)

    s = np.asarray(grids["s"])
    active = inf > 0.0
    if active.any():
        phi = A[active] @ np.exp(-2.0 * np.outer(k, s))
        worst = _second_differences(phi)
        rows.append(_row(f, "influence_log_convex", worst, CONVEXITY_SLACK,
                         PASS if worst >= CONVEXITY_SLACK else FAIL, coordinates=int(active.sum())))
    else:
        rows.append(_degenerate(f, "influence_log_convex"))

    G = D.sum(axis=0)
    if stats.variance > 0.0:
        worst = _second_differences(G @ np.exp(-2.0 * np.outer(k, s)))
        rows.append(_row(f, "gradient_log_convex", worst, CONVEXITY_SLACK,
                         PASS if worst >= CONVEXITY_SLACK else FAIL))
    else:
        rows.append(_degenerate(f, "gradient_log_convex"))

    rows.append(_differential_inequality(f, A, active, grids))
    rows.append(_log_convex_integral(f, G, grids))
    rows.append(_monotonization_row(f, np.asarray(grids["eps"])))

    if f.n <= config.EXACT_CHECK_MAX_N:
        rows.extend(_truncated_rows(f, run.alpha if run else 0.5, inf))

    if run is not None and f.n <= config.MC_CHECK_MAX_N:
        rows.extend(_mc_rows(f, run, gf, on_stage))
    return rows


def _differential_inequality(f: CubeFunction, A: np.ndarray, active: np.ndarray, grids: dict) -> CheckResult:
    """psi' <= C psi log(e/psi) with fitted C implies psi(t) <= e^(1-e^-Ct) psi(0)^(e^-Ct)."""
    if not active.any():
        return _degenerate(f, "differential_inequality")
    k = np.arange(f.n + 1)
    t_fit = np.asarray(grids["t_fit"])
    t = np.asarray(grids["t"])
    fitted = []
    worst = -math.inf
    for W in A[active]:
        psi = (W * np.power.outer(t_fit * t_fit, k)).sum(axis=-1)
        dpsi = (W[1:] * 2.0 * k[1:] * np.power.outer(t_fit, 2 * k[1:] - 1)).sum(axis=-1)
        C = float(np.max(dpsi / (psi * np.log(math.e / psi))))
        fitted.append(C)
        psi_t = (W * np.power.outer(t * t, k)).sum(axis=-1)
        decay = np.exp(-C * t)
        bound = math.e ** (1.0 - decay) * W[0] ** decay
        worst = max(worst, float(np.max((psi_t - bound) / bound)))
    return _row(f, "differential_inequality", worst, FIT_TOL, PASS if worst <= FIT_TOL else FAIL,
                K=math.e, fitted_C=max(fitted))


def _log_convex_integral(f: CubeFunction, G: np.ndarray, grids: dict) -> CheckResult:
    K = float(grids["K"])
    k = np.arange(G.size)

    def integrand(s):
        return math.exp(-2.0 * s) * float(np.sum(G * np.exp(-2.0 * k * s)))

    v = quad(integrand, 0.0, K, epsabs=1e-13, epsrel=1e-12)[0]
    GK = float(np.sum(G * np.exp(-2.0 * k * K)))
    if not v > GK:
        return _degenerate(f, "log_convex_integral", reason="precondition", v=v, G_K=GK)
    worst = math.inf
    for r in np.asarray(grids["r"]):
        if not 0.0 < r < K:
            continue
        lhs = quad(integrand, 0.0, r, epsabs=1e-13, epsrel=1e-12)[0]
        rhs = v * (1.0 - (GK / v) ** (r / K))
        worst = min(worst, lhs - rhs)
    return _row(f, "log_convex_integral", worst, -QUAD_TOL, PASS if worst >= -QUAD_TOL else FAIL, K=K, v=v)


def monotonization_violations(f: CubeFunction, eps_grid) -> int:
    """Influence increases, stability decreases and non-monotone chain ends."""
    base_inf = influences(f)
    base_stab = noise_stability(f, eps_grid)
    bad = 0
    for j in range(1, f.n + 1):
        g = monotonize(f, j)
        bad += int(np.sum(influences(g) > base_inf + EXACT_TOL))
        bad += int(np.sum(noise_stability(g, eps_grid) < base_stab - EXACT_TOL))
    bad += 0 if is_monotone(monotonize_chain(f)) else 1
    return bad


def _monotonization_row(f: CubeFunction, eps_grid) -> CheckResult:
    bad = monotonization_violations(f, eps_grid)
    return _row(f, "monotonization", bad, 0, PASS if bad == 0 else FAIL)


def _truncated_rows(f: CubeFunction, alpha: float, inf: np.ndarray) -> list[CheckResult]:
    out = expected_truncated(f, alpha)
    EV, EQ = float(out["V"].sum()), float(out["Q"].sum())
    rows = [_row(f, "truncated_variation_order", EV, EQ, _at_most(EV, EQ, IDENTITY_TOL), alpha=alpha)]
    gamma = fit_gamma(f)
    pos = inf > 0.0
    if gamma is None or not pos.any():
        rows.append(_degenerate(f, "truncated_integral_bound", alpha=alpha))
    else:
        t_i = inf[pos] / (1.0 + np.log(1.0 / inf[pos]))
        ratios = out["Q"][pos] / (4.0 * gamma ** 2 * rho(alpha) * t_i)
        rows.append(_row(f, "truncated_integral_bound", float(np.max(ratios)), 1.0, REPORT,
                         alpha=alpha, gamma=gamma))
    return rows


def _mc_meta(run: RunConfig, **extra) -> dict:
    return {"seed": run.seed, "eps": run.eps, **extra}


def _within(est, target: float, k: float = config.SE_MULTIPLIER) -> CheckStatus:
    return PASS if est.within(target, k=k) else FAIL


def _mc_rows(f: CubeFunction, run: RunConfig, gf, on_stage) -> list[CheckResult]:
    rows = []
    stats = spectral_stats(f)
    var = stats.variance

    est = mc_variance_via_qv(f, run.n_paths, run.eps, run.seed, run.workers, on_stage=on_stage)
    rows.append(_row(f, "variance_via_qv", est.mean, var, _within(est, var), se=est.std_error,
                     n_samples=est.n_samples, **_mc_meta(run)))

    for g, t1 in (("one", 0.25), ("deriv_sq", 0.0), ("influence_sq", 0.0)):
        out = mc_jump_integral_check(f, 1, t1, 1.0, g=g, n_paths=run.n_paths, eps=run.eps,
                                     seed=run.seed, workers=run.workers, on_stage=on_stage)
        lhs = out["lhs"]
        rows.append(_row(f, f"jump_integral_{g}", lhs.mean, out["rhs"], _within(lhs, out["rhs"]),
                         se=lhs.std_error, n_samples=lhs.n_samples,
                         **_mc_meta(run, coordinate=1, window=[t1, 1.0], correction=out["correction"])))

    b = estimate_boundary_bound(f, run.alpha, run.n_paths, run.eps, run.seed, run.workers, on_stage=on_stage)
    p_f = b["p_F_alpha"]
    slack = config.SE_MULTIPLIER * 0.5 * run.alpha * p_f.std_error
    ok = b["margin_plus"] >= -slack and b["margin_minus"] >= -slack
    rows.append(_row(f, "boundary_vs_jumps", min(b["mu_plus"], b["mu_minus"]), b["bound"],
                     PASS if ok else FAIL, se=0.5 * run.alpha * p_f.std_error, n_samples=p_f.n_samples,
                     **_mc_meta(run, alpha=run.alpha, p_F_alpha=p_f.mean, mu_plus=b["mu_plus"],
                                mu_minus=b["mu_minus"], margin_plus=b["margin_plus"],
                                margin_minus=b["margin_minus"])))

    target = 0.5 * run.alpha
    for side, check in (("plus", "hesitation_boundary"), ("minus", "hesitation_boundary_minus")):
        cond = b[f"cond_{side}"]
        if cond is None or b["p_tau"].mean * b["p_tau"].n_samples < config.LOW_CONFIDENCE_COUNT:
            rows.append(_row(f, check, None, target, REPORT,
                             reason="too_few_hesitations", **_mc_meta(run, p_tau=b["p_tau"].mean)))
            continue
        status = PASS if cond.mean >= target - config.SE_MULTIPLIER * cond.std_error else FAIL
        rows.append(_row(f, check, cond.mean, target, status, se=cond.std_error,
                         n_samples=cond.n_samples, **_mc_meta(run, p_tau=b["p_tau"].mean, side=side)))

    oriented, orientation = _oriented(f)
    scan = _scan_paths(run)
    th = estimate_theta_gain(oriented, 0.5, scan, run.eps, run.seed, run.workers, run.grid_step, on_stage=on_stage)
    p_theta = th["p_theta"]
    rows.append(_row(f, "theta_occurrence", p_theta.mean, var / 4.0,
                     PASS if p_theta.mean >= var / 4.0 - config.SE_MULTIPLIER * p_theta.std_error else FAIL,
                     se=p_theta.std_error, n_samples=p_theta.n_samples,
                     **_mc_meta(run, orientation=orientation, theta_truncated=th["truncated"])))
    if th["p_gain"] is None or th["hits"] < config.LOW_CONFIDENCE_COUNT:
        rows.append(_row(f, "theta_gain", None, None, REPORT, reason="too_few_crossings",
                         **_mc_meta(run, hits=th["hits"])))
    else:
        gain = th["p_gain"]
        status = PASS if gain.mean >= th["target"] - config.SE_MULTIPLIER * gain.std_error else FAIL
        rows.append(_row(f, "theta_gain", gain.mean, th["target"], status, se=gain.std_error,
                         n_samples=gain.n_samples,
                         **_mc_meta(run, a=0.5, q=th["q"], level=th["level"], orientation=orientation)))

    tau = estimate_tau(oriented, run.alpha, run.p, scan, run.eps, run.seed, run.workers, run.grid_step,
                       on_stage=on_stage)
    rows.append(_row(f, "tau_occurrence", tau["p_tau"].mean, None, REPORT, se=tau["p_tau"].std_error,
                     n_samples=tau["p_tau"].n_samples,
                     **_mc_meta(run, alpha=run.alpha, p=run.p, threshold=_num(tau["threshold"]),
                                psi_end=tau["psi_end"].mean, orientation=orientation)))

    if f.n <= GF_CHECK_MAX_N:
        if gf is None:
            gf_est, orientation, _ = _gf_for(f, run, on_stage)
        else:
            gf_est, orientation = gf
        lhs = float(np.mean(gf_est.values ** 2))
        se = float(np.sqrt(np.sum((2.0 * gf_est.values * gf_est.std_errors) ** 2)) / f.size)
        rows.append(_row(f, "gf_second_moment", lhs, 2.0 * var,
                         PASS if lhs <= 2.0 * var + config.SE_MULTIPLIER * se else FAIL,
                         se=se, n_samples=gf_est.n_samples,
                         **_mc_meta(run, orientation=orientation, low_confidence=int(gf_est.low_confidence.sum()))))
    return rows


def sampler_rows(run: RunConfig, on_stage=None) -> list[CheckResult]:
    """Jump-law rows, independent of any function."""
    label = make_function(np.ones(1 << SAMPLER_N), label=f"sampler:n{SAMPLER_N}")
    law = mc_jump_law(SAMPLER_N, run.n_paths, run.eps, run.seed, run.workers, on_stage=on_stage)
    checks = [("jumps", "jump_count"), ("jumps_var", "jump_count_variance"), ("flips", "sign_flip_rate"),
              ("zeros", "hesitant_zero_count")]
    checks += [(martingale_key(s), f"hesitant_martingale@{s:g}") for s in MARTINGALE_TIMES]
    rows = []
    for key, check in checks:
        est, target = law[key], law["targets"][key]
        rows.append(_row(label, check, est.mean, target, _within(est, target), se=est.std_error,
                         n_samples=est.n_samples, **_mc_meta(run)))
    test = law["endpoint_chisq"]
    critical = float(chi2.ppf(1.0 - ENDPOINT_LEVEL, test["dof"]))
    rows.append(_row(label, "endpoint_uniformity", test["statistic"], critical,
                     PASS if test["p_value"] >= ENDPOINT_LEVEL else FAIL, n_samples=run.n_paths,
                     **_mc_meta(run, p_value=test["p_value"], dof=test["dof"], level=ENDPOINT_LEVEL)))
    return rows


def monotonization_sweep(count: int = 200, seed: int = 0, max_n: int = 6) -> CheckResult:
    """Monotonization on seeded random functions of dimension 2..max_n."""
    eps_grid = DEFAULT_GRIDS["eps"]
    bad = 0
    for k in range(count):
        n = 2 + k % (max_n - 1)
        f = make_function(families.random_function(n, seed + k), kind=FunctionKind.BOOLEAN)
        bad += monotonization_violations(f, eps_grid)
    label = make_function(np.ones(2), label=f"random-sweep:{count}")
    return _row(label, "monotonization_sweep", bad, 0, PASS if bad == 0 else FAIL, count=count, seed=seed)


def environment(run: RunConfig) -> dict:
    return {
        "version": config.VERSION,
        "seed": run.seed,
        "eps": run.eps,
        "n_paths": run.n_paths,
        "alpha": run.alpha,
        "p": run.p,
        "grid_step": run.grid_step,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def run_function(f: CubeFunction, run: RunConfig, on_stage: Optional[Callable] = None) -> list[CheckResult]:
    """Every applicable row for one function."""
    rows = []
    if f.n <= config.EXACT_CHECK_MAX_N:
        rows.extend(run_exact_checks(f))
    else:
        rows.append(_degenerate(f, "exact_checks", reason="capacity", limit=config.EXACT_CHECK_MAX_N))
    gf = None
    if f.n <= GF_CHECK_MAX_N and spectral_stats(f).variance > 0.0:
        gf_est, orientation, _ = _gf_for(f, run, on_stage)
        gf = (gf_est, orientation)
    rows.extend(run_constant_sweeps(f, run, gf=gf))
    rows.extend(run_lemma_checks(f, run=run, gf=gf, on_stage=on_stage))
    return rows


def run_corpus(specs: list[str], run: RunConfig, on_stage: Optional[Callable] = None) -> CorpusReport:
    """Run the suite over a corpus of function specs."""
    if not specs:
        raise SpecError("corpus is empty")

    def _stage(name, **data):
        if on_stage:
            on_stage(ScanStage(name=name, data=data))

    functions = [families.make(spec) for spec in specs]
    report = CorpusReport(environment=environment(run))
    _stage("corpus_start", functions=len(functions), seed=run.seed, n_paths=run.n_paths)

    for f in functions:
        _stage("load_function", function=f.label, n=f.n)
        logger.info(f"Checking {f.label} (n={f.n})")
        for row in run_function(f, run, on_stage=on_stage):
            report.results.append(row)
            _stage("check", **row.to_dict())

    for row in sampler_rows(run, on_stage=on_stage) + [monotonization_sweep(seed=run.seed)]:
        report.results.append(row)
        _stage("check", **row.to_dict())

    counts = report.counts()
    logger.info(f"Corpus done: {counts['pass']} pass, {counts['fail']} fail, {counts['report']} report")
    _stage("corpus_done", **counts)
    return report

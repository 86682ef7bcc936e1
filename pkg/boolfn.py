"""Exact spectral analysis of real functions on the discrete cube {-1,1}^n.

Truth tables are indexed by vertex mask (bit i set iff y_{i+1} = +1) and
Fourier coefficients by subset mask, so the Walsh-Hadamard transform is the
standard in-place butterfly and restricting a coordinate is a bit mask.
"""

import functools
import logging

import numpy as np

import config
from errors import CapacityError, DomainError, ParameterError, SpecError
from models import (
    CubeFunction,
    FourierExpansion,
    FunctionKind,
    LevelWeights,
    SensitivityProfile,
    SpectralStats,
)

logger = logging.getLogger(__name__)


def check_dimension(n: int, limit: int = config.EXACT_MAX_N, what: str = "exact operations"):
    if not 1 <= n <= limit:
        raise CapacityError(f"n={n} is outside 1..{limit} for {what}")


@functools.lru_cache(maxsize=None)
def popcounts(n: int) -> np.ndarray:
    """Popcount of every mask in 0..2^n-1 (read-only)."""
    idx = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        pc += (idx >> i) & 1
    pc.flags.writeable = False
    return pc


def infer_kind(values: np.ndarray) -> FunctionKind:
    if np.all(np.abs(values) == 1.0):
        return FunctionKind.BOOLEAN
    if np.all((values == -1.0) | (values == 0.0) | (values == 1.0)):
        return FunctionKind.DERIVATIVE
    if np.all((values >= 0.0) & (values <= 1.0)):
        return FunctionKind.UNIT
    return FunctionKind.GENERAL


_KIND_ACCEPTS = {
    FunctionKind.BOOLEAN: {FunctionKind.BOOLEAN},
    FunctionKind.DERIVATIVE: {FunctionKind.BOOLEAN, FunctionKind.DERIVATIVE},
    FunctionKind.UNIT: {FunctionKind.UNIT},
    FunctionKind.GENERAL: set(FunctionKind),
}


def make_function(values, kind: FunctionKind | str | None = None, label: str = "") -> CubeFunction:
    """Build a validated CubeFunction from a truth table in mask order.

    Args:
        values: 2^n real values.
        kind: Declared kind; inferred from the values when omitted.
        label: Family spec or file name, carried into reports.

    Returns:
        An immutable CubeFunction.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    size = arr.size
    n = size.bit_length() - 1
    if size < 2 or (1 << n) != size:
        raise SpecError(f"truth table length must be a power of two >= 2, got {size}")
    check_dimension(n)
    if not np.all(np.isfinite(arr)):
        raise SpecError("truth table contains non-finite values")

    inferred = infer_kind(arr)
    if kind is None:
        kind = inferred
    else:
        kind = FunctionKind(kind)
        ok = inferred in _KIND_ACCEPTS[kind]
        if kind == FunctionKind.UNIT:
            ok = bool(np.all((arr >= 0.0) & (arr <= 1.0)))
        if not ok:
            raise SpecError(f"values are not consistent with kind={kind.value}")
    return CubeFunction(n=n, values=arr, kind=kind, label=label)


def _butterfly(a: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Unnormalized transform along the last axis, in place.

    Forward maps a truth table to 2^n times its coefficients; inverse maps
    coefficients back to values.
    """
    size = a.shape[-1]
    lead = a.shape[:-1]
    h = 1
    while h < size:
        view = a.reshape(lead + (size // (2 * h), 2, h))
        lo = view[..., 0, :].copy()
        hi = view[..., 1, :]
        if inverse:
            view[..., 0, :] = lo - hi
            view[..., 1, :] = lo + hi
        else:
            view[..., 0, :] = lo + hi
            view[..., 1, :] = hi - lo
        h *= 2
    return a


def wht_forward(f: CubeFunction) -> FourierExpansion:
    check_dimension(f.n)
    a = np.array(f.values, dtype=np.float64, copy=True)
    _butterfly(a)
    a /= f.size
    return FourierExpansion(n=f.n, coeffs=a)


def wht_inverse(expansion: FourierExpansion, kind=None, label: str = "") -> CubeFunction:
    check_dimension(expansion.n)
    a = np.array(expansion.coeffs, dtype=np.float64, copy=True)
    _butterfly(a, inverse=True)
    return make_function(a, kind=kind, label=label)


def level_weights(expansion: FourierExpansion) -> LevelWeights:
    c = expansion.coeffs
    W = np.bincount(popcounts(expansion.n), weights=c * c, minlength=expansion.n + 1)
    return LevelWeights(n=expansion.n, W=W)


def _as_points(f: CubeFunction, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[-1] != f.n:
        raise DomainError(f"point has {pts.shape[-1]} coordinates, expected {f.n}")
    if not np.all(np.isfinite(pts)) or np.any(np.abs(pts) > 1.0):
        raise DomainError("every coordinate must lie in [-1, 1]")
    return pts


def _fold(values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Multilinear fold of a truth table at many points, highest coordinate first."""
    count, n = pts.shape
    out = np.empty(count)
    chunk = max(1, (1 << 22) >> max(n - 1, 0))
    for start in range(0, count, chunk):
        x = pts[start:start + chunk]
        v = np.broadcast_to(values, (x.shape[0], values.size))
        for i in reversed(range(n)):
            half = v.shape[1] // 2
            xi = x[:, i:i + 1]
            v = 0.5 * (1.0 - xi) * v[:, :half] + 0.5 * (1.0 + xi) * v[:, half:]
        out[start:start + x.shape[0]] = v[:, 0]
    return out


def eval_extension(f: CubeFunction, x) -> float:
    """Harmonic (multilinear) extension of f at x in [-1,1]^n."""
    pts = _as_points(f, x)
    if pts.shape[0] != 1:
        raise DomainError("eval_extension takes a single point; use eval_extension_many")
    return float(_fold(f.values, pts)[0])


def eval_extension_many(f: CubeFunction, points) -> np.ndarray:
    return _fold(f.values, _as_points(f, points))


def _check_index(f: CubeFunction, i: int):
    if not 1 <= i <= f.n:
        raise ParameterError(f"coordinate index {i} outside 1..{f.n}")


def _pairs(values: np.ndarray, i: int):
    """(value at y_i=-1, value at y_i=+1) for every edge in direction i."""
    view = values.reshape(-1, 2, 1 << (i - 1))
    return view[:, 0, :], view[:, 1, :]


def derivative(f: CubeFunction, i: int) -> CubeFunction:
    """Discrete derivative (f(y^{i->1}) - f(y^{i->-1}))/2, constant in coordinate i."""
    _check_index(f, i)
    lo, hi = _pairs(f.values, i)
    d = 0.5 * (hi - lo)
    values = np.stack([d, d], axis=1).reshape(-1)
    kind = FunctionKind.DERIVATIVE if f.kind == FunctionKind.BOOLEAN else infer_kind(values)
    return CubeFunction(n=f.n, values=values, kind=kind, label=f"d{i}({f.label})")


def abs_derivative(f: CubeFunction, i: int) -> CubeFunction:
    """|d_i f|; its harmonic extension is the influence process f^(i)."""
    d = derivative(f, i)
    values = np.abs(d.values)
    kind = FunctionKind.UNIT if f.kind == FunctionKind.BOOLEAN else infer_kind(values)
    return CubeFunction(n=f.n, values=values, kind=kind, label=f"|d{i}({f.label})|")


def gradient_extension(f: CubeFunction, x) -> np.ndarray:
    pts = _as_points(f, x)
    return np.array([_fold(derivative(f, i).values, pts)[0] for i in range(1, f.n + 1)])


def hessian_hs_sq(f: CubeFunction, x) -> float:
    """Squared Hilbert-Schmidt norm of the Hessian of the extension at x.

    The diagonal vanishes by multilinearity.
    """
    pts = _as_points(f, x)
    total = 0.0
    for i in range(1, f.n + 1):
        di = derivative(f, i)
        for j in range(i + 1, f.n + 1):
            v = _fold(derivative(di, j).values, pts)[0]
            total += 2.0 * v * v
    return float(total)


def _require_boolean(f: CubeFunction, op: str):
    if f.kind != FunctionKind.BOOLEAN:
        raise ParameterError(f"{op} requires a boolean function, got kind={f.kind.value}")


def is_monotone(f: CubeFunction) -> bool:
    return all(bool(np.all(hi >= lo)) for lo, hi in (_pairs(f.values, i) for i in range(1, f.n + 1)))


def influences(f: CubeFunction) -> np.ndarray:
    """Inf_i = E (d_i f)^2 for every coordinate."""
    out = np.empty(f.n)
    for i in range(1, f.n + 1):
        lo, hi = _pairs(f.values, i)
        d = 0.5 * (hi - lo)
        out[i - 1] = float(np.mean(d * d))
    return out


def spectral_stats(f: CubeFunction) -> SpectralStats:
    _require_boolean(f, "spectral_stats")
    inf = influences(f)
    mean = f.mean()
    return SpectralStats(
        n=f.n,
        mean=mean,
        variance=float(np.mean(f.values ** 2) - mean * mean),
        influences=[float(v) for v in inf],
        total_influence=float(inf.sum()),
        sum_sq_influences=float(np.sum(inf * inf)),
        max_influence=float(inf.max()),
        is_monotone=is_monotone(f),
    )


def sensitivity(f: CubeFunction) -> np.ndarray:
    """h_f(y): number of edges at y across which f changes."""
    idx = np.arange(f.size, dtype=np.int64)
    h = np.zeros(f.size, dtype=np.int64)
    for i in range(f.n):
        h += f.values != f.values[idx ^ (1 << i)]
    return h


def sensitivity_profile(f: CubeFunction, powers=(0.5,)) -> SensitivityProfile:
    """Sensitivity, its moments E[h^p] (0^p = 0) and vertex-boundary masses."""
    _require_boolean(f, "sensitivity_profile")
    for p in powers:
        if not p > 0:
            raise ParameterError(f"sensitivity exponent must be positive, got {p}")
    h = sensitivity(f)
    hf = h.astype(np.float64)
    moments = {float(p): float(np.mean(np.where(h > 0, hf ** p, 0.0))) for p in powers}
    on_boundary = h > 0
    return SensitivityProfile(
        sensitivity=h,
        moments=moments,
        mu_boundary=float(np.mean(on_boundary)),
        mu_plus=float(np.mean(on_boundary & (f.values == 1.0))),
        mu_minus=float(np.mean(on_boundary & (f.values == -1.0))),
    )


def _check_unit_interval(name: str, value):
    arr = np.asarray(value, dtype=np.float64)
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return arr


def derivative_level_weights(f: CubeFunction) -> np.ndarray:
    """Row i-1 holds the level weights of d_i f, read off f's coefficients."""
    c = wht_forward(f).coeffs
    pc = popcounts(f.n)
    idx = np.arange(f.size, dtype=np.int64)
    out = np.zeros((f.n, f.n + 1))
    for i in range(f.n):
        sel = ((idx >> i) & 1) == 1
        out[i] = np.bincount(pc[sel] - 1, weights=c[sel] ** 2, minlength=f.n + 1)
    return out


def abs_derivative_level_weights(f: CubeFunction) -> np.ndarray:
    """Row i-1 holds the level weights of |d_i f|."""
    return np.stack([level_weights(wht_forward(abs_derivative(f, i))).W for i in range(1, f.n + 1)])


def noise_stability(f: CubeFunction, eps) -> float:
    """S_eps = sum_{S nonempty} fhat(S)^2 (1-eps)^|S|."""
    eps = _check_unit_interval("eps", eps)
    W = level_weights(wht_forward(f)).W
    rho = np.power.outer(1.0 - eps, np.arange(f.n + 1))
    out = (rho[..., 1:] * W[1:]).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def time_variance(f: CubeFunction, t) -> float:
    """Var(f_t) = sum_{S nonempty} fhat(S)^2 t^(2|S|)."""
    t = _check_unit_interval("t", t)
    return level_weights(wht_forward(f)).curve(t, start_level=1)


def R_value(f: CubeFunction, t, weights: np.ndarray | None = None):
    """R(t) = E ||grad f_t||^2 = sum_i sum_S (d_i f hat(S))^2 t^(2|S|)."""
    t = _check_unit_interval("t", t)
    W = derivative_level_weights(f) if weights is None else weights
    return LevelWeights(f.n, W.sum(axis=0)).curve(t)


def psi_value(f: CubeFunction, i: int, t, weights: np.ndarray | None = None):
    """psi_i(t) = E (f_t^(i))^2."""
    _check_index(f, i)
    t = _check_unit_interval("t", t)
    W = abs_derivative_level_weights(f) if weights is None else weights
    return LevelWeights(f.n, W[i - 1]).curve(t)


def monotonize(f: CubeFunction, i: int) -> CubeFunction:
    """kappa_i: max over the i-edge where y_i = 1, min where y_i = -1."""
    _require_boolean(f, "monotonize")
    _check_index(f, i)
    lo, hi = _pairs(f.values, i)
    values = np.stack([np.minimum(lo, hi), np.maximum(lo, hi)], axis=1).reshape(-1)
    return CubeFunction(n=f.n, values=values, kind=f.kind, label=f"k{i}({f.label})")


def monotonize_chain(f: CubeFunction) -> CubeFunction:
    g = f
    for i in range(1, f.n + 1):
        g = monotonize(g, i)
    return g


def level_table(g: CubeFunction) -> np.ndarray:
    """Row k at mask m is g^{=k}(sigma_m) = sum_{|S|=k} ghat(S) chi_S(sigma_m)."""
    c = wht_forward(g).coeffs
    pc = popcounts(g.n)
    rows = np.zeros((g.n + 1, g.size))
    for k in range(g.n + 1):
        sel = pc == k
        rows[k, sel] = c[sel]
    _butterfly(rows, inverse=True)
    return rows


def segment_polynomial(values: np.ndarray, mask: int, n: int) -> np.ndarray:
    """Ascending coefficients of t -> g(t*sigma_mask) by folding the truth table."""
    P = np.asarray(values, dtype=np.float64)[:, None]
    for i in reversed(range(n)):
        half = P.shape[0] // 2
        lo, hi = P[:half], P[half:]
        s = 1.0 if (mask >> i) & 1 else -1.0
        new = np.zeros((half, P.shape[1] + 1))
        new[:, :-1] = 0.5 * (lo + hi)
        new[:, 1:] += s * 0.5 * (hi - lo)
        P = new
    return P[0]


class SegmentPolynomials:
    """Evaluates g along path segments.

    While no coordinate jumps, B_t = t*sigma for a fixed vertex sigma, so
    g(B_t) is the polynomial sum_k g^{=k}(sigma) t^k.
    """

    def __init__(self, g: CubeFunction):
        self.n = g.n
        if g.n <= config.LEVEL_TABLE_MAX_N:
            self._table = level_table(g)
            nonzero = np.flatnonzero(np.any(np.abs(self._table) > 1e-15, axis=1))
            self.degree = int(nonzero[-1]) if nonzero.size else 0
            self._values = None
        else:
            self._table = None
            self.degree = g.n
            self._values = g.values

    def coefficients(self, masks) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        if self._table is not None:
            return self._table[: self.degree + 1, masks].T
        return np.stack([segment_polynomial(self._values, int(m), self.n) for m in masks.ravel()])

    def evaluate(self, masks, t) -> np.ndarray:
        masks = np.asarray(masks, dtype=np.int64)
        t = np.asarray(t, dtype=np.float64)
        if self._table is None:
            coeffs = self.coefficients(masks)
            out = coeffs[:, -1] * np.ones_like(t)
            for k in range(coeffs.shape[1] - 2, -1, -1):
                out = out * t + coeffs[:, k]
            return out
        out = self._table[self.degree, masks] * np.ones_like(t)
        for k in range(self.degree - 1, -1, -1):
            out = out * t + self._table[k, masks]
        return out

"""Fourier analysis under the p-biased product measure.

Under mu_p coordinate i equals +1 with probability p_i. The orthonormal
basis is omega_i = (y_i - (2p_i - 1)) / (2 sqrt(p_i (1 - p_i))).
"""

import logging
import math

import numpy as np

from boolfn import _as_points, _check_index, _fold, _pairs, derivative
from errors import DegenerateMeasureError, ParameterError
from models import BiasedBasisParams, BiasedExpansion, CubeFunction

logger = logging.getLogger(__name__)


def make_params(p, n: int | None = None) -> BiasedBasisParams:
    """Validate a probability vector (a scalar is broadcast to n coordinates)."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim == 0:
        if n is None:
            raise ParameterError("scalar p needs the dimension n")
        arr = np.full(n, float(arr))
    if n is not None and arr.size != n:
        raise ParameterError(f"expected {n} probabilities, got {arr.size}")
    if not np.all(np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise ParameterError("probabilities must lie in [0, 1]")
    if np.any((arr == 0.0) | (arr == 1.0)):
        raise DegenerateMeasureError("biased basis is undefined when some p_i is 0 or 1")
    return BiasedBasisParams(p=arr)


def vertex_weights(params: BiasedBasisParams) -> np.ndarray:
    """mu_p mass of every vertex mask."""
    n = params.p.size
    idx = np.arange(1 << n, dtype=np.int64)
    w = np.ones(1 << n)
    for i, pi in enumerate(params.p):
        w *= np.where((idx >> i) & 1, pi, 1.0 - pi)
    return w


def biased_transform(f: CubeFunction, params: BiasedBasisParams) -> BiasedExpansion:
    """fhat_p(S) = E_{mu_p}[f omega_S], one weighted butterfly per coordinate."""
    if params.p.size != f.n:
        raise ParameterError(f"expected {f.n} probabilities, got {params.p.size}")
    a = np.array(f.values, dtype=np.float64, copy=True)
    for i, pi in enumerate(params.p):
        sigma = 2.0 * math.sqrt(pi * (1.0 - pi))
        mu = 2.0 * pi - 1.0
        w_plus = (1.0 - mu) / sigma
        w_minus = (-1.0 - mu) / sigma
        view = a.reshape(-1, 2, 1 << i)
        lo = view[:, 0, :].copy()
        hi = view[:, 1, :].copy()
        view[:, 0, :] = (1.0 - pi) * lo + pi * hi
        view[:, 1, :] = (1.0 - pi) * w_minus * lo + pi * w_plus * hi
    return BiasedExpansion(n=f.n, params=params, coeffs=a)


def biased_influence(f: CubeFunction, params: BiasedBasisParams, i: int) -> float:
    """Inf_i^p = 4 p_i (1 - p_i) P_{mu_p}[f(y) != f(y^i)]."""
    _check_index(f, i)
    lo, hi = _pairs(f.values, i)
    w_lo, w_hi = _pairs(vertex_weights(params), i)
    flip = (lo != hi)
    prob = float(np.sum((w_lo + w_hi)[flip]))
    pi = params.p[i - 1]
    return 4.0 * pi * (1.0 - pi) * prob


def biased_derivative_identity(f: CubeFunction, params: BiasedBasisParams, S, c: float = 1.0) -> dict:
    """Both sides of d_S f(2p-1) = prod_{i in S} c / sqrt(1 - x_i^2) * fhat_p(S).

    Args:
        f: Function on the cube.
        params: Biased measure.
        S: 1-based coordinate indices.
        c: Per-coordinate factor constant; 1 keeps omega orthonormal.

    Returns:
        {"lhs": ..., "rhs": ...}
    """
    S = sorted(set(int(i) for i in S))
    if len(S) > f.n:
        raise ParameterError(f"|S|={len(S)} exceeds n={f.n}")
    g = f
    for i in S:
        _check_index(f, i)
        g = derivative(g, i)
    x = params.x
    lhs = float(_fold(g.values, _as_points(f, x))[0])

    mask = sum(1 << (i - 1) for i in S)
    coeff = float(biased_transform(f, params).coeffs[mask])
    factor = 1.0
    for i in S:
        factor *= c / math.sqrt(1.0 - x[i - 1] ** 2)
    return {"lhs": lhs, "rhs": factor * coeff}

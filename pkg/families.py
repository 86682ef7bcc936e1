"""Canonical Boolean function families and the function-spec grammar.

    dictator:n  parity:n  majority:n  tribes:w:s  threshold:n:k
    subcube:n:k  random:n:seed[:bias]  file:<path>

TRUE is +1 throughout; tribes blocks are consecutive coordinate ranges.
"""

import json
import logging
from pathlib import Path

import numpy as np

import config
from boolfn import check_dimension, make_function, popcounts
from errors import ReportIOError, SpecError
from models import CubeFunction, FunctionKind

logger = logging.getLogger(__name__)


def _bool_table(condition: np.ndarray) -> np.ndarray:
    return np.where(condition, 1.0, -1.0)


def dictator(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    return _bool_table((idx & 1) == 1)


def parity(n: int) -> np.ndarray:
    minus = n - popcounts(n)
    return np.where(minus % 2 == 0, 1.0, -1.0)


def majority(n: int) -> np.ndarray:
    if n % 2 == 0:
        raise SpecError(f"majority needs odd n, got {n}")
    return _bool_table(2 * popcounts(n) > n)


def tribes(w: int, s: int) -> np.ndarray:
    n = w * s
    idx = np.arange(1 << n, dtype=np.int64)
    block = (1 << w) - 1
    hit = np.zeros(1 << n, dtype=bool)
    for j in range(s):
        hit |= ((idx >> (j * w)) & block) == block
    return _bool_table(hit)


def threshold(n: int, k: int) -> np.ndarray:
    if not 1 <= k <= n:
        raise SpecError(f"threshold needs 1 <= k <= n, got k={k}, n={n}")
    return _bool_table(popcounts(n) >= k)


def subcube(n: int, k: int) -> np.ndarray:
    if not 1 <= k <= n:
        raise SpecError(f"subcube needs 1 <= k <= n, got k={k}, n={n}")
    idx = np.arange(1 << n, dtype=np.int64)
    low = (1 << k) - 1
    return _bool_table((idx & low) == low)


def random_function(n: int, seed: int, bias: float = 0.5) -> np.ndarray:
    if not 0.0 <= bias <= 1.0:
        raise SpecError(f"random bias must lie in [0, 1], got {bias}")
    rng = np.random.Generator(np.random.Philox(seed))
    return _bool_table(rng.random(1 << n) < bias)


def _ints(parts: list[str], spec: str) -> list[int]:
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise SpecError(f"malformed function spec {spec!r}: expected integers")


def make(spec: str) -> CubeFunction:
    """Build a corpus function from its spec string.

    Args:
        spec: One of the family specs in the module docstring.

    Returns:
        A boolean CubeFunction labelled with the spec.
    """
    spec = spec.strip()
    if not spec:
        raise SpecError("empty function spec")
    family, _, rest = spec.partition(":")
    family = family.lower()
    if family == "file":
        if not rest:
            raise SpecError("file spec needs a path")
        return load_function(rest)

    parts = rest.split(":") if rest else []

    if family in ("dictator", "parity", "majority"):
        if len(parts) != 1:
            raise SpecError(f"{family} spec takes one argument, got {spec!r}")
        (n,) = _ints(parts, spec)
        check_dimension(n)
        table = {"dictator": dictator, "parity": parity, "majority": majority}[family](n)
    elif family == "tribes":
        if len(parts) != 2:
            raise SpecError(f"tribes spec is tribes:w:s, got {spec!r}")
        w, s = _ints(parts, spec)
        if w < 1 or s < 1:
            raise SpecError(f"tribes needs positive w and s, got {spec!r}")
        check_dimension(w * s)
        table = tribes(w, s)
    elif family in ("threshold", "subcube"):
        if len(parts) != 2:
            raise SpecError(f"{family} spec is {family}:n:k, got {spec!r}")
        n, k = _ints(parts, spec)
        check_dimension(n)
        table = threshold(n, k) if family == "threshold" else subcube(n, k)
    elif family == "random":
        if len(parts) not in (2, 3):
            raise SpecError(f"random spec is random:n:seed[:bias], got {spec!r}")
        n, seed = _ints(parts[:2], spec)
        check_dimension(n)
        try:
            bias = float(parts[2]) if len(parts) == 3 else 0.5
        except ValueError:
            raise SpecError(f"malformed random bias in {spec!r}")
        table = random_function(n, seed, bias)
    else:
        raise SpecError(f"unknown function family {family!r}")

    return make_function(table, kind=FunctionKind.BOOLEAN, label=spec)


def parse_corpus(text: str | None) -> list[str]:
    """Comma-separated specs; 'default' (or nothing) selects the default corpus."""
    if text is None or text.strip().lower() == "default":
        return list(config.DEFAULT_CORPUS)
    specs = [s.strip() for s in text.split(",") if s.strip()]
    if not specs:
        raise SpecError("corpus is empty")
    return specs


def load_function(path: str | Path) -> CubeFunction:
    """Read {"n": int, "values": [...]} in mask order."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise SpecError(f"cannot read function file {path}: {e}")
    except json.JSONDecodeError as e:
        raise SpecError(f"function file {path} is not valid JSON: {e}")
    if not isinstance(data, dict) or "n" not in data or "values" not in data:
        raise SpecError(f"function file {path} must hold an object with 'n' and 'values'")
    n = data["n"]
    if not isinstance(n, int):
        raise SpecError(f"'n' must be an integer in {path}")
    check_dimension(n)
    values = data["values"]
    if not isinstance(values, list) or len(values) != (1 << n):
        raise SpecError(f"{path}: expected 2^{n} values")
    f = make_function(values, label=f"file:{path}")
    logger.info(f"Loaded {f.kind.value} function n={n} from {path}")
    return f


def save_function(f: CubeFunction, path: str | Path):
    path = Path(path)
    try:
        path.write_text(json.dumps({"n": f.n, "values": [float(v) for v in f.values]}))
    except OSError as e:
        raise ReportIOError(f"cannot write function file {path}: {e}")

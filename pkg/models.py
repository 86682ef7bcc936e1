import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from errors import ConfigurationError, ParameterError


@dataclass
class ScanStage:
    """Represents a single stage in the verification pipeline."""
    name: str       # "load_function", "exact_checks", "mc_block", "check", ...
    data: dict = field(default_factory=dict)
    timestamp: float = field(default_factory=time.time)


class FunctionKind(str, Enum):
    BOOLEAN = "boolean"        # values in {-1, +1}
    DERIVATIVE = "derivative"  # values in {-1, 0, +1}
    UNIT = "unit"              # values in [0, 1]
    GENERAL = "general"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CubeFunction:
    """Truth table of a real function on {-1,1}^n in vertex-mask order.

    Bit i of the mask is set iff coordinate i+1 equals +1.
    """
    n: int
    values: np.ndarray
    kind: FunctionKind = FunctionKind.GENERAL
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def size(self) -> int:
        return 1 << self.n

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True, eq=False)
class FourierExpansion:
    n: int
    coeffs: np.ndarray  # indexed by subset mask

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))


@dataclass(frozen=True, eq=False)
class LevelWeights:
    n: int
    W: np.ndarray  # W[k] = sum of squared coefficients at level k

    def __post_init__(self):
        object.__setattr__(self, "W", _frozen(self.W))

    def curve(self, t, start_level: int = 0):
        """Evaluate sum_k W[k] t^(2k) over levels >= start_level."""
        t = np.asarray(t, dtype=np.float64)
        k = np.arange(self.n + 1)
        powers = np.power.outer(t * t, k)
        out = (powers[..., start_level:] * self.W[start_level:]).sum(axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class BiasedBasisParams:
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p))

    @property
    def x(self) -> np.ndarray:
        """Mean point 2p - 1 of the biased measure."""
        return 2.0 * self.p - 1.0


@dataclass(frozen=True, eq=False)
class BiasedExpansion:
    n: int
    params: BiasedBasisParams
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))


@dataclass
class SpectralStats:
    n: int
    mean: float
    variance: float
    influences: list
    total_influence: float
    sum_sq_influences: float
    max_influence: float
    is_monotone: bool


@dataclass
class SensitivityProfile:
    sensitivity: np.ndarray            # h_f(y) per vertex
    moments: dict                      # p -> E[h_f^p]
    mu_boundary: float
    mu_plus: float
    mu_minus: float


@dataclass(frozen=True)
class CoordinatePath:
    eps: float
    sign_at_eps: int
    jump_times: tuple

    def sign_at(self, t: float) -> int:
        flips = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.sign_at_eps if flips % 2 == 0 else -self.sign_at_eps


@dataclass(frozen=True)
class SamplePath:
    n: int
    coords: tuple
    seed_tag: str = ""

    @property
    def eps(self) -> float:
        return self.coords[0].eps


@dataclass(frozen=True)
class HesitantOverlay:
    extra_jump_times: tuple  # one strictly increasing tuple per coordinate


@dataclass
class PathObservables:
    qv_total: float
    qv_by_coord: np.ndarray
    V_alpha: float
    Q_alpha: float
    F_alpha_hit: bool
    sup_process: float
    theta: float
    theta_truncated: bool
    tau_alpha: float
    psi_max: float
    f_end: float
    grad_end: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sq: np.ndarray = field(default_factory=lambda: np.empty(0))
    hesitation_time: Optional[float] = None

    def qv_window(self, t1: float, t2: float) -> float:
        """Quadratic variation gained over (t1, t2]."""
        if t2 < t1:
            raise ParameterError(f"qv_window needs t1 <= t2, got ({t1}, {t2})")
        sel = (self.jump_times > t1) & (self.jump_times <= t2)
        return float(self.jump_sq[sel].sum())


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed_tag: str = ""

    @classmethod
    def from_sums(cls, total: float, total_sq: float, count: int, seed_tag: str = "") -> "MCEstimate":
        if count < 2:
            raise ParameterError(f"MC estimate needs at least 2 samples, got {count}")
        mean = total / count
        var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
        return cls(mean=mean, std_error=math.sqrt(var / count), n_samples=count, seed_tag=seed_tag)

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error + slack


@dataclass
class GfEstimate:
    n: int
    values: np.ndarray        # conditional mean of sup_process per endpoint vertex
    counts: np.ndarray
    std_errors: np.ndarray
    low_confidence: np.ndarray
    n_samples: int
    seed_tag: str = ""


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    REPORT = "report"


@dataclass
class CheckResult:
    function: str
    check: str
    lhs: Optional[float]
    rhs: Optional[float]
    ratio: Optional[float]
    status: CheckStatus
    se: Optional[float] = None
    n_samples: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "function": self.function,
            "check": self.check,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "status": self.status.value,
            "se": self.se,
            "n_samples": self.n_samples,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(
            function=d["function"],
            check=d["check"],
            lhs=d.get("lhs"),
            rhs=d.get("rhs"),
            ratio=d.get("ratio"),
            status=CheckStatus(d["status"]),
            se=d.get("se"),
            n_samples=d.get("n_samples"),
            meta=d.get("meta") or {},
        )


@dataclass
class CorpusReport:
    environment: dict
    results: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [r for r in self.results if r.status == CheckStatus.FAIL]

    def counts(self) -> dict:
        out = {s.value: 0 for s in CheckStatus}
        for r in self.results:
            out[r.status.value] += 1
        return out


@dataclass
class RunConfig:
    """Parameters for one CLI command."""
    command: str
    function: Optional[str] = None
    corpus: tuple = ()
    n_paths: int = 100000
    eps: float = 1e-6
    seed: int = 42
    alpha: float = 0.5
    p: float = 0.5
    grid_step: float = 1 / 1024
    out: Optional[str] = None
    workers: int = 1
    count: int = 5

    def validate(self) -> "RunConfig":
        if self.n_paths < 100:
            raise ParameterError(f"--paths must be at least 100, got {self.n_paths}")
        if not 1e-9 <= self.eps <= 0.01:
            raise ParameterError(f"--eps must lie in [1e-9, 0.01], got {self.eps}")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"--alpha must lie in (0, 1], got {self.alpha}")
        if not 0.5 <= self.p <= 1:
            raise ParameterError(f"--p must lie in [1/2, 1], got {self.p}")
        if not 0 < self.grid_step <= 0.5:
            raise ParameterError(f"--grid-step must lie in (0, 0.5], got {self.grid_step}")
        if self.workers < 1:
            raise ConfigurationError(f"--workers must be positive, got {self.workers}")
        if self.count < 1:
            raise ParameterError(f"--count must be positive, got {self.count}")
        return self

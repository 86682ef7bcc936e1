import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

VERSION = "1.0.0"

# Monte Carlo defaults
BFA_SEED = int(os.getenv("BFA_SEED", "42"))
BFA_PATHS = int(os.getenv("BFA_PATHS", "100000"))
BFA_EPS = float(os.getenv("BFA_EPS", "1e-6"))
BFA_WORKERS = int(os.getenv("BFA_WORKERS", str(os.cpu_count() or 1)))
BFA_BLOCK_SIZE = int(os.getenv("BFA_BLOCK_SIZE", "1024"))

# Scan grid for continuous path segments (theta, sup, tau)
BFA_GRID_STEP = float(os.getenv("BFA_GRID_STEP", str(1 / 1024)))

# Outputs
BFA_OUTPUT_DIR = Path(os.getenv("BFA_OUTPUT_DIR", "out"))
BFA_DB_PATH = Path(os.getenv("BFA_DB_PATH", "runs.db"))
BFA_LOG_LEVEL = os.getenv("BFA_LOG_LEVEL", "INFO").upper()

# Capacity limits
EXACT_MAX_N = 24
MC_MAX_N = 32
GF_MAX_N = 12
EXACT_CHECK_MAX_N = 16
# Above this, segment polynomials are folded per query instead of tabulated
LEVEL_TABLE_MAX_N = 18
# MC rows of the verification suite run only for functions up to this size
MC_CHECK_MAX_N = 12

# Truncation window accepted by the sampler
EPS_MIN = 1e-9
EPS_MAX = 0.01

# Statistical acceptance
SE_MULTIPLIER = 3.0
LOW_CONFIDENCE_COUNT = 30

# Exponents for the sensitivity-moment bound; the open endpoint 1 is represented by 0.99
P_SWEEP = (0.5, 0.75, 0.99)

DEFAULT_CORPUS = (
    "dictator:8",
    "parity:5",
    "majority:3",
    "majority:9",
    "majority:15",
    "tribes:3:4",
    "threshold:9:6",
    "subcube:8:3",
    "random:6:1",
    "random:6:2",
    "random:6:3",
    "random:6:4",
    "random:6:5",
)


def mc_paths_for(n: int, requested: int) -> int:
    """Path count for conditional-bucket estimates: at least 100 per vertex."""
    return max(requested, 100 * (1 << n))

"""Block-parallel Monte Carlo driver.

Paths are cut into fixed-size blocks; block b always draws from the stream
derived from (seed, b). Workers take whole blocks and partial results are
merged in block order, so estimates are bit-identical for any worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

import config
from models import ScanStage
from paths import block_rng

logger = logging.getLogger(__name__)


def plan_blocks(n_paths: int, block_size: int = config.BFA_BLOCK_SIZE) -> list[tuple[int, int]]:
    """(block index, paths in block) covering n_paths."""
    full, rest = divmod(n_paths, block_size)
    blocks = [(b, block_size) for b in range(full)]
    if rest:
        blocks.append((full, rest))
    return blocks


def run_blocks(
    kernel: Callable,
    n_paths: int,
    seed: int,
    workers: int = 1,
    block_size: int = config.BFA_BLOCK_SIZE,
    on_stage: Optional[Callable] = None,
    label: str = "",
) -> list:
    """Run kernel(size, rng, seed_tag) once per block; results in block order."""
    blocks = plan_blocks(n_paths, block_size)

    def _one(block):
        b, size = block
        tag = f"philox:{seed}:b{b}"
        return kernel(size, block_rng(seed, b), tag)

    if workers <= 1 or len(blocks) == 1:
        results = [_one(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, blocks))

    logger.debug(f"{label or 'mc'}: {len(blocks)} blocks, {n_paths} paths, workers={workers}")
    if on_stage:
        on_stage(ScanStage(name="mc_run", data={"label": label, "blocks": len(blocks), "paths": n_paths}))
    return results


def merge_sums(partials: list[dict]) -> dict:
    """Sum dict-valued partials key by key, in the given order."""
    if not partials:
        return {}
    merged = {}
    for part in partials:
        for key, value in part.items():
            if key in merged:
                merged[key] = merged[key] + value
            else:
                merged[key] = np.array(value, dtype=np.float64, copy=True) if np.ndim(value) else float(value)
    return merged

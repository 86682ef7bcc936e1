"""Exact sampler for the jump martingale B_t and its hesitant variant.

Every coordinate has |B_t^(i)| = t and flips sign at the points of a Poisson
process with rate 1/(2t). Survival from t to s is sqrt(t/s), so the next
jump after t is t/u^2 for u uniform on (0, 1]. The jump set accumulates at
0, so paths are realized on [eps, 1] with the exact uniform law at eps.

Paths are generated in blocks. Block b of a run draws from its own Philox
stream derived from (seed, b), so results do not depend on how blocks are
spread over workers.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

import config
from errors import CapacityError, DomainError, ParameterError, TruncationError
from models import CoordinatePath, HesitantOverlay, SamplePath

logger = logging.getLogger(__name__)


def next_jump_time(t: float, u: float) -> float:
    """First jump after t for the uniform draw u; a value > 1 means none before time 1."""
    if not 0.0 < t <= 1.0:
        raise DomainError(f"jump clock needs 0 < t <= 1, got {t}")
    if not 0.0 < u <= 1.0:
        raise DomainError(f"uniform draw must lie in (0, 1], got {u}")
    return t / (u * u)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def check_path_args(n: int, eps: float):
    if not 1 <= n <= config.MC_MAX_N:
        raise CapacityError(f"n={n} is outside 1..{config.MC_MAX_N} for path sampling")
    if not config.EPS_MIN <= eps <= config.EPS_MAX:
        raise ParameterError(f"eps must lie in [{config.EPS_MIN}, {config.EPS_MAX}], got {eps}")


def _jump_chains(rng: np.random.Generator, chains: int, eps: float):
    """Iterate next_jump_time from eps for many independent chains at once.

    Returns (chain index, jump time) pairs for all jumps in (eps, 1].
    """
    owners, times = [], []
    alive = np.arange(chains, dtype=np.int64)
    t = np.full(chains, eps)
    while alive.size:
        u = 1.0 - rng.random(alive.size)
        t = t / (u * u)
        keep = t <= 1.0
        alive = alive[keep]
        t = t[keep]
        owners.append(alive)
        times.append(t)
    if not owners:
        return np.empty(0, dtype=np.int64), np.empty(0)
    return np.concatenate(owners), np.concatenate(times)


def _untie(rng, owner, times, movable, n, eps):
    """Redraw chains involved in exact time ties within a path.

    Ties have probability zero; they are resampled and counted. Only chains
    flagged movable are redrawn.
    """
    collisions = 0
    while owner.size:
        path = owner // n
        order = np.lexsort((times, path))
        p_sorted, t_sorted, o_sorted = path[order], times[order], owner[order]
        m_sorted = movable[order]
        dup = (p_sorted[1:] == p_sorted[:-1]) & (t_sorted[1:] == t_sorted[:-1])
        if not dup.any():
            break
        left, right = np.flatnonzero(dup), np.flatnonzero(dup) + 1
        pick = np.where(m_sorted[right], o_sorted[right], o_sorted[left])
        bad = np.unique(pick)
        collisions += bad.size
        logger.warning(f"Resampling {bad.size} jump chain(s) after exact time ties")
        drop = np.isin(owner, bad) & movable
        local, new_times = _jump_chains(rng, bad.size, eps)
        owner = np.concatenate([owner[~drop], bad[local]])
        times = np.concatenate([times[~drop], new_times])
        movable = np.concatenate([movable[~drop], np.ones(local.size, dtype=bool)])
    return owner, times, movable, collisions


@dataclass
class Segments:
    """Maximal intervals [start, end) of constant vertex, ordered by (path, start)."""
    path: np.ndarray
    start: np.ndarray
    end: np.ndarray
    mask: np.ndarray
    event: np.ndarray      # index of the jump opening the segment, -1 at eps
    first: np.ndarray      # index of each path's first segment (length size + 1)


START, INTERIOR, END = 0, 1, 2


@dataclass
class ScanPoints:
    """Evaluation times along every segment, in time order per path.

    END points carry the left limit at the segment end (the segment's vertex).
    """
    seg: np.ndarray
    time: np.ndarray
    kind: np.ndarray
    path: np.ndarray
    first: np.ndarray      # index of each path's first point (length size + 1)


class PathBatch:
    """Paths of one block stored as flat event arrays sorted by (path, time)."""

    def __init__(
        self,
        n: int,
        eps: float,
        init_mask: np.ndarray,
        ev_path: np.ndarray,
        ev_coord: np.ndarray,
        ev_time: np.ndarray,
        extra=None,
        seed_tag: str = "",
        collisions: int = 0,
    ):
        self.n = n
        self.eps = eps
        self.init_mask = np.asarray(init_mask, dtype=np.int64)
        self.size = self.init_mask.size
        order = np.lexsort((ev_time, ev_path))
        self.ev_path = np.asarray(ev_path, dtype=np.int64)[order]
        self.ev_coord = np.asarray(ev_coord, dtype=np.int64)[order]
        self.ev_time = np.asarray(ev_time, dtype=np.float64)[order]
        self.offsets = np.searchsorted(self.ev_path, np.arange(self.size + 1), side="left")
        if extra is not None:
            x_path, x_coord, x_time = (np.asarray(a) for a in extra)
            x_order = np.lexsort((x_time, x_path))
            extra = (x_path[x_order].astype(np.int64), x_coord[x_order].astype(np.int64),
                     x_time[x_order].astype(np.float64))
        self.extra = extra
        self.seed_tag = seed_tag
        self.collisions = collisions

        bits = np.left_shift(np.int64(1), self.ev_coord)
        cum = np.concatenate([[0], np.bitwise_xor.accumulate(bits)]) if bits.size else np.zeros(1, dtype=np.int64)
        cum = cum.astype(np.int64)
        prefix = cum[self.offsets[:-1]]
        self.after_mask = self.init_mask[self.ev_path] ^ cum[1:] ^ prefix[self.ev_path]
        self.before_mask = self.after_mask ^ bits
        self.end_mask = self.init_mask ^ cum[self.offsets[1:]] ^ prefix

    @property
    def n_events(self) -> int:
        return int(self.ev_time.size)

    def masks_at(self, t: float) -> np.ndarray:
        """Vertex mask of every path at time t (right-continuous)."""
        if t < self.eps:
            raise TruncationError(f"t={t} precedes the truncation time {self.eps}")
        if t > 1.0:
            raise DomainError(f"t={t} exceeds 1")
        sel = self.ev_time <= t
        counts = np.bincount(self.ev_path[sel] * self.n + self.ev_coord[sel], minlength=self.size * self.n)
        parity = (counts.reshape(self.size, self.n) & 1).astype(np.int64)
        return self.init_mask ^ (parity << np.arange(self.n, dtype=np.int64)).sum(axis=1)

    def masks_at_times(self, paths: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Vertex mask of path paths[k] at time times[k]."""
        paths = np.asarray(paths, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        if self.n_events == 0:
            return self.init_mask[paths]
        key = self.ev_path + 0.5 * self.ev_time
        idx = np.searchsorted(key, paths + 0.5 * times, side="right") - 1
        valid = idx >= self.offsets[paths]
        return np.where(valid, self.after_mask[np.clip(idx, 0, None)], self.init_mask[paths])

    def signs_at(self, t: float) -> np.ndarray:
        masks = self.masks_at(t)
        bits = (masks[:, None] >> np.arange(self.n, dtype=np.int64)) & 1
        return np.where(bits == 1, 1.0, -1.0)

    def points_at(self, t: float) -> np.ndarray:
        return t * self.signs_at(t)

    def end_signs(self) -> np.ndarray:
        bits = (self.end_mask[:, None] >> np.arange(self.n, dtype=np.int64)) & 1
        return np.where(bits == 1, 1.0, -1.0)

    def jump_counts(self, a: float, b: float) -> np.ndarray:
        """Number of jumps of each (path, coordinate) in [a, b]."""
        sel = (self.ev_time >= a) & (self.ev_time <= b)
        counts = np.bincount(self.ev_path[sel] * self.n + self.ev_coord[sel], minlength=self.size * self.n)
        return counts.reshape(self.size, self.n)

    def extra_counts(self, a: float, b: float) -> np.ndarray:
        if self.extra is None:
            raise ParameterError("batch was sampled without a hesitant overlay")
        x_path, x_coord, x_time = self.extra
        sel = (x_time >= a) & (x_time <= b)
        counts = np.bincount(x_path[sel] * self.n + x_coord[sel], minlength=self.size * self.n)
        return counts.reshape(self.size, self.n)

    @cached_property
    def segments(self) -> Segments:
        E, P = self.n_events, self.size
        total = E + P
        first = self.offsets + np.arange(P + 1)
        seg_path = np.empty(total, dtype=np.int64)
        start = np.empty(total)
        mask = np.empty(total, dtype=np.int64)
        event = np.full(total, -1, dtype=np.int64)

        heads = first[:-1]
        seg_path[heads] = np.arange(P)
        start[heads] = self.eps
        mask[heads] = self.init_mask
        pos = np.arange(E) + self.ev_path + 1
        seg_path[pos] = self.ev_path
        start[pos] = self.ev_time
        mask[pos] = self.after_mask
        event[pos] = np.arange(E)

        end = np.ones(total)
        if total > 1:
            same = seg_path[1:] == seg_path[:-1]
            end[:-1] = np.where(same, start[1:], 1.0)
        return Segments(path=seg_path, start=start, end=end, mask=mask, event=event, first=first)

    def scan_points(self, step: float) -> ScanPoints:
        """Segment starts, grid times k*step strictly inside, and segment ends."""
        seg = self.segments
        k = int(np.ceil(1.0 / step))
        grid = np.arange(1, k + 1) * step
        grid[-1] = 1.0
        lo = np.searchsorted(grid, seg.start, side="right")
        hi = np.searchsorted(grid, seg.end, side="left")
        per_seg = np.maximum(hi - lo, 0) + 2
        seg_of = np.repeat(np.arange(seg.start.size), per_seg)
        head = np.cumsum(per_seg) - per_seg
        local = np.arange(seg_of.size) - head[seg_of]
        kind = np.where(local == 0, START, np.where(local == per_seg[seg_of] - 1, END, INTERIOR))
        grid_idx = np.clip(lo[seg_of] + local - 1, 0, grid.size - 1)
        time = np.select([kind == START, kind == END], [seg.start[seg_of], seg.end[seg_of]], grid[grid_idx])
        path_first = np.searchsorted(seg_of, seg.first, side="left")
        return ScanPoints(seg=seg_of, time=time, kind=kind, path=seg.path[seg_of], first=path_first)

    def path(self, k: int) -> SamplePath:
        lo, hi = self.offsets[k], self.offsets[k + 1]
        coords = []
        for i in range(self.n):
            sel = self.ev_coord[lo:hi] == i
            coords.append(CoordinatePath(
                eps=self.eps,
                sign_at_eps=1 if (self.init_mask[k] >> i) & 1 else -1,
                jump_times=tuple(float(t) for t in self.ev_time[lo:hi][sel]),
            ))
        return SamplePath(n=self.n, coords=tuple(coords), seed_tag=f"{self.seed_tag}:path{k}")

    def overlay(self, k: int) -> HesitantOverlay:
        if self.extra is None:
            raise ParameterError("batch was sampled without a hesitant overlay")
        x_path, x_coord, x_time = self.extra
        sel = x_path == k
        return HesitantOverlay(extra_jump_times=tuple(
            tuple(float(t) for t in x_time[sel & (x_coord == i)]) for i in range(self.n)
        ))


def sample_batch(
    n: int,
    eps: float,
    size: int,
    rng: np.random.Generator,
    hesitant: bool = False,
    seed_tag: str = "",
) -> PathBatch:
    """Sample `size` independent paths, optionally with hesitant overlays.

    Args:
        n: Dimension (1..32).
        eps: Truncation time.
        size: Number of paths.
        rng: Generator owning this block's stream.
        hesitant: Also draw the independent extra jump sets.
        seed_tag: Reproducibility record carried into results.
    """
    check_path_args(n, eps)
    shifts = np.arange(n, dtype=np.int64)
    init_bits = rng.integers(0, 2, size=(size, n), dtype=np.int64)
    init_mask = (init_bits << shifts).sum(axis=1)

    owner, times = _jump_chains(rng, size * n, eps)
    owner, times, _, collisions = _untie(rng, owner, times, np.ones(owner.size, dtype=bool), n, eps)

    extra = None
    if hesitant:
        x_owner, x_times = _jump_chains(rng, size * n, eps)
        all_owner = np.concatenate([owner, x_owner])
        all_times = np.concatenate([times, x_times])
        movable = np.concatenate([np.zeros(owner.size, dtype=bool), np.ones(x_owner.size, dtype=bool)])
        all_owner, all_times, movable, more = _untie(rng, all_owner, all_times, movable, n, eps)
        collisions += more
        extra = (all_owner[movable] // n, all_owner[movable] % n, all_times[movable])

    logger.debug(f"Sampled block {seed_tag}: {size} paths, {times.size} jumps")
    return PathBatch(
        n=n, eps=eps, init_mask=init_mask,
        ev_path=owner // n, ev_coord=owner % n, ev_time=times,
        extra=extra, seed_tag=seed_tag, collisions=collisions,
    )


def sample_path(n: int, eps: float, rng: np.random.Generator) -> SamplePath:
    return sample_batch(n, eps, 1, rng).path(0)


def batch_from_paths(paths: list[SamplePath], overlays: list[HesitantOverlay] | None = None) -> PathBatch:
    """Pack single paths into a batch so the vectorized functionals apply."""
    if not paths:
        raise ParameterError("need at least one path")
    n, eps = paths[0].n, paths[0].eps
    init_mask, ev_path, ev_coord, ev_time = [], [], [], []
    x_path, x_coord, x_time = [], [], []
    for k, path in enumerate(paths):
        if path.n != n or path.eps != eps:
            raise ParameterError("paths in one batch must share n and eps")
        mask = 0
        for i, cp in enumerate(path.coords):
            if cp.sign_at_eps == 1:
                mask |= 1 << i
            ev_path.extend([k] * len(cp.jump_times))
            ev_coord.extend([i] * len(cp.jump_times))
            ev_time.extend(cp.jump_times)
            if overlays is not None:
                extra = overlays[k].extra_jump_times[i]
                x_path.extend([k] * len(extra))
                x_coord.extend([i] * len(extra))
                x_time.extend(extra)
        init_mask.append(mask)
    extra = None
    if overlays is not None:
        extra = (np.array(x_path, dtype=np.int64), np.array(x_coord, dtype=np.int64), np.array(x_time, dtype=np.float64))
    return PathBatch(
        n=n, eps=eps, init_mask=np.array(init_mask, dtype=np.int64),
        ev_path=np.array(ev_path, dtype=np.int64), ev_coord=np.array(ev_coord, dtype=np.int64),
        ev_time=np.array(ev_time, dtype=np.float64), extra=extra,
        seed_tag=paths[0].seed_tag,
    )


def _check_time(path: SamplePath, t: float):
    if t < path.eps:
        raise TruncationError(f"t={t} precedes the truncation time {path.eps}; integrate analytically below eps")
    if t > 1.0:
        raise DomainError(f"t={t} exceeds 1")


def point_at(path: SamplePath, t: float) -> np.ndarray:
    """B_t: coordinate i equals t times its current sign."""
    _check_time(path, t)
    return np.array([t * cp.sign_at(t) for cp in path.coords], dtype=np.float64)


def endpoint(path: SamplePath) -> np.ndarray:
    return point_at(path, 1.0)


def hesitant_sample(path: SamplePath, rng: np.random.Generator) -> HesitantOverlay:
    """Independent extra jump sets with the same rate, untied from the base jumps."""
    n, eps = path.n, path.eps
    check_path_args(n, eps)
    base_owner = np.concatenate([np.full(len(cp.jump_times), i, dtype=np.int64) for i, cp in enumerate(path.coords)])
    base_times = np.concatenate([np.asarray(cp.jump_times, dtype=np.float64) for cp in path.coords])
    x_owner, x_times = _jump_chains(rng, n, eps)
    owner = np.concatenate([base_owner, x_owner])
    times = np.concatenate([base_times, x_times])
    movable = np.concatenate([np.zeros(base_owner.size, dtype=bool), np.ones(x_owner.size, dtype=bool)])
    owner, times, movable, _ = _untie(rng, owner, times, movable, n, eps)
    x_owner, x_times = owner[movable], times[movable]
    return HesitantOverlay(extra_jump_times=tuple(
        tuple(float(t) for t in np.sort(x_times[x_owner == i])) for i in range(n)
    ))


def hesitant_point_at(path: SamplePath, overlay: HesitantOverlay, t: float) -> np.ndarray:
    """B~_t: zero in coordinate i exactly at times of J_i or J~_i, else B_t."""
    point = point_at(path, t)
    for i, cp in enumerate(path.coords):
        if t in cp.jump_times or t in overlay.extra_jump_times[i]:
            point[i] = 0.0
    return point

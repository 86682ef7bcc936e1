import math

import numpy as np
import pytest

from errors import CapacityError, DomainError, ParameterError, TruncationError
from models import CoordinatePath
from paths import (
    batch_from_paths,
    block_rng,
    endpoint,
    hesitant_point_at,
    hesitant_sample,
    next_jump_time,
    point_at,
    sample_batch,
    sample_path,
)


class TestJumpClock:

    def test_next_jump(self):
        assert next_jump_time(0.25, 0.5) == pytest.approx(1.0)
        assert next_jump_time(0.5, 1.0) == pytest.approx(0.5)

    def test_beyond_one_means_no_jump(self):
        assert next_jump_time(0.5, 0.1) > 1.0

    @pytest.mark.parametrize("t,u", [(0.0, 0.5), (1.5, 0.5), (0.5, 0.0), (0.5, 1.5)])
    def test_domain(self, t, u):
        with pytest.raises(DomainError):
            next_jump_time(t, u)


class TestCoordinatePath:

    def test_sign_flips_at_jumps(self):
        cp = CoordinatePath(eps=0.01, sign_at_eps=1, jump_times=(0.2, 0.5))
        assert cp.sign_at(0.1) == 1
        assert cp.sign_at(0.2) == -1
        assert cp.sign_at(0.3) == -1
        assert cp.sign_at(0.7) == 1


class TestSampleBatch:

    def test_argument_checks(self):
        rng = block_rng(1, 0)
        with pytest.raises(CapacityError):
            sample_batch(33, 1e-6, 4, rng)
        with pytest.raises(ParameterError):
            sample_batch(3, 0.5, 4, rng)

    def test_same_block_same_paths(self):
        a = sample_batch(5, 1e-4, 50, block_rng(3, 2))
        b = sample_batch(5, 1e-4, 50, block_rng(3, 2))
        np.testing.assert_array_equal(a.init_mask, b.init_mask)
        np.testing.assert_array_equal(a.ev_time, b.ev_time)

    def test_blocks_differ(self):
        a = sample_batch(5, 1e-4, 50, block_rng(3, 0))
        b = sample_batch(5, 1e-4, 50, block_rng(3, 1))
        assert not np.array_equal(a.ev_time, b.ev_time)

    def test_jumps_lie_in_window(self):
        batch = sample_batch(4, 1e-3, 200, block_rng(5, 0))
        assert np.all(batch.ev_time > 1e-3)
        assert np.all(batch.ev_time <= 1.0)

    def test_points_have_modulus_t(self):
        batch = sample_batch(6, 1e-5, 100, block_rng(8, 0))
        for t in (1e-5, 0.3, 1.0):
            np.testing.assert_allclose(np.abs(batch.points_at(t)), t)

    def test_masks_match_single_paths(self):
        batch = sample_batch(4, 1e-4, 20, block_rng(9, 0))
        for k in range(batch.size):
            path = batch.path(k)
            for t in (1e-4, 0.1, 0.55, 1.0):
                np.testing.assert_array_equal(batch.points_at(t)[k], point_at(path, t))
            np.testing.assert_array_equal(batch.end_signs()[k], endpoint(path))

    def test_masks_at_times(self):
        batch = sample_batch(3, 1e-4, 30, block_rng(4, 0))
        paths = np.repeat(np.arange(30), 3)
        times = np.tile([0.05, 0.4, 0.9], 30)
        got = batch.masks_at_times(paths, times)
        for k, t, m in zip(paths, times, got):
            assert m == batch.masks_at(t)[k]

    def test_truncation(self):
        batch = sample_batch(2, 1e-3, 5, block_rng(1, 0))
        with pytest.raises(TruncationError):
            batch.masks_at(1e-4)
        with pytest.raises(DomainError):
            batch.masks_at(1.5)

    def test_mean_jump_count(self):
        # Expected jumps per coordinate on (eps, 1] is log(1/eps)/2
        eps = 1e-4
        batch = sample_batch(4, eps, 4000, block_rng(12, 0))
        per = batch.jump_counts(eps, 1.0).astype(float)
        target = 0.5 * math.log(1.0 / eps)
        se = per.std(ddof=1) / math.sqrt(per.size)
        assert abs(per.mean() - target) <= 4.0 * se


class TestHesitant:

    def test_overlay_in_batch(self):
        batch = sample_batch(3, 1e-4, 40, block_rng(6, 0), hesitant=True)
        assert batch.extra is not None
        counts = batch.extra_counts(1e-4, 1.0)
        assert counts.shape == (40, 3)

    def test_mean_zero_count(self):
        # Zeros of the hesitant coordinate on [1/4, 1] have mean log 4
        batch = sample_batch(3, 1e-4, 4000, block_rng(21, 0), hesitant=True)
        zeros = (batch.jump_counts(0.25, 1.0) + batch.extra_counts(0.25, 1.0)).astype(float)
        se = zeros.std(ddof=1) / math.sqrt(zeros.size)
        assert abs(zeros.mean() - math.log(4.0)) <= 4.0 * se

    def test_overlay_missing(self):
        batch = sample_batch(3, 1e-4, 4, block_rng(6, 0))
        with pytest.raises(ParameterError):
            batch.extra_counts(0.1, 1.0)

    def test_zero_exactly_at_jumps(self):
        rng = block_rng(2, 0)
        path = sample_path(3, 1e-3, rng)
        overlay = hesitant_sample(path, rng)
        for i, cp in enumerate(path.coords):
            for t in cp.jump_times + overlay.extra_jump_times[i]:
                assert hesitant_point_at(path, overlay, t)[i] == 0.0

    def test_agrees_with_base_path_off_jumps(self):
        rng = block_rng(2, 1)
        path = sample_path(3, 1e-3, rng)
        overlay = hesitant_sample(path, rng)
        for t in (0.123456, 0.654321):
            np.testing.assert_array_equal(hesitant_point_at(path, overlay, t), point_at(path, t))

    def test_overlay_disjoint_from_base(self):
        rng = block_rng(11, 0)
        path = sample_path(4, 1e-4, rng)
        overlay = hesitant_sample(path, rng)
        for i, cp in enumerate(path.coords):
            assert not set(cp.jump_times) & set(overlay.extra_jump_times[i])


class TestBatchFromPaths:

    def test_roundtrip_of_events(self):
        batch = sample_batch(3, 1e-4, 10, block_rng(7, 0))
        rebuilt = batch_from_paths([batch.path(k) for k in range(batch.size)])
        np.testing.assert_array_equal(rebuilt.init_mask, batch.init_mask)
        np.testing.assert_array_equal(rebuilt.end_mask, batch.end_mask)
        np.testing.assert_allclose(np.sort(rebuilt.ev_time), np.sort(batch.ev_time))

    def test_mixed_paths_rejected(self):
        a = sample_path(2, 1e-4, block_rng(1, 0))
        b = sample_path(3, 1e-4, block_rng(1, 1))
        with pytest.raises(ParameterError):
            batch_from_paths([a, b])

    def test_empty(self):
        with pytest.raises(ParameterError):
            batch_from_paths([])

import numpy as np
import pytest

from engine import merge_sums, plan_blocks, run_blocks
from functionals import mc_variance_via_qv


class TestPlanBlocks:

    def test_partial_last_block(self):
        assert plan_blocks(2500, 1024) == [(0, 1024), (1, 1024), (2, 452)]

    def test_exact_multiple(self):
        assert plan_blocks(2048, 1024) == [(0, 1024), (1, 1024)]


class TestRunBlocks:

    def test_results_in_block_order(self):
        out = run_blocks(lambda size, rng, tag: (size, tag), 250, seed=3, workers=3, block_size=100)
        assert out == [(100, "philox:3:b0"), (100, "philox:3:b1"), (50, "philox:3:b2")]

    def test_stage_callback(self):
        stages = []
        run_blocks(lambda size, rng, tag: size, 10, seed=1, block_size=4, on_stage=stages.append, label="x")
        assert [s.name for s in stages] == ["mc_run"]
        assert stages[0].data == {"label": "x", "blocks": 3, "paths": 10}


class TestMergeSums:

    def test_scalars_and_arrays(self):
        merged = merge_sums([{"a": 1.0, "v": np.array([1.0, 2.0])}, {"a": 2.5, "v": np.array([0.5, 0.5])}])
        assert merged["a"] == pytest.approx(3.5)
        np.testing.assert_allclose(merged["v"], [1.5, 2.5])

    def test_does_not_alias_inputs(self):
        first = {"v": np.array([1.0])}
        merge_sums([first, {"v": np.array([1.0])}])
        np.testing.assert_array_equal(first["v"], [1.0])

    def test_empty(self):
        assert merge_sums([]) == {}


class TestWorkerInvariance:

    def test_estimate_is_identical_for_any_worker_count(self, maj3):
        one = mc_variance_via_qv(maj3, n_paths=2500, eps=1e-4, seed=17, workers=1)
        two = mc_variance_via_qv(maj3, n_paths=2500, eps=1e-4, seed=17, workers=2)
        assert one.mean == two.mean
        assert one.std_error == two.std_error
        assert one.n_samples == two.n_samples == 2500

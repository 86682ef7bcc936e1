import math

import numpy as np
import pytest
from scipy.stats import chi2

import families
from boolfn import make_function
from errors import ParameterError, SpecError
from models import CheckStatus, FunctionKind, GfEstimate, RunConfig
from verify import (
    _level2_fit,
    environment,
    fit_gamma,
    monotonization_sweep,
    rho,
    run_constant_sweeps,
    run_corpus,
    run_exact_checks,
    run_lemma_checks,
    sampler_rows,
    talagrand_sum,
)

EXACT_ROWS = {
    "wht_roundtrip", "parseval", "poincare", "edge_isoperimetry", "sensitivity_sqrt", "qv_closed_form",
    "noise_stability_identity", "time_variance_identity", "variance_derivative_identity",
    "monotone_influence", "gradient_at_origin", "biased_derivative_identity",
    "biased_derivative_printed_factor",
}


def _by_check(rows):
    return {r.check: r for r in rows}


def _flat_gf(f):
    """A g_f estimate of all ones, enough to exercise the moment rows."""
    return GfEstimate(
        n=f.n, values=np.ones(f.size), counts=np.full(f.size, 100), std_errors=np.zeros(f.size),
        low_confidence=np.zeros(f.size, dtype=bool), n_samples=100 * f.size,
    ), "f"


@pytest.fixture
def constant3():
    return make_function(np.ones(8), kind=FunctionKind.BOOLEAN, label="const:3")


class TestHelpers:

    def test_talagrand_sum(self):
        assert talagrand_sum(np.array([0.5, 0.5, 0.5])) == pytest.approx(1.5 / (1.0 + math.log(2.0)))
        assert talagrand_sum(np.array([0.0, 1.0])) == pytest.approx(1.0)

    def test_rho(self):
        assert rho(1.0) == pytest.approx(2.0)
        assert rho(0.5) == pytest.approx(0.5 * (math.log(2.0) + 2.0))

    def test_level2_fit_is_tight(self):
        H, G = np.array([2.0, 0.3]), np.array([0.5, 0.4])
        c = _level2_fit(H, G)
        slack = c * G * np.log(c / G) - H
        assert slack.min() == pytest.approx(0.0, abs=1e-9)
        assert np.all(slack >= -1e-9)

    def test_fit_gamma(self, maj3):
        gamma = fit_gamma(maj3)
        assert gamma is not None
        assert 1.0 <= gamma <= 20.0


class TestExactChecks:

    @pytest.mark.parametrize("spec", ["majority:3", "dictator:4", "parity:4", "tribes:2:2", "subcube:5:2",
                                      "threshold:5:4", "random:5:1", "random:6:2"])
    def test_no_failures(self, spec):
        rows = run_exact_checks(families.make(spec))
        assert {r.check for r in rows} == EXACT_ROWS
        failed = [r.check for r in rows if r.status == CheckStatus.FAIL]
        assert failed == []

    def test_majority_values(self, maj3):
        rows = _by_check(run_exact_checks(maj3))
        assert rows["poincare"].lhs == pytest.approx(1.0)
        assert rows["poincare"].rhs == pytest.approx(1.5)
        assert rows["qv_closed_form"].rhs == pytest.approx(1.0)
        assert rows["sensitivity_sqrt"].rhs == pytest.approx(0.75)
        assert rows["gradient_at_origin"].lhs == pytest.approx(0.75)
        assert rows["monotone_influence"].status == CheckStatus.PASS

    def test_non_monotone_is_reported(self):
        rows = _by_check(run_exact_checks(families.make("parity:3")))
        assert rows["monotone_influence"].status == CheckStatus.REPORT
        assert rows["monotone_influence"].meta["reason"] == "not_monotone"

    def test_subcube_is_tight_for_isoperimetry(self):
        row = _by_check(run_exact_checks(families.make("subcube:8:3")))["edge_isoperimetry"]
        assert row.ratio == pytest.approx(1.0)

    def test_rejects_non_boolean(self):
        with pytest.raises(ParameterError):
            run_exact_checks(make_function([0.0, 0.5, 1.0, 0.25]))


class TestConstantSweeps:

    def test_rows_are_report_only(self, maj3, small_run):
        rows = run_constant_sweeps(maj3, small_run, gf=_flat_gf(maj3))
        assert rows
        assert all(r.status == CheckStatus.REPORT for r in rows)

    def test_majority_sensitivity_ratio(self, maj3, small_run):
        row = _by_check(run_constant_sweeps(maj3, small_run, gf=_flat_gf(maj3)))["sensitivity_sqrt_log"]
        assert row.ratio == pytest.approx(0.807, abs=1e-3)

    def test_majority_talagrand(self, maj3, small_run):
        row = _by_check(run_constant_sweeps(maj3, small_run, gf=_flat_gf(maj3)))["talagrand_ratio"]
        assert row.meta["T"] == pytest.approx(1.5 / (1.0 + math.log(2.0)))
        assert row.meta["r_tal"] == pytest.approx((1.0 + math.log(2.0)) / 1.5)

    def test_moment_rows(self, maj3, small_run):
        rows = _by_check(run_constant_sweeps(maj3, small_run, gf=_flat_gf(maj3)))
        row = rows["sensitivity_moment_p0.5"]
        # With g_f = 1 the left side is E[sqrt(h)]
        assert row.lhs == pytest.approx(3.0 * math.sqrt(2.0) / 4.0)
        assert row.meta["orientation"] == "f"

    def test_noise_stability_constant_is_at_least_one(self, maj3, small_run):
        row = _by_check(run_constant_sweeps(maj3, small_run, gf=_flat_gf(maj3)))["noise_stability_decay"]
        assert row.rhs == pytest.approx(1.0)
        assert all(c >= 1.0 - 1e-12 for c in row.meta["c_min"].values())

    def test_level2_needs_monotone(self, small_run):
        f = families.make("parity:3")
        row = _by_check(run_constant_sweeps(f, small_run, gf=_flat_gf(f)))["level2_constant"]
        assert row.meta["reason"] == "precondition"

    def test_level2_unit_form(self, maj3, small_run):
        row = _by_check(run_constant_sweeps(maj3, small_run, gf=_flat_gf(maj3)))["level2_constant"]
        assert set(row.meta["unit_c_of_t"]) == set(row.meta["c_of_t"])
        assert row.meta["unit_constant"] == pytest.approx(max(row.meta["unit_c_of_t"].values()))
        # Quartering H and G lowers the fit, W being increasing
        assert 0.0 < row.meta["unit_constant"] < row.lhs

    def test_dictator_kkl_is_degenerate(self, small_run):
        f = families.make("dictator:3")
        row = _by_check(run_constant_sweeps(f, small_run, gf=_flat_gf(f)))["kkl_ratio"]
        assert row.lhs is None
        assert row.status == CheckStatus.REPORT

    def test_constant_function(self, constant3, small_run):
        rows = run_constant_sweeps(constant3, small_run)
        assert rows
        assert all(r.status == CheckStatus.REPORT and r.meta.get("reason") == "degenerate" for r in rows)


class TestLemmaChecks:

    @pytest.mark.parametrize("spec", ["majority:3", "majority:5", "tribes:2:2", "dictator:3", "threshold:4:2"])
    def test_no_failures_without_mc(self, spec):
        rows = run_lemma_checks(families.make(spec))
        checks = {r.check for r in rows}
        assert {"influence_log_convex", "gradient_log_convex", "differential_inequality",
                "log_convex_integral", "monotonization", "truncated_variation_order"} <= checks
        failed = [r.check for r in rows if r.status == CheckStatus.FAIL]
        assert failed == []

    def test_monotonization_of_random_functions(self):
        row = monotonization_sweep(count=20, seed=3, max_n=5)
        assert row.status == CheckStatus.PASS
        assert row.function == "random-sweep:20"


class TestSamplerRows:

    def test_rows(self, small_run):
        rows = sampler_rows(small_run)
        assert [r.check for r in rows] == [
            "jump_count", "jump_count_variance", "sign_flip_rate", "hesitant_zero_count",
            "hesitant_martingale@0.25", "hesitant_martingale@0.5", "hesitant_martingale@0.75",
            "endpoint_uniformity",
        ]
        assert {r.function for r in rows} == {"sampler:n4"}
        assert all(r.n_samples for r in rows)

    def test_endpoint_uniformity_is_chi_square(self, small_run):
        row = _by_check(sampler_rows(small_run))["endpoint_uniformity"]
        assert row.meta["dof"] == 15
        assert 0.0 <= row.meta["p_value"] <= 1.0
        assert row.rhs == pytest.approx(chi2.ppf(1.0 - row.meta["level"], 15))
        assert (row.status == CheckStatus.PASS) == (row.meta["p_value"] >= row.meta["level"])


class TestRunCorpus:

    def test_empty_corpus(self, small_run):
        with pytest.raises(SpecError):
            run_corpus([], small_run)

    def test_bad_spec(self, small_run):
        with pytest.raises(SpecError):
            run_corpus(["majority:4"], small_run)

    def test_stages_and_counts(self, small_run):
        stages = []
        report = run_corpus(["majority:3"], small_run, on_stage=stages.append)
        names = [s.name for s in stages]
        assert names[0] == "corpus_start"
        assert names[-1] == "corpus_done"
        assert names.count("load_function") == 1
        assert names.count("check") == len(report.results)
        assert stages[-1].data == report.counts()
        assert report.environment == environment(small_run)
        checks = {r.check for r in report.results}
        assert {"variance_via_qv", "boundary_vs_jumps", "gf_second_moment", "jump_count",
                "monotonization_sweep", "hesitation_boundary", "hesitation_boundary_minus"} <= checks

    def test_reproducible(self, small_run):
        a = run_corpus(["dictator:2"], small_run)
        b = run_corpus(["dictator:2"], small_run)
        assert [r.to_dict() for r in a.results] == [r.to_dict() for r in b.results]

    def test_worker_count_does_not_change_results(self, small_run):
        a = run_corpus(["dictator:2"], small_run)
        two = RunConfig(command="verify", n_paths=small_run.n_paths, eps=small_run.eps, seed=small_run.seed,
                        workers=2).validate()
        b = run_corpus(["dictator:2"], two)
        assert [r.to_dict() for r in a.results] == [r.to_dict() for r in b.results]

import math

import numpy as np
import pytest

import families
from errors import ConfigurationError, ParameterError
from functionals import (
    MARTINGALE_TIMES,
    PathTables,
    estimate_boundary_bound,
    estimate_gf,
    estimate_tau,
    estimate_theta_gain,
    expected_at_time,
    expected_truncated,
    jump_integral_closed,
    martingale_key,
    mc_jump_integral_check,
    mc_jump_law,
    mc_variance_via_qv,
    path_observables,
    path_trace,
    subeps_correction,
    tau_threshold,
)
from models import CoordinatePath, HesitantOverlay, SamplePath

EPS = 1e-3


@pytest.fixture
def fixed_path():
    """Coordinate 1 starts negative and jumps at 0.3 and 0.6; coordinate 2 jumps at 0.5."""
    return SamplePath(n=2, coords=(
        CoordinatePath(eps=EPS, sign_at_eps=-1, jump_times=(0.3, 0.6)),
        CoordinatePath(eps=EPS, sign_at_eps=1, jump_times=(0.5,)),
    ))


@pytest.fixture
def dictator2():
    return families.make("dictator:2")


class TestClosedForms:

    def test_jump_integral_of_one(self):
        assert jump_integral_closed(None, 0.25, 1.0) == pytest.approx(0.9375)

    def test_jump_integral_of_derivative(self, maj3):
        from boolfn import derivative_level_weights
        W = derivative_level_weights(maj3)[0]
        assert jump_integral_closed(W, 0.0, 1.0) == pytest.approx(1.0 / 3.0)

    def test_tau_threshold(self):
        assert tau_threshold(0.0, 0.5, 0.5) == math.inf
        assert tau_threshold(math.e, 1.0, 1.0) == pytest.approx(math.log(3.0) / 8.0)

    def test_subeps_correction(self, maj3):
        assert subeps_correction(maj3, 0.1) == pytest.approx(0.75 * 0.01 + 0.25 * 1e-6)

    def test_expected_at_time(self, maj3):
        t = np.array([0.0, 0.5, 1.0])
        np.testing.assert_allclose(expected_at_time(maj3, t, power=2), 0.75 * t ** 2 + 0.25 * t ** 6, atol=1e-14)
        assert expected_at_time(maj3, 0.7) == pytest.approx(0.0, abs=1e-15)

    def test_expected_truncated_at_full_threshold(self, maj3):
        out = expected_truncated(maj3, 1.0)
        np.testing.assert_allclose(out["V"], [1.0 / 3.0] * 3, atol=1e-9)
        np.testing.assert_allclose(out["Q"], [1.0 / 3.0] * 3, atol=1e-9)

    def test_truncated_variation_below_influence_part(self):
        f = families.make("tribes:2:2")
        for alpha in (0.2, 0.5, 0.9):
            out = expected_truncated(f, alpha)
            assert np.all(out["V"] <= out["Q"] + 1e-10)


class TestPathObservables:

    def test_quadratic_variation(self, dictator2, fixed_path):
        obs = path_observables(dictator2, fixed_path)
        assert obs.qv_total == pytest.approx(4.0 * (0.3 ** 2 + 0.6 ** 2))
        np.testing.assert_allclose(obs.qv_by_coord, [4.0 * (0.09 + 0.36), 0.0])
        assert obs.qv_window(0.25, 0.5) == pytest.approx(0.36)
        with pytest.raises(ParameterError):
            obs.qv_window(0.5, 0.25)

    def test_endpoint_values(self, dictator2, fixed_path):
        obs = path_observables(dictator2, fixed_path)
        assert obs.f_end == -1.0
        np.testing.assert_allclose(obs.grad_end, [1.0, 0.0])

    def test_theta_and_sup(self, dictator2, fixed_path):
        obs = path_observables(dictator2, fixed_path, grid_step=1 / 64)
        assert obs.theta == pytest.approx(0.3)
        assert not obs.theta_truncated
        assert obs.sup_process == pytest.approx(0.8, abs=1e-9)

    def test_theta_at_truncation(self, dictator2):
        path = SamplePath(n=2, coords=(
            CoordinatePath(eps=EPS, sign_at_eps=1, jump_times=()),
            CoordinatePath(eps=EPS, sign_at_eps=1, jump_times=()),
        ))
        obs = path_observables(dictator2, path)
        assert obs.theta == pytest.approx(EPS)
        assert obs.theta_truncated
        assert obs.sup_process == pytest.approx(1.0)

    def test_large_influence_jumps(self, dictator2, fixed_path):
        obs = path_observables(dictator2, fixed_path, alpha=1.0)
        assert obs.F_alpha_hit
        assert obs.V_alpha == 0.0
        assert obs.Q_alpha == 0.0

    def test_tau_hits_immediately(self, dictator2, fixed_path):
        # ||grad f|| = 1 and the running sup starts at 1/2, above the threshold
        obs = path_observables(dictator2, fixed_path, alpha=1.0, p=0.5)
        assert obs.tau_alpha == pytest.approx(EPS)

    def test_hesitation_time(self, dictator2, fixed_path):
        overlay = HesitantOverlay(extra_jump_times=((), (0.2,)))
        obs = path_observables(dictator2, fixed_path, overlay=overlay, alpha=0.5)
        assert obs.hesitation_time == pytest.approx(0.3)

    def test_majority_quadratic_variation(self, maj3):
        path = SamplePath(n=3, coords=(
            CoordinatePath(eps=EPS, sign_at_eps=1, jump_times=(0.4,)),
            CoordinatePath(eps=EPS, sign_at_eps=-1, jump_times=()),
            CoordinatePath(eps=EPS, sign_at_eps=1, jump_times=()),
        ))
        # At the jump, f moves between the extensions at (t,-t,t) and (-t,-t,t)
        t = 0.4
        before = 0.5 * (t - t + t) - 0.5 * (t * -t * t)
        after = 0.5 * (-t - t + t) - 0.5 * (-t * -t * t)
        obs = path_observables(maj3, path)
        assert obs.qv_total == pytest.approx((after - before) ** 2)

    def test_argument_checks(self, dictator2, fixed_path, maj3):
        with pytest.raises(ParameterError):
            path_observables(dictator2, fixed_path, alpha=0.0)
        with pytest.raises(ParameterError):
            path_observables(dictator2, fixed_path, p=0.25)
        with pytest.raises(ConfigurationError):
            path_observables(dictator2, fixed_path, require_eps=1e-6)
        with pytest.raises(ParameterError):
            path_observables(maj3, fixed_path)


class TestPathTrace:

    def test_events(self, dictator2, fixed_path):
        rows = path_trace(PathTables(dictator2), fixed_path, 0.25)
        assert rows[0] == (pytest.approx(EPS), pytest.approx(-EPS), "grid")
        assert rows[-1] == (1.0, -1.0, "grid")
        events = [r[2] for r in rows]
        assert set(events) == {"grid", "jump"}
        # Two rows per jump: left limit, then the new value
        assert events.count("jump") == 6
        times = [r[0] for r in rows]
        assert times == sorted(times)

    def test_values_on_both_sides_of_a_jump(self, dictator2, fixed_path):
        rows = path_trace(PathTables(dictator2), fixed_path, 0.25)
        at = [(v, e) for t, v, e in rows if t == 0.3]
        assert at == [(pytest.approx(-0.3), "jump"), (pytest.approx(0.3), "jump")]


class TestMonteCarlo:

    def test_variance_via_qv(self, maj3):
        est = mc_variance_via_qv(maj3, n_paths=4000, eps=1e-4, seed=1)
        assert est.within(1.0, k=4.0)

    @pytest.mark.parametrize("g,t1,target", [
        ("one", 0.25, 0.9375),
        ("deriv_sq", 0.0, 1.0 / 3.0),
        ("influence_sq", 0.0, 1.0 / 3.0),
    ])
    def test_jump_integral(self, maj3, g, t1, target):
        out = mc_jump_integral_check(maj3, 1, t1, 1.0, g=g, n_paths=4000, eps=1e-4, seed=2)
        assert out["rhs"] == pytest.approx(target)
        assert out["lhs"].within(target, k=4.0)

    def test_jump_integral_window_below_eps(self, maj3):
        with pytest.raises(ConfigurationError):
            mc_jump_integral_check(maj3, 1, 0.0, 1e-7, n_paths=200, eps=1e-6)

    def test_jump_integral_unknown_test_function(self, maj3):
        with pytest.raises(ParameterError):
            mc_jump_integral_check(maj3, 1, 0.0, 1.0, g="cube", n_paths=200)

    def test_jump_law(self):
        law = mc_jump_law(3, n_paths=3000, eps=1e-4, seed=5)
        for key in ("jumps", "jumps_var", "flips", "zeros"):
            assert law[key].within(law["targets"][key], k=4.0)
        chisq = law["endpoint_chisq"]
        assert chisq["dof"] == 7
        assert chisq["p_value"] > 1e-3

    @pytest.mark.parametrize("s", MARTINGALE_TIMES)
    def test_hesitant_martingale(self, s):
        law = mc_jump_law(3, n_paths=3000, eps=1e-4, seed=8, times=(s,))
        key = martingale_key(s)
        assert law["targets"][key] == pytest.approx(s)
        assert law[key].within(s, k=4.0)

    def test_jump_law_time_out_of_range(self):
        with pytest.raises(ParameterError):
            mc_jump_law(3, n_paths=200, eps=1e-4, times=(1.0,))

    def test_boundary_bound_equality_for_dictator(self, dictator2):
        out = estimate_boundary_bound(dictator2, 1.0, n_paths=2000, eps=1e-4, seed=4)
        assert out["mu_plus"] == pytest.approx(0.5)
        assert out["mu_minus"] == pytest.approx(0.5)
        # Coordinate 1 jumps on (eps, 1] unless it sits still, which has chance sqrt(eps)
        assert out["p_F_alpha"].mean >= 0.98
        assert out["margin_plus"] == pytest.approx(0.0, abs=0.02)
        assert out["margin_minus"] >= 0.0
        assert out["cond_plus"].within(0.5, k=4.0)
        assert out["cond_minus"].within(0.5, k=4.0)

    def test_boundary_bound_majority(self, maj3):
        alpha = 0.5
        out = estimate_boundary_bound(maj3, alpha, n_paths=2000, eps=1e-4, seed=6)
        assert out["mu_plus"] == pytest.approx(0.375)
        assert out["bound"] == pytest.approx(0.5 * alpha * out["p_F_alpha"].mean)
        for side in ("plus", "minus"):
            assert out[f"margin_{side}"] >= -4.0 * out["p_F_alpha"].std_error
            cond = out[f"cond_{side}"]
            assert cond.mean >= alpha / 2.0 - 4.0 * cond.std_error

    def test_theta_gain(self, maj3):
        out = estimate_theta_gain(maj3, a=0.5, n_paths=1500, eps=1e-4, seed=9, grid_step=1 / 256)
        # f(B_1) = 1 forces theta < 1, which happens half the time
        assert out["p_theta"].mean >= 0.5 - 4.0 * out["p_theta"].std_error
        assert out["hits"] >= 2
        assert 0.0 <= out["q"] <= 1.0
        assert out["level"] == pytest.approx(out["q"] * 0.25 / 5.0)
        assert out["target"] == pytest.approx(out["q"] * 0.25 / 9.0)
        assert out["p_gain"].mean >= out["target"] - 4.0 * out["p_gain"].std_error

    def test_theta_gain_rejects_a(self, maj3):
        with pytest.raises(ParameterError):
            estimate_theta_gain(maj3, a=1.0, n_paths=200)

    def test_tau(self, maj3):
        alpha, p = 0.5, 0.5
        out = estimate_tau(maj3, alpha, p, n_paths=1500, eps=1e-4, seed=10, grid_step=1 / 256)
        assert out["threshold"] == pytest.approx(tau_threshold(0.75, alpha, p))
        assert 0.0 <= out["p_tau"].mean <= 1.0
        # h(B_1)^p * 1[f(B_1) = 1] <= Psi_1 <= h(B_1)^p, and E h^p = 3 sqrt(2) / 4
        upper = 0.75 * math.sqrt(2.0)
        psi = out["psi_end"]
        assert psi.mean <= upper + 1e-12
        assert psi.mean >= upper / 2.0 - 4.0 * psi.std_error

    def test_gf_buckets(self, maj3):
        gf = estimate_gf(maj3, n_paths=800, eps=1e-4, seed=3, grid_step=1 / 256)
        assert gf.values.shape == (8,)
        assert gf.counts.sum() == 800
        assert np.all((gf.values >= 0.0) & (gf.values <= 1.0))
        # The process ends at f(B_1), so the sup is 1 wherever f(y) = 1
        np.testing.assert_allclose(gf.values[maj3.values == 1.0], 1.0)

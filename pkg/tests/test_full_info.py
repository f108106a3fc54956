"""Tests for the full-information policies."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcb.full_info import EmpiricalState, LinearFullInfo, McEmpirical, Ogd
from cmcb.model import Feedback, FeedbackKind, WeightVector, objective_value
from cmcb.solver import project_to_simplex

from conftest import REF_SIGMA, REF_THETA, finite_diff_grad


def full_fb(theta):
    return Feedback(FeedbackKind.FULL, full_rewards=np.asarray(theta, float))


class TestEmpiricalState:
    def test_mean_requires_observation(self):
        state = EmpiricalState(3)
        with pytest.raises(ValueError):
            state.mean_hat

    def test_single_draw_zero_covariance(self):
        state = EmpiricalState(3)
        state.update(np.array([1.0, 2.0, 3.0]))
        assert state.t == 1
        np.testing.assert_allclose(state.mean_hat, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(state.cov_hat, np.zeros((3, 3)), atol=1e-15)

    def test_matches_batch_recomputation(self):
        rng = np.random.default_rng(7)
        draws = rng.normal(size=(200, 4))
        state = EmpiricalState(4)
        for x in draws:
            state.update(x)
        mean = draws.mean(axis=0)
        centered = draws - mean
        cov = centered.T @ centered / len(draws)
        np.testing.assert_allclose(state.mean_hat, mean, atol=1e-10)
        np.testing.assert_allclose(state.cov_hat, cov, atol=1e-10)

    def test_covariance_symmetric_psd(self):
        rng = np.random.default_rng(11)
        state = EmpiricalState(5)
        for x in rng.normal(size=(50, 5)):
            state.update(x)
        cov = state.cov_hat
        np.testing.assert_allclose(cov, cov.T, atol=1e-12)
        assert np.linalg.eigvalsh(cov).min() >= -1e-10


class TestMcEmpirical:
    def test_first_action_uniform(self):
        pol = McEmpirical(5, rho=0.1)
        w = pol.step(None)
        np.testing.assert_allclose(w.w, np.full(5, 0.2))

    def test_zero_noise_plays_best_mean_vertex(self):
        # with no noise the covariance estimate stays zero, so the
        # plug-in maximizer is the vertex of the largest observed mean
        pol = McEmpirical(5, rho=0.1)
        pol.step(None)
        for _ in range(5):
            w = pol.step(full_fb(REF_THETA))
        np.testing.assert_allclose(w.w, WeightVector.vertex(5, 1).w, atol=1e-6)

    def test_action_maximizes_plugin_objective(self):
        rng = np.random.default_rng(3)
        pol = McEmpirical(5, rho=0.5)
        fb = None
        for _ in range(40):
            w = pol.step(fb)
            fb = full_fb(REF_THETA + rng.normal(size=5))
        theta_hat = pol.state.mean_hat
        cov_hat = pol.state.cov_hat

        def plugin(v):
            return v @ theta_hat - 0.5 * v @ cov_hat @ v

        best_ref = max(
            [plugin(np.full(5, 0.2))] + [plugin(np.eye(5)[i]) for i in range(5)]
        )
        assert plugin(w.w) >= best_ref - 1e-9

    def test_rejects_semi_feedback(self):
        pol = McEmpirical(3, rho=1.0)
        pol.step(None)
        with pytest.raises(ValueError, match="full"):
            pol.step(Feedback(FeedbackKind.SEMI, observed=((0, 1.0),)))


class TestOgd:
    def test_negative_eta0_rejected(self):
        with pytest.raises(ValueError):
            Ogd(3, rho=1.0, eta0=-0.1)

    def test_zero_eta0_stays_uniform(self):
        rng = np.random.default_rng(0)
        pol = Ogd(4, rho=1.0, eta0=0.0)
        w = pol.step(None)
        for _ in range(10):
            w = pol.step(full_fb(rng.normal(size=4)))
        np.testing.assert_allclose(w.w, np.full(4, 0.25), atol=1e-12)

    def test_first_update_hand_computed(self):
        # one observation: covariance estimate is zero, so the ascent
        # direction is theta_1 itself and the rate is eta0 / sqrt(1)
        pol = Ogd(5, rho=2.0, eta0=0.1)
        pol.step(None)
        theta1 = np.array([0.5, 0.1, 0.2, 0.1, 0.1])
        w = pol.step(full_fb(theta1))
        expected = 0.2 + 0.1 * (theta1 - theta1.mean())
        np.testing.assert_allclose(w.w, expected, atol=1e-12)

    def test_second_update_uses_annealed_rate(self):
        eta0 = 0.05
        pol = Ogd(3, rho=0.5, eta0=eta0)
        pol.step(None)
        t1 = np.array([0.9, 0.3, 0.0])
        t2 = np.array([0.1, 0.8, 0.3])
        w1 = np.full(3, 1 / 3)
        w2 = pol.step(full_fb(t1))
        w3 = pol.step(full_fb(t2))

        e2 = project_to_simplex(w1 + eta0 * t1)  # cov_hat is zero at t=1
        mean = (t1 + t2) / 2
        cov = (np.outer(t1 - mean, t1 - mean) + np.outer(t2 - mean, t2 - mean)) / 2
        grad = t2 - 2 * 0.5 * cov @ e2.w
        e3 = project_to_simplex(e2.w + eta0 / np.sqrt(2) * grad)
        np.testing.assert_allclose(w2.w, e2.w, atol=1e-12)
        np.testing.assert_allclose(w3.w, e3.w, atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        rho = 0.7
        pol = Ogd(4, rho=rho, eta0=0.1)
        pol.step(None)
        for _ in range(20):
            pol.step(full_fb(rng.normal(size=4)))
        theta_t = rng.normal(size=4)
        w = pol._w.w.copy()
        cov = pol.state.cov_hat.copy()
        pol.step(full_fb(theta_t))
        cov_next = pol.state.cov_hat

        def f(v):
            return v @ theta_t - rho * v @ cov_next @ v

        analytic = theta_t - 2 * rho * cov_next @ w
        numeric = finite_diff_grad(f, w)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)
        assert not np.allclose(cov, cov_next)

    def test_iterates_stay_on_simplex(self):
        rng = np.random.default_rng(9)
        pol = Ogd(5, rho=0.1, eta0=0.5)
        fb = None
        for _ in range(50):
            w = pol.step(fb)
            assert np.all(w.w >= 0) and abs(w.w.sum() - 1) < 1e-9
            fb = full_fb(rng.normal(size=5) * 3)

    def test_rejects_bandit_feedback(self):
        pol = Ogd(3, rho=1.0)
        pol.step(None)
        with pytest.raises(ValueError, match="full"):
            pol.step(Feedback(FeedbackKind.BANDIT, scalar=0.3))


class TestLinearFullInfo:
    def test_first_action_uniform(self):
        pol = LinearFullInfo(4)
        np.testing.assert_allclose(pol.step(None).w, np.full(4, 0.25))

    def test_tracks_best_cumulative_mean(self):
        pol = LinearFullInfo(3)
        pol.step(None)
        pol.step(full_fb([0.0, 1.0, 0.0]))
        w = pol.step(full_fb([1.0, 0.0, 0.0]))
        # sums are (1, 1, 0): tie broken toward the lowest index
        np.testing.assert_allclose(w.w, [1.0, 0.0, 0.0])
        w = pol.step(full_fb([0.0, 1.0, 0.0]))
        np.testing.assert_allclose(w.w, [0.0, 1.0, 0.0])

    def test_ignores_risk(self):
        # high-variance arm with the best mean still gets all the weight
        rng = np.random.default_rng(2)
        pol = LinearFullInfo(2)
        fb = None
        for _ in range(200):
            w = pol.step(fb)
            draw = np.array([0.5 + 10 * rng.normal(), 0.4])
            fb = full_fb(draw)
        assert w.w[0] in (0.0, 1.0)  # always a vertex

    def test_rejects_semi_feedback(self):
        pol = LinearFullInfo(3)
        pol.step(None)
        with pytest.raises(ValueError, match="full"):
            pol.step(Feedback(FeedbackKind.SEMI, observed=((1, 0.2),)))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=10**6))
def test_policies_return_valid_weights(d, seed):
    rng = np.random.default_rng(seed)
    for pol in (McEmpirical(d, rho=1.0), Ogd(d, rho=1.0), LinearFullInfo(d)):
        fb = None
        for _ in range(4):
            w = pol.step(fb)
            assert isinstance(w, WeightVector)
            assert w.d == d
            fb = full_fb(rng.normal(size=d))

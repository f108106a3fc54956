"""Full-information policies: every reward coordinate is observed.

All policies share the same call protocol: step(None) opens the run and
returns the first action, every later step(feedback) folds in the
observation generated by the previous action and returns the next one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Feedback, FeedbackKind, WeightVector
from .solver import project_to_simplex, solve_mean_cov_qp


def _require_full(feedback: Feedback) -> np.ndarray:
    if feedback.kind is not FeedbackKind.FULL:
        raise ValueError(f"expected full feedback, got {feedback.kind}")
    return np.asarray(feedback.full_rewards, float)


@dataclass
class EmpiricalState:
    """Running mean and biased (divide by t) covariance of the draws.

    Keeps sum and sum-of-outer-products accumulators so one update costs
    O(d^2) regardless of t.
    """

    d: int
    t: int = 0
    sum_rewards: np.ndarray = None
    sum_outer: np.ndarray = None

    def __post_init__(self):
        if self.sum_rewards is None:
            self.sum_rewards = np.zeros(self.d)
        if self.sum_outer is None:
            self.sum_outer = np.zeros((self.d, self.d))

    def update(self, theta_t: np.ndarray) -> None:
        self.t += 1
        self.sum_rewards += theta_t
        self.sum_outer += np.outer(theta_t, theta_t)

    @property
    def mean_hat(self) -> np.ndarray:
        if self.t == 0:
            raise ValueError("no observations yet")
        return self.sum_rewards / self.t

    @property
    def cov_hat(self) -> np.ndarray:
        m = self.mean_hat
        return self.sum_outer / self.t - np.outer(m, m)


class McEmpirical:
    """Plays the exact maximizer of the plug-in objective each step."""

    def __init__(self, d: int, rho: float):
        self.d = d
        self.rho = rho
        self.state = EmpiricalState(d)
        self._hint = None  # last optimal support, reused while it stays valid

    def step(self, feedback: Feedback | None) -> WeightVector:
        if feedback is not None:
            self.state.update(_require_full(feedback))
        if self.state.t == 0:
            return WeightVector.uniform(self.d)
        w, _ = solve_mean_cov_qp(self.state.mean_hat, self.state.cov_hat,
                                 self.rho, hint_support=self._hint)
        self._hint = tuple(np.flatnonzero(w.w > 0))
        return w


class Ogd:
    """Projected online gradient ascent on the plug-in objective.

    The gradient at step t uses the fresh draw theta_t and the running
    empirical covariance, with learning rate eta0 / sqrt(t).
    """

    def __init__(self, d: int, rho: float, eta0: float = 0.1):
        if eta0 < 0:
            raise ValueError("eta0 must be nonnegative")
        self.d = d
        self.rho = rho
        self.eta0 = eta0
        self.state = EmpiricalState(d)
        self._w = None

    def step(self, feedback: Feedback | None) -> WeightVector:
        if feedback is None:
            self._w = WeightVector.uniform(self.d)
            return self._w
        theta_t = _require_full(feedback)
        self.state.update(theta_t)
        t = self.state.t
        grad = theta_t - 2.0 * self.rho * self.state.cov_hat @ self._w.w
        self._w = project_to_simplex(self._w.w + self.eta0 / np.sqrt(t) * grad)
        return self._w


class LinearFullInfo:
    """Ignores risk entirely: plays the vertex of the best empirical mean."""

    def __init__(self, d: int):
        self.d = d
        self.t = 0
        self.sum_rewards = np.zeros(d)

    def step(self, feedback: Feedback | None) -> WeightVector:
        if feedback is None:
            return WeightVector.uniform(self.d)
        self.sum_rewards += _require_full(feedback)
        self.t += 1
        best = int(np.argmax(self.sum_rewards))  # argmax takes the lowest index on ties
        return WeightVector.vertex(self.d, best)

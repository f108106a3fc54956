"""Full-bandit policies: only the mixed scalar reward is observed.

Exploration repeatedly sweeps a fixed design of d(d+1)/2 actions (the d
vertices, then every half-half pair). Per-action reward means recover the
mean vector through the design's pseudoinverse, per-action reward
variances recover the stacked covariance entries through the inverse of
the quadratic design matrix. A round of sweeps is launched whenever the
number of completed rounds falls to t^(2/3)/d, otherwise the policy
exploits its current estimate.
"""
from __future__ import annotations

import numpy as np

from .model import Feedback, FeedbackKind, WeightVector
from .solver import project_to_simplex, solve_mean_cov_qp

PINV_TOL = 1e-9


class DesignSet:
    """The exploration actions with their linear and quadratic maps.

    moment_matrix row k lists [v_1^2 .. v_d^2, 2 v_1 v_2, .., 2 v_{d-1} v_d]
    for action v = actions[k]; its inverse maps per-action variances back
    to covariance entries stacked diagonal-first then upper off-diagonal,
    both in lexicographic order.
    """

    def __init__(self, d: int):
        if not 2 <= d <= 30:
            raise ValueError("design set supports 2 <= d <= 30")
        self.d = d
        self.pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
        self.d_tilde = d + len(self.pairs)
        acts = np.zeros((self.d_tilde, d))
        acts[:d] = np.eye(d)
        for k, (i, j) in enumerate(self.pairs):
            acts[d + k, i] = acts[d + k, j] = 0.5
        self.actions = acts
        self.B = acts
        C = np.zeros((self.d_tilde, self.d_tilde))
        C[:, :d] = acts ** 2
        for k, (i, j) in enumerate(self.pairs):
            C[:, d + k] = 2.0 * acts[:, i] * acts[:, j]
        self.C = C
        self.B_pinv = np.linalg.solve(self.B.T @ self.B, self.B.T)
        self.C_pinv = np.linalg.inv(C)
        if np.abs(self.B_pinv @ self.B - np.eye(d)).max() > PINV_TOL:
            raise RuntimeError("linear design pseudoinverse failed the identity check")
        if np.abs(self.C_pinv @ C - np.eye(self.d_tilde)).max() > PINV_TOL:
            raise RuntimeError("quadratic design inverse failed the identity check")
        self.action_weights = [WeightVector(a) for a in acts]

    def pack_moments(self, sigma: np.ndarray) -> np.ndarray:
        out = np.empty(self.d_tilde)
        out[:self.d] = np.diag(sigma)
        for k, (i, j) in enumerate(self.pairs):
            out[self.d + k] = sigma[i, j]
        return out

    def unpack_moments(self, z: np.ndarray) -> np.ndarray:
        sigma = np.diag(z[:self.d].copy())
        for k, (i, j) in enumerate(self.pairs):
            sigma[i, j] = sigma[j, i] = z[self.d + k]
        return sigma


def build_design_set(d: int) -> DesignSet:
    return DesignSet(d)


def _exploit_now(n_rounds: int, t: int, d: int) -> bool:
    # exact integer form of n_rounds > t^(2/3) / d, immune to pow round-off
    return (n_rounds * d) ** 3 > t * t


class _EteBase:
    """Shared explore-then-exploit skeleton; subclasses supply exploitation."""

    def __init__(self, d: int, rho: float, design: DesignSet | None = None):
        self.d = d
        self.rho = rho
        self.design = design if design is not None else build_design_set(d)
        self.t = 0
        self.n_rounds = 0
        self.rounds: list = []
        self._buf: list = []
        self._sweep_pos: int | None = None
        self.theta_hat: np.ndarray | None = None
        self.sigma_hat: np.ndarray | None = None

    def round_samples(self) -> np.ndarray:
        return np.array(self.rounds) if self.rounds else np.empty((0, self.design.d_tilde))

    def _finalize_round(self) -> None:
        self.rounds.append(np.array(self._buf))
        self._buf = []
        self.n_rounds += 1
        samples = np.array(self.rounds)
        y_hat = samples.mean(axis=0)
        z_hat = ((samples - y_hat) ** 2).mean(axis=0)
        self.theta_hat = self.design.B_pinv @ y_hat
        self.sigma_hat = self.design.unpack_moments(self.design.C_pinv @ z_hat)
        self._estimates_changed()

    def _estimates_changed(self) -> None:
        pass

    def _exploit(self) -> WeightVector:
        raise NotImplementedError

    def step(self, feedback: Feedback | None) -> WeightVector:
        if feedback is not None:
            if feedback.kind is not FeedbackKind.BANDIT:
                raise ValueError(f"expected bandit feedback, got {feedback.kind}")
            if self._sweep_pos is not None:
                self._buf.append(float(feedback.scalar))
                if len(self._buf) == self.design.d_tilde:
                    self._sweep_pos = None
                    self._finalize_round()
            # exploitation observations are not used by the estimator
        self.t += 1
        if self._sweep_pos is not None:
            a = self.design.action_weights[self._sweep_pos]
            self._sweep_pos += 1
            return a
        if self.n_rounds and _exploit_now(self.n_rounds, self.t, self.d):
            return self._exploit()
        self._sweep_pos = 1
        return self.design.action_weights[0]


class McEte(_EteBase):
    """Exploits the exact plug-in maximizer, recomputed once per round."""

    def __init__(self, d: int, rho: float, design: DesignSet | None = None):
        super().__init__(d, rho, design)
        self._cached_w: WeightVector | None = None
        self._hint = None

    def _estimates_changed(self) -> None:
        self._cached_w = None

    def _exploit(self) -> WeightVector:
        if self._cached_w is None:
            w, _ = solve_mean_cov_qp(self.theta_hat, self.sigma_hat, self.rho,
                                     hint_support=self._hint)
            self._hint = tuple(np.flatnonzero(w.w > 0))
            self._cached_w = w
        return self._cached_w


class OgdEte(_EteBase):
    """Exploits with projected gradient steps on the plug-in objective."""

    def __init__(self, d: int, rho: float, eta0: float = 0.1,
                 design: DesignSet | None = None):
        if eta0 < 0:
            raise ValueError("eta0 must be nonnegative")
        super().__init__(d, rho, design)
        self.eta0 = eta0
        self._w = WeightVector.uniform(d)

    def _exploit(self) -> WeightVector:
        grad = self.theta_hat - 2.0 * self.rho * self.sigma_hat @ self._w.w
        step = self.eta0 / np.sqrt(self.t)
        self._w = project_to_simplex(self._w.w + step * grad)
        return self._w


class LinearFullBandit(_EteBase):
    """Exploits the vertex with the best estimated mean."""

    def _exploit(self) -> WeightVector:
        best = int(np.argmax(self.theta_hat))  # ties go to the lowest index
        return WeightVector.vertex(self.d, best)

"""Semi-bandit policies: only the played arms' rewards are revealed.

The optimistic selection rule maximizes

    w . mean_hat + E(w) - rho * w' lower_band w

over the c-restricted simplex, where the covariance bands widen every
entry of the empirical covariance by a per-pair radius driven by how
often the pair was observed together, and E(w) is an elliptical bonus for
the mean estimate built from per-arm counts, the upper band, and the
running sum of masked upper bands.

All three policies here share the scripted initialization (the d single
pulls followed by the d(d-1) ordered half-half pairs) and the masked
second-moment bookkeeping; they differ only in the objective.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Feedback, FeedbackKind, WeightVector
from .solver import RestrictedSimplex, maximize_generic

RADIUS_CONSTANTS = {"main": (48.0, 36.0), "appendix": (61.0, 36.0)}
_Q_EPS = 1e-18


def covariance_radius(t: int, n_ij: int, n_ii: int, n_jj: int,
                      constants: str = "main") -> float:
    """Width g_ij(t) of the covariance confidence band for one pair.

    The first term switches between linear and square-root regimes in
    3 ln t / n_ij; the two cross terms carry constants (48, 36) by
    default, or (61, 36) from the alternative derivation.
    """
    if min(n_ij, n_ii, n_jj) <= 0:
        raise ValueError("all pair counts must be positive")
    c2, c3 = RADIUS_CONSTANTS[constants]
    lnt = np.log(t)
    x = 3.0 * lnt / n_ij
    return float(16.0 * max(x, np.sqrt(x))
                 + np.sqrt(c2 * lnt * lnt / (n_ij * n_ii))
                 + np.sqrt(c3 * lnt * lnt / (n_ij * n_jj)))


def beta_confidence(t: int, d: int, lam: float) -> float:
    """Confidence scale: ln(t ln^2 t) + d ln ln t + (d/2) ln(1 + e/lam)."""
    if t <= 1:
        raise ValueError("beta is defined for t >= 2")
    lnt = np.log(t)
    lnln = np.log(lnt)
    if lnln < 0.0:
        warnings.warn(f"ln ln t negative at t={t}, clamping to 0")
        lnln = 0.0
    return float(np.log(t * lnt * lnt) + d * lnln + 0.5 * d * np.log(1.0 + np.e / lam))


def _radius_matrix(t: int, counts: np.ndarray, constants: str) -> np.ndarray:
    c2, c3 = RADIUS_CONSTANTS[constants]
    lnt = np.log(t)
    diag = np.diag(counts).astype(float)
    x = 3.0 * lnt / counts
    return (16.0 * np.maximum(x, np.sqrt(x))
            + np.sqrt(c2 * lnt * lnt / (counts * diag[:, None]))
            + np.sqrt(c3 * lnt * lnt / (counts * diag[None, :])))


@dataclass
class SemiBanditState:
    """Masked-observation moment accumulators.

    For every ordered pair (i, j), pair_count is how many steps observed
    both arms, moment_sum accumulates theta_i * theta_j over those steps
    and reward_sum accumulates theta_i over those steps (so its transpose
    holds the matching theta_j sums). cum_masked_band carries the running
    sum of masked covariance upper bands used inside the mean bonus.
    """

    d: int
    lam: float = 1.0

    def __post_init__(self):
        self.t = 0
        self.pair_count = np.zeros((self.d, self.d), dtype=np.int64)
        self.moment_sum = np.zeros((self.d, self.d))
        self.reward_sum = np.zeros((self.d, self.d))
        self.cum_masked_band = np.zeros((self.d, self.d))

    def update(self, feedback: Feedback) -> None:
        if feedback.kind is not FeedbackKind.SEMI:
            raise ValueError(f"expected semi feedback, got {feedback.kind}")
        idx = np.array([i for i, _ in feedback.observed], dtype=int)
        vals = np.array([v for _, v in feedback.observed], dtype=float)
        ix = np.ix_(idx, idx)
        self.moment_sum[ix] += np.outer(vals, vals)
        self.reward_sum[ix] += vals[:, None]
        self.pair_count[ix] += 1
        self.t += 1

    @property
    def mean_hat(self) -> np.ndarray:
        diag = np.diag(self.pair_count)
        if diag.min() <= 0:
            raise ValueError("some arm never observed")
        return np.diag(self.reward_sum) / diag

    def cov_hat(self) -> np.ndarray:
        """Per-pair empirical covariance centered at the current means."""
        n = self.pair_count
        if n.min() <= 0:
            raise ValueError("some pair never observed together")
        th = self.mean_hat
        return (self.moment_sum - th[:, None] * self.reward_sum.T
                - self.reward_sum * th[None, :] + n * np.outer(th, th)) / n


@dataclass(frozen=True)
class ConfidenceBands:
    radius: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def make_bands(state: SemiBanditState, t: int, constants: str = "main") -> ConfidenceBands:
    g = _radius_matrix(t, state.pair_count, constants)
    cov = state.cov_hat()
    return ConfidenceBands(radius=g, lower=cov - g, upper=cov + g)


def _bonus_matrix(state: SemiBanditState, upper: np.ndarray) -> np.ndarray:
    """M with E(w)^2 = 2 beta w'Mw: diagonal regularizer plus masked sums."""
    dinv = 1.0 / np.diag(state.pair_count)
    return (np.diag(state.lam * np.diag(upper) * dinv)
            + state.cum_masked_band * np.outer(dinv, dinv))


def mean_confidence_width(state: SemiBanditState, bands: ConfidenceBands,
                          w: WeightVector, t: int) -> float:
    """E(w) for a single weight vector (the batched path lives in the policy)."""
    beta = beta_confidence(t, state.d, state.lam)
    m = _bonus_matrix(state, bands.upper)
    q = w.w @ m @ w.w
    return float(np.sqrt(2.0 * beta * max(q, 0.0)))


class McUcb:
    """Covariance-adaptive optimistic policy on the restricted simplex."""

    def __init__(self, d: int, rho: float, c: float, lam: float = 1.0,
                 radius_constants: str = "main", n_starts: int = 8,
                 max_iters: int = 30):
        if not (0.0 < c <= 0.5):
            raise ValueError("c must lie in (0, 1/2]")
        if radius_constants not in RADIUS_CONSTANTS:
            raise ValueError(f"unknown radius constants {radius_constants!r}")
        self.d = d
        self.rho = rho
        self.c = c
        self.state = SemiBanditState(d, lam)
        self.radius_constants = radius_constants
        self.n_starts = n_starts
        self.max_iters = max_iters
        self._domain = RestrictedSimplex(d, c)
        self._scripted = self._build_scripted(d)
        self._prev_w = None

    @staticmethod
    def _build_scripted(d: int) -> list:
        acts = [WeightVector.vertex(d, i) for i in range(d)]
        for i in range(d):
            for j in range(d):
                if i != j:
                    w = np.zeros(d)
                    w[i] = w[j] = 0.5
                    acts.append(WeightVector(w))
        return acts

    # the three objective variants override this hook
    def _objective(self, theta_hat, bands, beta):
        d = self.d
        m = _bonus_matrix(self.state, bands.upper)
        s2 = 2.0 * self.rho * bands.lower
        fused = np.hstack([m, s2, theta_hat[:, None]])
        cb = np.sqrt(2.0 * beta)

        def vg(W):
            X = W @ fused
            xm, xs, lin = X[:, :d], X[:, d:2 * d], X[:, 2 * d]
            q = np.einsum("ij,ij->i", W, xm)
            qr = np.einsum("ij,ij->i", W, xs)
            sq = np.sqrt(np.maximum(q, 0.0))
            vals = lin + cb * sq - 0.5 * qr
            inv = np.where(q > _Q_EPS, cb / np.maximum(sq, 1e-300), 0.0)
            grads = theta_hat[None, :] + xm * inv[:, None] - xs
            return vals, grads

        return vg

    def _accumulate_band(self, w: WeightVector, bands: ConfidenceBands) -> None:
        on = (w.w > 0).astype(float)
        self.state.cum_masked_band += bands.upper * np.outer(on, on)

    def step(self, feedback: Feedback | None) -> WeightVector:
        if feedback is not None:
            self.state.update(feedback)
        if self.state.t < len(self._scripted):
            return self._scripted[self.state.t]
        t = self.state.t + 1
        bands = make_bands(self.state, t, self.radius_constants)
        beta = beta_confidence(t, self.d, self.state.lam)
        vg = self._objective(self.state.mean_hat, bands, beta)
        extra = None if self._prev_w is None else self._prev_w.w[None, :]
        w, _ = maximize_generic(None, None, self._domain, n_starts=self.n_starts,
                                max_iters=self.max_iters, value_and_grad_fn=vg,
                                extra_starts=extra)
        self._accumulate_band(w, bands)
        self._prev_w = w
        return w


class McUcbGamma(McUcb):
    """Same selection rule but the bonus sees a flat covariance bound gamma.

    Every upper-band entry inside E(w) becomes the constant gamma, so the
    masked running sum collapses to gamma times the pair-count matrix.
    gamma=0 removes the bonus entirely.
    """

    def __init__(self, d: int, rho: float, c: float, gamma: float = 1.0, **kw):
        super().__init__(d, rho, c, **kw)
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        self.gamma = gamma

    def _objective(self, theta_hat, bands, beta):
        d = self.d
        dinv = 1.0 / np.diag(self.state.pair_count)
        m = (np.diag(self.state.lam * self.gamma * dinv)
             + self.gamma * self.state.pair_count * np.outer(dinv, dinv))
        s2 = 2.0 * self.rho * bands.lower
        fused = np.hstack([m, s2, theta_hat[:, None]])
        cb = np.sqrt(2.0 * beta)

        def vg(W):
            X = W @ fused
            xm, xs, lin = X[:, :d], X[:, d:2 * d], X[:, 2 * d]
            q = np.einsum("ij,ij->i", W, xm)
            qr = np.einsum("ij,ij->i", W, xs)
            sq = np.sqrt(np.maximum(q, 0.0))
            vals = lin + cb * sq - 0.5 * qr
            inv = np.where(q > _Q_EPS, cb / np.maximum(sq, 1e-300), 0.0)
            grads = theta_hat[None, :] + xm * inv[:, None] - xs
            return vals, grads

        return vg

    def _accumulate_band(self, w, bands):
        pass  # the flat-bound bonus reads pair counts, no running band sum


class OlsUcbC(McUcb):
    """Risk-blind variant: maximizes mean estimate plus bonus only."""

    def _objective(self, theta_hat, bands, beta):
        d = self.d
        m = _bonus_matrix(self.state, bands.upper)
        fused = np.hstack([m, theta_hat[:, None]])
        cb = np.sqrt(2.0 * beta)

        def vg(W):
            X = W @ fused
            xm, lin = X[:, :d], X[:, d]
            q = np.einsum("ij,ij->i", W, xm)
            sq = np.sqrt(np.maximum(q, 0.0))
            vals = lin + cb * sq
            inv = np.where(q > _Q_EPS, cb / np.maximum(sq, 1e-300), 0.0)
            grads = theta_hat[None, :] + xm * inv[:, None]
            return vals, grads

        return vg

"""Seeded Gaussian reward environment and per-run regret accounting.

Rewards are drawn i.i.d. as theta_t = theta* + L z_t with z_t standard
normal and L a factor of sigma*. The generator is Philox, a counter-based
bit stream, so a (instance, seed) pair reproduces the same reward
sequence on any platform. Regret is recorded against the exact optimum
of the true instance, computed once per run.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Feedback, FeedbackKind, Instance, WeightVector, suboptimality_gap
from .solver import solve_mean_cov_qp, solve_restricted_qp

JITTER_LADDER = (1e-12, 1e-9, 1e-6)
GAP_TOL = 1e-9


class CholeskyFailure(RuntimeError):
    """Covariance could not be factored even with the largest jitter."""


def _factor_covariance(sigma: np.ndarray) -> np.ndarray:
    if np.abs(sigma).max() == 0.0:
        return np.zeros_like(sigma)  # exactly noiseless, skip the jitter
    for eps in JITTER_LADDER:
        try:
            return np.linalg.cholesky(sigma + eps * np.eye(sigma.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise CholeskyFailure(f"cholesky failed with jitter up to {JITTER_LADDER[-1]}")


def true_optimum(instance: Instance) -> tuple:
    """(w*, f*) over the instance's decision set (restricted when c is set)."""
    if instance.min_weight_c is not None:
        return solve_restricted_qp(instance.theta_star, instance.sigma_star,
                                   instance.rho, instance.min_weight_c)
    return solve_mean_cov_qp(instance.theta_star, instance.sigma_star, instance.rho)


@dataclass
class EnvRun:
    """Mutable state of one simulated run."""

    instance: Instance
    seed: object
    rng: np.random.Generator
    chol: np.ndarray
    f_opt: float
    t: int = 0


def make_env_run(instance: Instance, seed, f_opt: float | None = None) -> EnvRun:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    chol = _factor_covariance(instance.sigma_star)
    if f_opt is None:
        f_opt = true_optimum(instance)[1]
    return EnvRun(instance=instance, seed=seed, rng=rng, chol=chol, f_opt=f_opt)


def sample_rewards(run: EnvRun) -> np.ndarray:
    """Draw theta_t and advance the clock by one step."""
    z = run.rng.standard_normal(run.instance.d)
    run.t += 1
    return run.instance.theta_star + run.chol @ z


def emit_feedback(run: EnvRun, w: WeightVector, theta_t: np.ndarray,
                  kind: FeedbackKind) -> Feedback:
    """Project the reward draw onto what the chosen setting reveals."""
    if kind is FeedbackKind.FULL:
        return Feedback(kind, full_rewards=theta_t)
    if kind is FeedbackKind.SEMI:
        idx = np.flatnonzero(w.w > 0)
        return Feedback(kind, observed=tuple((int(i), float(theta_t[i])) for i in idx))
    if kind is FeedbackKind.BANDIT:
        return Feedback(kind, scalar=float(w.w @ theta_t))
    raise ValueError(f"unknown feedback kind {kind}")


@dataclass
class RegretTrace:
    """Cumulative expected regret, one entry per timestep."""

    seed: object
    cumulative: list = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.cumulative, dtype=float)


def record_step(trace: RegretTrace, run: EnvRun, w: WeightVector) -> RegretTrace:
    """Append the step's regret. Negative gaps beyond round-off abort."""
    gap = suboptimality_gap(run.instance, run.f_opt, w)
    if gap < -GAP_TOL:
        raise RuntimeError(
            f"negative regret gap {gap} at t={run.t}: f_opt={run.f_opt} "
            f"is not an upper bound, w={w.w}"
        )
    prev = trace.cumulative[-1] if trace.cumulative else 0.0
    trace.cumulative.append(prev + max(gap, 0.0))
    return trace

"""Independent checking tools: brute-force grid search, regret slope
fits, theory-side constants, and the randomized hard instance family.

The grid maximizer deliberately shares no code with the KKT solver so
the two can vouch for each other in tests.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .environment import true_optimum
from .model import Instance
from .solver import FullSimplex, maximize_generic

GRID_LIMIT = 100_000_000


def grid_maximize(value_fn, d: int, step: float, c: float | None = None):
    """Exhaustive maximum of value_fn over the simplex lattice.

    The lattice holds every nonnegative integer combination k/n with
    n = 1/step; with c set, entries must be 0 or at least c. value_fn
    takes a single d-vector. Returns (w, value) with ties resolved to the
    first lattice point in generation order.
    """
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    if comb(n + d - 1, d - 1) > GRID_LIMIT:
        raise ValueError(f"grid for d={d}, step={step} exceeds {GRID_LIMIT} points")
    kmin = 0 if c is None else int(np.ceil(c * n - 1e-9))
    best_w, best_v = None, -np.inf
    # compositions of n into d parts via bar positions
    for bars in itertools.combinations(range(n + d - 1), d - 1):
        parts = np.diff((-1,) + bars + (n + d - 1,)) - 1
        if c is not None and np.any((parts > 0) & (parts < kmin)):
            continue
        w = parts / n
        v = float(value_fn(w))
        if v > best_v:
            best_v = v
            best_w = w
    return best_w, best_v


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    intercept: float
    r_squared: float
    t_lo: int
    t_hi: int


def fit_regret_slope(trace_mean: np.ndarray, t_lo: int, t_hi: int) -> SlopeEstimate:
    """Least-squares slope of log regret against log t on [t_lo, t_hi].

    trace_mean is a cumulative regret curve indexed from t=1. Nonpositive
    regret values cannot be log-transformed and are dropped with a
    warning.
    """
    trace_mean = np.asarray(trace_mean, float)
    if not (1 <= t_lo < t_hi <= len(trace_mean)):
        raise ValueError(f"window [{t_lo}, {t_hi}] out of range for length {len(trace_mean)}")
    t = np.arange(t_lo, t_hi + 1)
    r = trace_mean[t_lo - 1:t_hi]
    keep = r > 0
    if not keep.all():
        warnings.warn(f"dropping {(~keep).sum()} nonpositive regret values from slope fit")
    t, r = t[keep], r[keep]
    if t.size < 2:
        raise ValueError("fewer than two positive regret values in the window")
    x, y = np.log(t), np.log(r)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float((resid ** 2).sum()) / ss_tot
    return SlopeEstimate(float(slope), float(intercept), r2, t_lo, t_hi)


def regularizer_growth(lam: float) -> float:
    """L(lambda) = (lambda + 1) (ln(1 + 1/lambda) + 1)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return (lam + 1.0) * (np.log(1.0 + 1.0 / lam) + 1.0)


def positive_part_norm(sigma: np.ndarray) -> float:
    """Sum of the positive entries of sigma, diagonal included."""
    return float(np.maximum(sigma, 0.0).sum())


def bound_factors(instance: Instance, design=None, lam: float = 1.0) -> dict:
    """Problem-dependent factors that appear in the regret guarantees.

    With a design set, also computes the full-bandit scale
    Z = max_w sqrt(w' B+ diag(v_k' sigma v_k) B+' w) + rho * |C+|_inf.
    """
    w_star, f_opt = true_optimum(instance)
    sigma = instance.sigma_star
    theta = instance.theta_star
    out = {
        "f_opt": f_opt,
        "w_star": w_star.w,
        "sigma_max": float(np.diag(sigma).max()),
        "opt_risk": float(w_star.w @ sigma @ w_star.w),
        "theta_span": float(theta.max() - theta.min()),
        "sigma_positive_norm": positive_part_norm(sigma),
        "regularizer_growth": regularizer_growth(lam),
    }
    if design is not None:
        per_action_var = np.einsum("kd,de,ke->k", design.actions, sigma, design.actions)
        q = design.B_pinv @ np.diag(per_action_var) @ design.B_pinv.T
        q = 0.5 * (q + q.T)

        def vfn(W):
            return np.sqrt(np.maximum(np.einsum("ij,ij->i", W, W @ q), 0.0))

        def gfn(W):
            wq = W @ q
            s = np.sqrt(np.maximum(np.einsum("ij,ij->i", W, wq), 1e-300))
            return wq / s[:, None]

        _, peak = maximize_generic(vfn, gfn, FullSimplex(instance.d))
        c_pinv_norm = float(np.abs(design.C_pinv).sum(axis=1).max())
        out["design_mix_peak"] = peak
        out["c_pinv_norm"] = c_pinv_norm
        out["fb_scale"] = peak + instance.rho * c_pinv_norm
    return out


def hard_sb_epsilon(d: int, horizon: int, c: float, a0: float = 1.0) -> float:
    """Mean-gap schedule a0 sqrt(d / (T m)) with m = floor(1/c), capped at 1/2."""
    m = int(np.floor(1.0 / c + 1e-9))
    return float(min(0.5, a0 * np.sqrt(d / (horizon * m))))


def generate_hard_sb_instance(d: int, c: float, epsilon: float, seed) -> Instance:
    """Draw the worst-case style semi-bandit instance.

    Identity covariance; one uniformly drawn arm gets mean 1/2 + epsilon,
    the rest sit at 1/2. epsilon=0 degenerates to the exchangeable
    uniform instance. The risk weight follows the regime where the gap
    matters, rho = epsilon / (2 (1 - c)).
    """
    if d < 4:
        raise ValueError("need d >= 4")
    if not (2.0 / d <= c <= 0.5):
        raise ValueError("c must lie in [2/d, 1/2]")
    if not (0.0 <= epsilon <= 0.5):
        raise ValueError("epsilon must lie in [0, 1/2]")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    j = int(rng.integers(d))
    theta = np.full(d, 0.5)
    theta[j] += epsilon
    rho = epsilon / (2.0 * (1.0 - c)) if epsilon > 0 else 1e-3
    return Instance(theta, np.eye(d), rho, c)

"""Core problem types for continuous mean-covariance bandits.

An instance is a mean vector theta, a covariance matrix sigma, a risk
weight rho, and optionally a minimum-weight floor c that restricts the
decision set from the full probability simplex to vectors whose entries
are either zero or at least c.  The objective of a weight vector w is

    f(w) = w . theta - rho * w' sigma w

and all regret accounting is done against the true instance parameters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

EIG_FLOOR = -1e-9
SUM_TOL = 1e-9
ASYM_TOL = 1e-6


class DimensionMismatch(ValueError):
    """Raised when an array does not match the instance dimension."""

    def __init__(self, what: str, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class InstanceFormatError(ValueError):
    """Raised when an instance file or dict violates the schema."""


class FeedbackKind(Enum):
    FULL = "full"
    SEMI = "semi"
    BANDIT = "bandit"


@dataclass(frozen=True)
class Instance:
    """Problem instance. sigma is symmetrized on construction.

    min_weight_c is None for the unrestricted simplex, otherwise the
    floor c with 0 < c <= 1/2.
    """

    theta_star: np.ndarray
    sigma_star: np.ndarray
    rho: float
    min_weight_c: float | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=float)
        sigma = np.asarray(self.sigma_star, dtype=float)
        if theta.ndim != 1:
            raise InstanceFormatError("theta must be a vector")
        d = theta.shape[0]
        if d < 1:
            raise InstanceFormatError("need at least one arm")
        if sigma.shape != (d, d):
            raise DimensionMismatch("sigma shape", (d, d), sigma.shape)
        scale = max(np.abs(sigma).max(), 1e-300)
        if np.abs(sigma - sigma.T).max() / scale > ASYM_TOL:
            raise InstanceFormatError("sigma asymmetry exceeds relative 1e-6")
        sigma = 0.5 * (sigma + sigma.T)
        if np.linalg.eigvalsh(sigma).min() < EIG_FLOOR:
            raise InstanceFormatError("sigma is not PSD (eigenvalue below -1e-9)")
        if np.diag(sigma).max() > 1.0 + 1e-9:
            raise InstanceFormatError("sigma diagonal entries must be <= 1")
        if not self.rho > 0:
            raise InstanceFormatError("rho must be positive")
        c = self.min_weight_c
        if c is not None and not (0.0 < c <= 0.5):
            raise InstanceFormatError("min weight c must lie in (0, 1/2]")
        theta = theta.copy()
        theta.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "sigma_star", sigma)

    @property
    def d(self) -> int:
        return self.theta_star.shape[0]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "theta": self.theta_star.tolist(),
            "sigma": self.sigma_star.tolist(),
            "rho": float(self.rho),
            "c": None if self.min_weight_c is None else float(self.min_weight_c),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        try:
            d = int(data["d"])
            theta = np.asarray(data["theta"], dtype=float)
            sigma = np.asarray(data["sigma"], dtype=float)
            rho = float(data["rho"])
            c = data.get("c", None)
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceFormatError(f"bad instance payload: {exc}") from exc
        if theta.shape != (d,):
            raise InstanceFormatError("theta length does not match d")
        if sigma.shape != (d, d):
            raise InstanceFormatError("sigma shape does not match d")
        return cls(theta, sigma, rho, None if c is None else float(c))


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"not valid JSON: {exc}") from exc
    return Instance.from_dict(data)


def save_instance(instance: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(instance.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class WeightVector:
    """A point of the decision set. Entries are nonnegative and sum to 1.

    Construction clips round-off negatives in [-1e-12, 0) to zero and
    renormalizes; anything further from the simplex is rejected.
    """

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise ValueError("weight vector must be 1-d")
        if w.min() < -1e-12:
            raise ValueError(f"negative weight {w.min()} below -1e-12")
        w = np.maximum(w, 0.0)
        total = w.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {total}, not 1")
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)

    def check_restricted(self, c: float) -> None:
        """Entries must be 0 or at least c (up to 1e-9 slack)."""
        bad = (self.w > 0) & (self.w < c - 1e-9)
        if bad.any():
            raise ValueError(f"entries {np.flatnonzero(bad)} in (0, c={c})")

    @staticmethod
    def uniform(d: int) -> "WeightVector":
        return WeightVector(np.full(d, 1.0 / d))

    @staticmethod
    def vertex(d: int, i: int) -> "WeightVector":
        w = np.zeros(d)
        w[i] = 1.0
        return WeightVector(w)


@dataclass(frozen=True)
class Feedback:
    """Observation returned after playing one weight vector.

    full_rewards: every coordinate of the reward draw (full information).
    observed: (index, reward) pairs for exactly the positive-weight arms.
    scalar: the mixed reward w . theta_t (bandit feedback).
    """

    kind: FeedbackKind
    full_rewards: np.ndarray | None = None
    observed: tuple = ()
    scalar: float | None = None

    def __post_init__(self):
        if self.kind is FeedbackKind.FULL and self.full_rewards is None:
            raise ValueError("full feedback needs full_rewards")
        if self.kind is FeedbackKind.SEMI and len(self.observed) == 0:
            raise ValueError("semi feedback needs at least one observed arm")
        if self.kind is FeedbackKind.BANDIT and self.scalar is None:
            raise ValueError("bandit feedback needs the scalar reward")


def objective_value(instance: Instance, w: WeightVector) -> float:
    """f(w) = w . theta - rho * w' sigma w under the true parameters."""
    if w.d != instance.d:
        raise DimensionMismatch("weight dimension", instance.d, w.d)
    v = w.w
    return float(v @ instance.theta_star - instance.rho * v @ instance.sigma_star @ v)


def suboptimality_gap(instance: Instance, f_opt: float, w: WeightVector) -> float:
    """Per-step regret f_opt - f(w); nonnegative when f_opt is the true optimum."""
    return f_opt - objective_value(instance, w)

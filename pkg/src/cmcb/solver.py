"""Exact and approximate maximization over the simplex decision sets.

Two problem families are handled here:

* the mean-covariance quadratic program  max_w  w.theta - rho * w' sigma w
  over the full simplex (solved exactly through KKT support enumeration
  when sigma is positive definite) or over the c-restricted simplex
  (support enumeration plus exact active-set solves per support face);
* generic differentiable objectives, maximized with multi-start projected
  gradient ascent, which is what the optimistic bandit objectives use.

Support enumeration is exponential in d and refuses d > 20; callers with
bigger instances should use maximize_generic instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import WeightVector

CLIP_EIG = 1e-9
DUAL_TOL = 1e-9
POS_TOL = 1e-14
MAX_ENUM_D = 20
_BIG = 1e30


class SupportEnumerationError(ValueError):
    """Raised when exact enumeration would need more than 2^20 supports."""


@dataclass(frozen=True)
class FullSimplex:
    d: int


@dataclass(frozen=True)
class RestrictedSimplex:
    d: int
    c: float


@dataclass(frozen=True)
class KktSolution:
    """One support's candidate with its KKT certificate pieces.

    dual_u holds 2*rho*sigma@w - theta - v (zero on the support at an
    exact solution, the nonnegativity multiplier off it).
    """

    support: tuple
    w: np.ndarray
    value: float
    dual_v: float
    dual_u: np.ndarray

    def stationarity_residual(self) -> float:
        """Max abs stationarity violation with u taken off-support only."""
        u = self.dual_u.copy()
        u[list(self.support)] = 0.0
        resid = self.dual_u - u
        return float(np.abs(resid).max())

    def complementary_slackness(self) -> float:
        u = np.where(self.w > 0, 0.0, self.dual_u)
        return float(np.abs(self.w * u).max())


# ---------------------------------------------------------------------------
# projections


def _project_rows(V: np.ndarray, masks: np.ndarray, smass: np.ndarray) -> np.ndarray:
    """Project each row of V onto {u >= 0 on mask, 0 off mask, sum = s}.

    Sort-and-threshold projection, vectorized across rows. Rows with
    s == 0 collapse to zero.
    """
    n, d = V.shape
    ksize = masks.sum(axis=1)
    Vm = np.where(masks, V, -_BIG)
    srt = -np.sort(-Vm, axis=1)
    cs = np.cumsum(srt, axis=1)
    j = np.arange(1, d + 1)
    cond = (srt * j > cs - smass[:, None]) & (j <= ksize[:, None])
    nact = np.maximum(cond.sum(axis=1), 1)
    tau = (np.take_along_axis(cs, nact[:, None] - 1, axis=1)[:, 0] - smass) / nact
    U = np.maximum(V - tau[:, None], 0.0) * masks
    zero = smass <= 1e-15
    if zero.any():
        U[zero] = 0.0
    return U


def project_to_simplex(v) -> WeightVector:
    """Euclidean projection of an arbitrary real vector onto the simplex."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a nonempty vector")
    if not np.isfinite(v).all():
        raise ValueError("cannot project NaN or inf")
    row = _project_rows(v[None, :], np.ones((1, v.size), bool), np.ones(1))
    return WeightVector(row[0])


# ---------------------------------------------------------------------------
# support enumeration machinery


@lru_cache(maxsize=32)
def _support_masks(d: int, max_size: int) -> np.ndarray:
    """Boolean (m, d) mask matrix, size-ascending then lexicographic."""
    rows = []
    for k in range(1, max_size + 1):
        for comb in itertools.combinations(range(d), k):
            row = np.zeros(d, bool)
            row[list(comb)] = True
            rows.append(row)
    return np.array(rows)


def _check_enumerable(d: int) -> None:
    if d > MAX_ENUM_D:
        raise SupportEnumerationError(
            f"support enumeration needs 2^{d} solves for d={d}; "
            "limit is d <= 20, use maximize_generic for larger instances"
        )


def _kkt_batch(theta, sigma, rho, masks):
    """Closed-form stationary point on every masked support at once.

    Off-support rows and columns are replaced by identity so all the
    subsystems can go through one batched solve.
    """
    d = theta.shape[0]
    mf = masks.astype(float)
    mo = masks[:, :, None] & masks[:, None, :]
    mats = np.where(mo, sigma[None, :, :], np.eye(d)[None, :, :])
    rhs = np.stack([mf * theta, mf], axis=2)
    try:
        sol = np.linalg.solve(mats, rhs)
    except np.linalg.LinAlgError:
        # one of the masked systems hit an exact zero pivot; solve them
        # one by one and drop the singular supports (no unique stationary
        # point there, feasibility filtering discards the NaN rows)
        sol = np.full_like(rhs, np.nan)
        for k in range(mats.shape[0]):
            try:
                sol[k] = np.linalg.solve(mats[k], rhs[k])
            except np.linalg.LinAlgError:
                pass
    a = sol[..., 0]
    b = sol[..., 1]
    coef = (1.0 - a.sum(axis=1) / (2.0 * rho)) / b.sum(axis=1)
    W = a / (2.0 * rho) + coef[:, None] * b
    v = 2.0 * rho * coef
    U = 2.0 * rho * (W @ sigma) - theta - v[:, None]
    return W, v, U


def _feasible_rows(W, U, masks):
    w_on = np.where(masks, W, np.inf).min(axis=1)
    u_off = np.where(masks, np.inf, U).min(axis=1)
    return (w_on > POS_TOL) & (u_off >= -DUAL_TOL)


def _qp_values(theta, sigma, rho, W):
    return W @ theta - rho * np.einsum("ij,ij->i", W, W @ sigma)


def _unit_sum(w: np.ndarray) -> np.ndarray:
    # ill-conditioned (clipped) systems can leave the sum off by ~1e-7
    return w / w.sum()


def _is_pd(sym: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(sym)
        return True
    except np.linalg.LinAlgError:
        return False


def _clip_psd(sym: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(sym)
    lam = np.maximum(lam, CLIP_EIG)
    out = (vec * lam) @ vec.T
    return 0.5 * (out + out.T)


def kkt_candidates(theta, sigma, rho) -> list:
    """All supports whose KKT system is primal and dual feasible.

    For positive definite sigma exactly one support qualifies; the list
    keeps enumeration order (size ascending, lexicographic).
    """
    theta = np.asarray(theta, float)
    sigma = np.asarray(sigma, float)
    d = theta.shape[0]
    _check_enumerable(d)
    sym = 0.5 * (sigma + sigma.T)
    masks = _support_masks(d, d)
    W, v, U = _kkt_batch(theta, sym, rho, masks)
    feas = _feasible_rows(W, U, masks)
    vals = _qp_values(theta, sym, rho, W)
    out = []
    for i in np.flatnonzero(feas):
        sup = tuple(np.flatnonzero(masks[i]))
        out.append(KktSolution(sup, W[i].copy(), float(vals[i]), float(v[i]), U[i].copy()))
    return out


def _kkt_single(theta, sigma, rho, support):
    """One support's KKT solve; returns (w, value) if feasible else None."""
    d = theta.shape[0]
    idx = np.asarray(support, int)
    sub = sigma[np.ix_(idx, idx)]
    rhs = np.stack([theta[idx], np.ones(idx.size)], axis=1)
    try:
        sol = np.linalg.solve(sub, rhs)
    except np.linalg.LinAlgError:
        return None
    a, b = sol[:, 0], sol[:, 1]
    coef = (1.0 - a.sum() / (2.0 * rho)) / b.sum()
    w_s = a / (2.0 * rho) + coef * b
    if w_s.min() <= POS_TOL:
        return None
    w = np.zeros(d)
    w[idx] = w_s
    v = 2.0 * rho * coef
    u = 2.0 * rho * (sigma @ w) - theta - v
    off = np.ones(d, bool)
    off[idx] = False
    if off.any() and u[off].min() < -DUAL_TOL:
        return None
    return w, float(w @ theta - rho * w @ sigma @ w)


def solve_mean_cov_qp(theta, sigma, rho, hint_support=None):
    """Exact maximizer of w.theta - rho * w' sigma w over the simplex.

    Positive definite sigma goes through KKT support enumeration; exactly
    one support is primal and dual feasible, so a correct hint_support
    short-circuits the enumeration. Singular or indefinite sigma is
    eigenvalue-clipped to 1e-9 for the solve and every candidate is then
    scored on the unclipped objective, with a multi-start projected
    gradient pass as a safety net.

    Returns (WeightVector, value).
    """
    theta = np.asarray(theta, float)
    sigma = np.asarray(sigma, float)
    d = theta.shape[0]
    if sigma.shape != (d, d):
        raise ValueError(f"sigma shape {sigma.shape} does not match d={d}")
    _check_enumerable(d)
    if not rho > 0:
        raise ValueError("rho must be positive")
    sym = 0.5 * (sigma + sigma.T)
    pd = _is_pd(sym)
    if pd:
        if hint_support is not None and 0 < len(hint_support) <= d:
            hit = _kkt_single(theta, sym, rho, hint_support)
            if hit is not None:
                return WeightVector(_unit_sum(hit[0])), hit[1]
        masks = _support_masks(d, d)
        W, _, U = _kkt_batch(theta, sym, rho, masks)
        feas = _feasible_rows(W, U, masks)
        if feas.any():
            vals = np.where(feas, _qp_values(theta, sym, rho, W), -np.inf)
            i = int(np.argmax(vals))
            return WeightVector(_unit_sum(W[i])), float(vals[i])
        # fall through: numerically degenerate, treat like the clipped path
    clipped = sym if pd else _clip_psd(sym)
    masks = _support_masks(d, d)
    W, _, U = _kkt_batch(theta, clipped, rho, masks)
    feas = _feasible_rows(W, U, masks)
    cand_w = [_unit_sum(W[i]) for i in np.flatnonzero(feas)]

    def vfn(Wb):
        return _qp_values(theta, sym, rho, Wb)

    def gfn(Wb):
        return theta[None, :] - 2.0 * rho * (Wb @ sym)

    w_pg, _ = maximize_generic(vfn, gfn, FullSimplex(d))
    cand_w.append(w_pg.w)
    cand = np.array(cand_w)
    vals = _qp_values(theta, sym, rho, cand)
    i = int(np.argmax(vals))
    return WeightVector(cand[i]), float(vals[i])


# ---------------------------------------------------------------------------
# restricted simplex (entries zero or >= c)


def _restricted_max_size(c: float) -> int:
    return int(np.floor(1.0 / c + 1e-9))


def _pinned_candidates(theta, sigma, rho, c, masks):
    """Exact candidates for every (support, pinned-at-c subset) pair.

    Within a support face the problem is an equality-constrained QP once
    the set of entries stuck at the floor c is guessed; enumerating all
    guesses covers the exact optimum when sigma is PD.
    """
    d = theta.shape[0]
    out = []
    for row in masks:
        sup = np.flatnonzero(row)
        k = sup.size
        for a_bits in range(2 ** k - 1):  # pinned subset, at least one free
            pinned = np.array([(a_bits >> i) & 1 for i in range(k)], bool)
            free = sup[~pinned]
            pin = sup[pinned]
            s = 1.0 - c * pin.size
            if s < c * free.size - 1e-12:
                continue
            sub = sigma[np.ix_(free, free)]
            r = sigma[np.ix_(free, pin)] @ np.full(pin.size, c) if pin.size else 0.0
            try:
                sol = np.linalg.solve(sub, np.stack(
                    [theta[free] - 2.0 * rho * r, np.ones(free.size)], axis=1))
            except np.linalg.LinAlgError:
                continue
            a, b = sol[:, 0] / (2.0 * rho), sol[:, 1]
            vmul = (a.sum() - s) / b.sum()
            w_f = a - vmul * b
            if w_f.min() < c - 1e-10:
                continue
            w = np.zeros(d)
            w[pin] = c
            w[free] = w_f
            out.append(_unit_sum(w))
    return out


def solve_restricted_qp(theta, sigma, rho, c):
    """Maximize w.theta - rho * w' sigma w over entries {0} U [c, 1].

    Enumerates supports of size at most floor(1/c), then for PD sigma
    solves every face exactly via pinned-set enumeration. Non-PD sigma is
    clipped for the solves and candidates are rescored on the original
    objective together with a projected-gradient pass.
    """
    theta = np.asarray(theta, float)
    sigma = np.asarray(sigma, float)
    d = theta.shape[0]
    if not (0.0 < c <= 0.5):
        raise ValueError("c must lie in (0, 1/2]")
    _check_enumerable(d)
    sym = 0.5 * (sigma + sigma.T)
    kmax = min(d, _restricted_max_size(c))
    masks = _support_masks(d, kmax)
    n_systems = sum(2 ** int(m.sum()) for m in masks)
    pd = _is_pd(sym)
    cand_w = []
    if n_systems <= 200_000:
        cand_w.extend(_pinned_candidates(theta, sym if pd else _clip_psd(sym), rho, c, masks))
    if not pd or n_systems > 200_000:

        def vfn(Wb):
            return _qp_values(theta, sym, rho, Wb)

        def gfn(Wb):
            return theta[None, :] - 2.0 * rho * (Wb @ sym)

        w_pg, _ = maximize_generic(vfn, gfn, RestrictedSimplex(d, c))
        cand_w.append(w_pg.w)
    if not cand_w:
        raise RuntimeError("no feasible candidate found on the restricted simplex")
    cand = np.array(cand_w)
    vals = _qp_values(theta, sym, rho, cand)
    i = int(np.argmax(vals))
    w = WeightVector(cand[i])
    w.check_restricted(c)
    return w, float(vals[i])


# ---------------------------------------------------------------------------
# generic projected gradient ascent


@lru_cache(maxsize=32)
def _face_palette(d: int, c: float, n_starts: int):
    """Start rows, masks, floors and masses for every restricted face."""
    kmax = min(d, _restricted_max_size(c))
    rows, mrows, frows, srows = [], [], [], []
    for k in range(1, kmax + 1):
        for comb in itertools.combinations(range(d), k):
            idx = list(comb)
            mask = np.zeros(d, bool)
            mask[idx] = True
            floor = np.where(mask, c, 0.0)
            s = 1.0 - c * k
            pts = [floor + np.where(mask, s / k, 0.0)]
            for i in idx:
                p = floor.copy()
                p[i] += s
                pts.append(p)
            for p in pts[:max(1, n_starts)]:
                rows.append(p)
                mrows.append(mask)
                frows.append(floor)
                srows.append(s)
    return (np.array(rows), np.array(mrows), np.array(frows), np.array(srows))


def _full_palette(d: int, n_starts: int) -> np.ndarray:
    pts = [np.full(d, 1.0 / d)]
    pts.extend(np.eye(d))
    rng = np.random.default_rng(0)  # fixed stream, starts are part of the contract
    while len(pts) < n_starts:
        pts.append(rng.dirichlet(np.ones(d)))
    return np.array(pts[:max(1, n_starts)])


def maximize_generic(value_fn, gradient_fn, domain, n_starts: int = 8,
                     max_iters: int = 500, step0="auto",
                     value_and_grad_fn=None, extra_starts=None):
    """Multi-start projected gradient ascent over a simplex domain.

    value_fn and gradient_fn must be batched: they map an (n, d) array of
    row vectors to (n,) values and (n, d) gradients. The restricted
    domain is covered face by face (support sizes with k*c <= 1), each
    face seeded with its center and vertices. Steps shrink as step0/sqrt(k);
    the default step0="auto" calibrates the scale as one over a curvature
    estimate taken across the start batch, which a fixed 0.1 gets badly
    wrong on stiff or very flat objectives. The search stops once the best
    value has stalled below 1e-9 for a few iterations. The returned value
    is never below any start's value.

    value_and_grad_fn, when given, replaces the separate callbacks with a
    single fused evaluation (one pass per iterate). extra_starts rows are
    appended to the palette, e.g. to warm start from a previous maximizer.
    """
    if isinstance(domain, FullSimplex):
        d = domain.d
        W0 = _full_palette(d, n_starts)
        masks = np.ones((len(W0), d), bool)
        floors = np.zeros((len(W0), d))
        smass = np.ones(len(W0))
    elif isinstance(domain, RestrictedSimplex):
        d = domain.d
        if not (0.0 < domain.c <= 0.5):
            raise ValueError("c must lie in (0, 1/2]")
        W0, masks, floors, smass = _face_palette(d, float(domain.c), n_starts)
        W0 = W0.copy()
    else:
        raise TypeError(f"unknown domain {domain!r}")
    if extra_starts is not None:
        ex = np.atleast_2d(np.asarray(extra_starts, float))
        exmask = ex > 0
        c = domain.c if isinstance(domain, RestrictedSimplex) else 0.0
        W0 = np.vstack([W0, ex])
        masks = np.vstack([masks, exmask])
        floors = np.vstack([floors, np.where(exmask, c, 0.0)])
        smass = np.concatenate([smass, 1.0 - c * exmask.sum(axis=1)])

    if value_and_grad_fn is None:
        def value_and_grad_fn(Wb):
            return value_fn(Wb), gradient_fn(Wb)

    W = W0
    vals, G = value_and_grad_fn(W)
    gi = int(np.argmax(vals))
    best_w = W[gi].copy()
    best_v = float(vals[gi])
    if step0 == "auto":
        dw = np.linalg.norm(W[1:] - W[0], axis=1)
        dg = np.linalg.norm(G[1:] - G[0], axis=1)
        ok = dw > 1e-12
        lips = (dg[ok] / dw[ok]).max() if ok.any() else 0.0
        step0 = 1.0 / max(lips, 1e-6)
    stall = 0
    for k in range(1, max_iters + 1):
        step = step0 / np.sqrt(k)
        W = floors + _project_rows(W + step * G - floors, masks, smass)
        vals, G = value_and_grad_fn(W)
        top = float(vals.max())
        if top > best_v + 1e-9:
            gi = int(np.argmax(vals))
            best_w = W[gi].copy()
            best_v = top
            stall = 0
        else:
            if top > best_v:
                gi = int(np.argmax(vals))
                best_w = W[gi].copy()
                best_v = top
            stall += 1
            if stall >= 5:
                break
    return WeightVector(best_w), best_v

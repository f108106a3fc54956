"""End-to-end release gate.

Each test checks one release criterion at its stated tolerance and appends
a [PASS]/[FAIL] line to the report echoed after the run, then asserts the
criterion, so an honest failure shows up both as a red test and as a
[FAIL] line. Expected values are pinned; nothing is tuned to force green.

The 50-run sweeps are module-scoped fixtures shared between criteria.
Reusing the T=1e5 traces truncated at t=1e4 for the ordering checks is
exact because per-run seeds do not depend on the horizon (the trace-prefix
property, covered by a unit test).
"""
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, REF_SIGMA, REF_THETA, random_pd_instance
from cmcb.environment import emit_feedback, make_env_run, sample_rewards
from cmcb.full_bandit import build_design_set, McEte
from cmcb.full_info import EmpiricalState
from cmcb.harness import collect_traces, ExperimentConfig, run_experiment
from cmcb.model import FeedbackKind, Instance, save_instance
from cmcb.oracles import fit_regret_slope, grid_maximize
from cmcb.semi_bandit import make_bands
from cmcb.solver import kkt_candidates, solve_mean_cov_qp, solve_restricted_qp

RUNS = 50
SEED = 0
RHO_CYCLE = (0.1, 1.0, 10.0)


def _verdict(name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def _instance_batch(n=100, seed=20240):
    rng = np.random.default_rng(seed)
    return [random_pd_instance(rng, d=3, rho=RHO_CYCLE[i % 3]) for i in range(n)]


# ---------------------------------------------------------------------------
# shared 50-run sweeps


@pytest.fixture(scope="module")
def rate_fi():
    """mc-empirical on the rho=0.1 instance, 50 runs to T=1e5."""
    inst = Instance(REF_THETA, REF_SIGMA, 0.1, None)
    t0 = time.perf_counter()
    traces, _ = collect_traces(inst, "mc-empirical", runs=RUNS, master_seed=SEED,
                               horizon=100_000, workers=8)
    return traces, time.perf_counter() - t0


@pytest.fixture(scope="module")
def rate_fb():
    """mc-ete on the rho=10 instance, 50 runs to T=1e5."""
    inst = Instance(REF_THETA, REF_SIGMA, 10.0, None)
    t0 = time.perf_counter()
    traces, _ = collect_traces(inst, "mc-ete", runs=RUNS, master_seed=SEED,
                               horizon=100_000, workers=8)
    return traces, time.perf_counter() - t0


@pytest.fixture(scope="module")
def panel_b():
    """The three semi-bandit policies, 50 runs to T=1e4, c=0.2.

    mc-ucb runs with estimator snapshots at t in {1e2, 1e3, 1e4} so the
    coverage criterion can reuse the same sweep.
    """
    inst = Instance(REF_THETA, REF_SIGMA, 0.1, 0.2)
    out = {}
    t0 = time.perf_counter()
    for algo in ("mc-ucb", "mc-ucb-gamma", "ols-ucb-c"):
        snaps = (100, 1_000, 10_000) if algo == "mc-ucb" else ()
        out[algo] = collect_traces(inst, algo, runs=RUNS, master_seed=SEED,
                                   horizon=10_000, snapshot_times=snaps)
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# exact solver


def test_solver_matches_grid_oracle():
    """Exact QP values agree with a 0.01-step grid search on 100 random
    d=3 instances, both unrestricted and with minimum weight c=0.2,
    within 1e-3, and the whole comparison stays under a minute."""
    t0 = time.perf_counter()
    gap_full = gap_res = 0.0
    for inst in _instance_batch():
        def f(w, inst=inst):
            return float(w @ inst.theta_star - inst.rho * w @ inst.sigma_star @ w)

        _, v_solver = solve_mean_cov_qp(inst.theta_star, inst.sigma_star, inst.rho)
        _, v_grid = grid_maximize(f, 3, 0.01)
        gap_full = max(gap_full, abs(v_solver - v_grid))
        _, v_solver_c = solve_restricted_qp(inst.theta_star, inst.sigma_star,
                                            inst.rho, 0.2)
        _, v_grid_c = grid_maximize(f, 3, 0.01, c=0.2)
        gap_res = max(gap_res, abs(v_solver_c - v_grid_c))
    elapsed = time.perf_counter() - t0
    ok = gap_full <= 1e-3 and gap_res <= 1e-3 and elapsed < 60.0
    assert _verdict(
        "solver vs grid oracle",
        ok,
        f"max |f_solver - f_grid| full {gap_full:.2e}, restricted {gap_res:.2e} "
        f"(tol 1e-3); 100 instances in {elapsed:.1f}s (< 60s)",
    )


def test_kkt_certificate_validity():
    """On every PD instance exactly one support passes the KKT filter, and
    its certificate meets stationarity 1e-8, dual floor -1e-9, and
    complementary slackness 1e-9."""
    n_feasible = set()
    stat = slack = 0.0
    dual_floor = np.inf
    for inst in _instance_batch(seed=20241):
        cands = kkt_candidates(inst.theta_star, inst.sigma_star, inst.rho)
        n_feasible.add(len(cands))
        for cand in cands:
            stat = max(stat, cand.stationarity_residual())
            slack = max(slack, cand.complementary_slackness())
            off = [i for i in range(3) if i not in cand.support]
            if off:
                dual_floor = min(dual_floor, cand.dual_u[off].min())
    ok = (n_feasible == {1} and stat <= 1e-8 and slack <= 1e-9
          and dual_floor >= -1e-9)
    assert _verdict(
        "kkt certificate",
        ok,
        f"feasible supports per instance {sorted(n_feasible)} (want [1]); "
        f"stationarity {stat:.1e} (tol 1e-8), dual floor {dual_floor:.1e} "
        f"(tol -1e-9), comp slack {slack:.1e} (tol 1e-9)",
    )


# ---------------------------------------------------------------------------
# full-bandit reconstruction


def test_ete_reconstruction_and_design_identities():
    """One zero-noise exploration round recovers the mean vector exactly and
    a zero covariance, and the design pseudoinverses satisfy their identities
    at 1e-9 for d in {2, 3, 5, 10}."""
    ident = 0.0
    theta_err = sigma_err = 0.0
    rng = np.random.default_rng(3)
    for d in (2, 3, 5, 10):
        ds = build_design_set(d)
        ident = max(ident,
                    np.abs(ds.B_pinv @ ds.B - np.eye(d)).max(),
                    np.abs(ds.C_pinv @ ds.C - np.eye(ds.d_tilde)).max())
        theta = rng.uniform(0.0, 1.0, d)
        inst = Instance(theta, np.zeros((d, d)), 1.0, None)
        run = make_env_run(inst, (9, d))
        pol = McEte(d, 1.0)
        fb = None
        for _ in range(ds.d_tilde + 1):
            w = pol.step(fb)
            fb = emit_feedback(run, w, sample_rewards(run), FeedbackKind.BANDIT)
        theta_err = max(theta_err, np.abs(pol.theta_hat - theta).max())
        sigma_err = max(sigma_err, np.abs(pol.sigma_hat).max())
    ok = theta_err <= 1e-9 and sigma_err <= 1e-9 and ident <= 1e-9
    assert _verdict(
        "ete reconstruction",
        ok,
        f"zero-noise theta err {theta_err:.1e}, sigma err {sigma_err:.1e} "
        f"(tol 1e-9); design identities d in (2,3,5,10) max resid {ident:.1e}",
    )


def test_estimator_consistency():
    """1e5 full-information draws pin the running estimates to the truth
    (mean within 0.02, covariance within 0.05 in max norm), and 1e4
    full-bandit exploration rounds meet the same covariance bound."""
    inst = Instance(REF_THETA, REF_SIGMA, 0.1, None)
    run = make_env_run(inst, (424242,))
    state = EmpiricalState(5)
    for _ in range(100_000):
        state.update(sample_rewards(run))
    fi_theta = np.abs(state.mean_hat - REF_THETA).max()
    fi_sigma = np.abs(state.cov_hat - REF_SIGMA).max()

    design = build_design_set(5)
    rng = np.random.default_rng(7)
    chol = np.linalg.cholesky(REF_SIGMA)
    draws = REF_THETA + rng.standard_normal((10_000, design.d_tilde, 5)) @ chol.T
    samples = np.einsum("rkd,kd->rk", draws, design.actions)
    pol = McEte(5, 10.0)
    pol.rounds = [samples[r] for r in range(9_999)]
    pol.n_rounds = 9_999
    pol._buf = list(samples[9_999])
    pol._finalize_round()
    ete_sigma = np.abs(pol.sigma_hat - REF_SIGMA).max()

    ok = fi_theta <= 0.02 and fi_sigma <= 0.05 and ete_sigma <= 0.05
    assert _verdict(
        "estimator consistency",
        ok,
        f"full-info theta err {fi_theta:.3f} (tol 0.02), sigma err "
        f"{fi_sigma:.3f} (tol 0.05); ete sigma err {ete_sigma:.3f} (tol 0.05)",
    )


# ---------------------------------------------------------------------------
# artifact determinism


def _artifact_bytes(root: Path) -> dict:
    out = {}
    for sub in ("traces", "summary"):
        for p in sorted((root / sub).rglob("*.csv")):
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


def test_artifact_determinism(tmp_path):
    """Rerunning a config with the same master seed reproduces every trace
    and summary CSV byte for byte, independent of the worker count."""
    fi_path = tmp_path / "fi.json"
    save_instance(Instance(REF_THETA, REF_SIGMA, 0.1, None), fi_path)
    fb_path = tmp_path / "fb.json"
    save_instance(Instance(REF_THETA, REF_SIGMA, 10.0, None), fb_path)
    configs = [
        ("fi", ExperimentConfig, dict(instance_path=str(fi_path), feedback="full-info",
                                      algorithms=("mc-empirical", "ogd"),
                                      horizon=64, runs=2, master_seed=5)),
        ("fb", ExperimentConfig, dict(instance_path=str(fb_path), feedback="full-bandit",
                                      algorithms=("mc-ete",),
                                      horizon=100, runs=2, master_seed=5)),
    ]
    n_files = 0
    identical = True
    for tag, cls, kw in configs:
        first = cls(output_dir=str(tmp_path / f"{tag}_a"), **kw)
        again = cls(output_dir=str(tmp_path / f"{tag}_b"), **kw)
        a = _artifact_bytes(run_experiment(first, workers=1))
        b = _artifact_bytes(run_experiment(again, workers=2))
        identical = identical and a == b
        n_files += len(a)
    assert _verdict(
        "determinism",
        identical and n_files > 0,
        f"2 configs, {n_files} trace/summary CSVs byte-identical across "
        "reruns (workers 1 vs 2)",
    )


# ---------------------------------------------------------------------------
# regret rates and orderings


def test_regret_rate_windows(rate_fi, rate_fb):
    """Log-log regret slopes over [1e4, 1e5]: mc-empirical (rho=0.1) inside
    [0.35, 0.65] and mc-ete (rho=10) inside [0.55, 0.80], with the two
    50-run sweeps together under 15 minutes at 8 workers."""
    traces_fi, secs_fi = rate_fi
    traces_fb, secs_fb = rate_fb
    fit_fi = fit_regret_slope(traces_fi.mean(axis=0), 10_000, 100_000)
    fit_fb = fit_regret_slope(traces_fb.mean(axis=0), 10_000, 100_000)
    secs = secs_fi + secs_fb
    ok_fi = 0.35 <= fit_fi.slope <= 0.65
    ok_fb = 0.55 <= fit_fb.slope <= 0.80
    ok = ok_fi and ok_fb and secs < 900.0
    assert _verdict(
        "regret rate",
        ok,
        f"mc-empirical slope {fit_fi.slope:.3f} (want [0.35, 0.65], r2 "
        f"{fit_fi.r_squared:.3f}); mc-ete slope {fit_fb.slope:.3f} "
        f"(want [0.55, 0.80], r2 {fit_fb.r_squared:.3f}); {secs:.0f}s "
        "(< 900s, 8 workers)",
    )


def test_ordering_full_info(rate_fi):
    """Mean final regret at T=1e4 orders mc-empirical < ogd < linear-fi with
    linear-fi at least 5x mc-empirical."""
    inst = Instance(REF_THETA, REF_SIGMA, 0.1, None)
    mc = rate_fi[0][:, 9_999].mean()
    ogd = collect_traces(inst, "ogd", runs=RUNS, master_seed=SEED,
                         horizon=10_000)[0][:, -1].mean()
    lin = collect_traces(inst, "linear-fi", runs=RUNS, master_seed=SEED,
                         horizon=10_000)[0][:, -1].mean()
    ok = mc < ogd < lin and lin >= 5.0 * mc
    assert _verdict(
        "ordering (full info)",
        ok,
        f"mc-empirical {mc:.2f} < ogd {ogd:.2f} < linear-fi {lin:.2f} "
        f"{'holds' if mc < ogd < lin else 'violated'}; separation "
        f"{lin / mc:.1f}x (want >= 5x)",
    )


def test_ordering_full_bandit(rate_fb):
    """Mean final regret at T=1e4 orders mc-ete < ogd-ete < linear-fb."""
    inst = Instance(REF_THETA, REF_SIGMA, 10.0, None)
    mc = rate_fb[0][:, 9_999].mean()
    ogd = collect_traces(inst, "ogd-ete", runs=RUNS, master_seed=SEED,
                         horizon=10_000)[0][:, -1].mean()
    lin = collect_traces(inst, "linear-fb", runs=RUNS, master_seed=SEED,
                         horizon=10_000)[0][:, -1].mean()
    ok = mc < ogd < lin
    assert _verdict(
        "ordering (full bandit)",
        ok,
        f"mc-ete {mc:.1f} < ogd-ete {ogd:.1f} < linear-fb {lin:.1f} "
        f"{'holds' if ok else 'violated'}",
    )


def test_ordering_semi_bandit(panel_b):
    """Mean final regret at T=1e4 orders mc-ucb < mc-ucb-gamma < ols-ucb-c
    on the c=0.2 restricted instance."""
    runs, secs = panel_b
    mc = runs["mc-ucb"][0][:, -1].mean()
    gam = runs["mc-ucb-gamma"][0][:, -1].mean()
    ols = runs["ols-ucb-c"][0][:, -1].mean()
    ok = mc < gam < ols
    assert _verdict(
        "ordering (semi-bandit)",
        ok,
        f"mc-ucb {mc:.1f} < mc-ucb-gamma {gam:.1f} < ols-ucb-c {ols:.1f} "
        f"{'holds' if ok else 'violated'}; sweep {secs:.0f}s",
    )


def test_covariance_coverage(panel_b):
    """The adaptive confidence band contains every true covariance entry at
    t in {1e2, 1e3, 1e4} in at least 95% of the 150 (run, t) checks."""
    runs, _ = panel_b
    _, snapshots = runs["mc-ucb"]
    hits = total = 0
    for snaps in snapshots:
        for t, state in sorted(snaps.items()):
            bands = make_bands(state, t)
            inside = np.abs(REF_SIGMA - state.cov_hat()) <= bands.radius
            hits += bool(inside.all())
            total += 1
    ok = total == 3 * RUNS and hits >= 0.95 * total
    assert _verdict(
        "covariance coverage",
        ok,
        f"{hits}/{total} (run, t) checks fully inside the band (want >= 95%)",
    )

"""Experiment orchestration: seeded runs, parallel execution, CSV artifacts.

Every run is determined by (master_seed, algorithm name, run index), so
scheduling order and worker count never change the numbers. Outputs are
plain CSVs: per-run traces under traces/<algo>/, per-algorithm summaries
under summary/, plus a manifest.json recording the config hash and
library versions. The wall-clock field in the manifest is the only
nondeterministic byte in the artifact directory.
"""
from __future__ import annotations

import copy
import json
import sys
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path

import numpy as np

from . import __version__
from .environment import emit_feedback, make_env_run, record_step, RegretTrace, \
    sample_rewards, true_optimum
from .full_bandit import LinearFullBandit, McEte, OgdEte
from .full_info import LinearFullInfo, McEmpirical, Ogd
from .model import FeedbackKind, Instance, load_instance
from .semi_bandit import McUcb, McUcbGamma, OlsUcbC

FEEDBACK_NAMES = {
    "full-info": FeedbackKind.FULL,
    "semi-bandit": FeedbackKind.SEMI,
    "full-bandit": FeedbackKind.BANDIT,
}

DEFAULT_PARAMS = {"eta0": 0.1, "lam": 1.0, "gamma": 1.0, "radius_constants": "main"}


def _need_c(instance: Instance) -> float:
    if instance.min_weight_c is None:
        raise ValueError("semi-bandit policies need the minimum weight c; "
                         "set it on the instance or via the config's c field")
    return instance.min_weight_c


ALGORITHMS = {
    "mc-empirical": (FeedbackKind.FULL,
                     lambda inst, p: McEmpirical(inst.d, inst.rho)),
    "ogd": (FeedbackKind.FULL,
            lambda inst, p: Ogd(inst.d, inst.rho, eta0=p["eta0"])),
    "linear-fi": (FeedbackKind.FULL,
                  lambda inst, p: LinearFullInfo(inst.d)),
    "mc-ucb": (FeedbackKind.SEMI,
               lambda inst, p: McUcb(inst.d, inst.rho, _need_c(inst), lam=p["lam"],
                                     radius_constants=p["radius_constants"])),
    "mc-ucb-gamma": (FeedbackKind.SEMI,
                     lambda inst, p: McUcbGamma(inst.d, inst.rho, _need_c(inst),
                                                gamma=p["gamma"], lam=p["lam"],
                                                radius_constants=p["radius_constants"])),
    "ols-ucb-c": (FeedbackKind.SEMI,
                  lambda inst, p: OlsUcbC(inst.d, inst.rho, _need_c(inst), lam=p["lam"],
                                          radius_constants=p["radius_constants"])),
    "mc-ete": (FeedbackKind.BANDIT,
               lambda inst, p: McEte(inst.d, inst.rho)),
    "ogd-ete": (FeedbackKind.BANDIT,
                lambda inst, p: OgdEte(inst.d, inst.rho, eta0=p["eta0"])),
    "linear-fb": (FeedbackKind.BANDIT,
                  lambda inst, p: LinearFullBandit(inst.d, inst.rho)),
}


@dataclass
class ExperimentConfig:
    instance_path: str
    feedback: str
    algorithms: tuple
    horizon: int
    output_dir: str
    runs: int = 50
    master_seed: int = 0
    eta0: float = 0.1
    lam: float = 1.0
    gamma: float = 1.0
    radius_constants: str = "main"
    c: float | None = None

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        if self.feedback not in FEEDBACK_NAMES:
            raise ValueError(f"unknown feedback {self.feedback!r}; "
                             f"expected one of {sorted(FEEDBACK_NAMES)}")
        if not self.algorithms:
            raise ValueError("need at least one algorithm")
        kind = FEEDBACK_NAMES[self.feedback]
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}; "
                                 f"expected one of {sorted(ALGORITHMS)}")
            if ALGORITHMS[name][0] is not kind:
                raise ValueError(f"algorithm {name!r} does not run under "
                                 f"{self.feedback} feedback")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.radius_constants not in ("main", "appendix"):
            raise ValueError("radius_constants must be 'main' or 'appendix'")

    def params(self) -> dict:
        return {"eta0": self.eta0, "lam": self.lam, "gamma": self.gamma,
                "radius_constants": self.radius_constants}

    def to_dict(self) -> dict:
        return {
            "instance_path": self.instance_path,
            "feedback": self.feedback,
            "algorithms": list(self.algorithms),
            "horizon": self.horizon,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "eta0": self.eta0,
            "lambda": self.lam,
            "gamma": self.gamma,
            "radius_constants": self.radius_constants,
            "c": self.c,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        data = dict(data)
        aliases = {"lambda": "lam", "radius-constants": "radius_constants"}
        data = {aliases.get(k, k): v for k, v in data.items()}
        known = {"instance_path", "feedback", "algorithms", "horizon", "output_dir",
                 "runs", "master_seed", "eta0", "lam", "gamma", "radius_constants", "c"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = {"instance_path", "feedback", "algorithms",
                   "horizon", "output_dir"} - set(data)
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        return ExperimentConfig(**data)

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig.from_dict(json.load(fh))


def derive_seed(master_seed: int, algo: str, run_idx: int) -> tuple:
    """Per-run entropy tuple fed to the environment's seed sequence."""
    return (int(master_seed), zlib.crc32(algo.encode()), int(run_idx))


def simulate_single(instance: Instance, algo: str, params: dict, seed, horizon: int,
                    f_opt: float | None = None, snapshot_times=()):
    """One full run; returns (cumulative regret array, state snapshots).

    When snapshot_times is nonempty, a deep copy of the policy's estimator
    state is stored keyed by t, taken right after the step-t action was
    chosen, i.e. with exactly t-1 observations folded in.
    """
    kind, factory = ALGORITHMS[algo]
    policy = factory(instance, {**DEFAULT_PARAMS, **(params or {})})
    run = make_env_run(instance, seed, f_opt)
    trace = RegretTrace(seed=seed)
    snap_at = frozenset(int(t) for t in snapshot_times)
    snaps = {}
    fb = None
    for t in range(1, horizon + 1):
        w = policy.step(fb)
        if t in snap_at:
            snaps[t] = copy.deepcopy(getattr(policy, "state", None))
        record_step(trace, run, w)
        theta_t = sample_rewards(run)
        fb = emit_feedback(run, w, theta_t, kind)
    return trace.as_array(), snaps


def _simulate_payload(payload):
    algo, run_idx, instance, params, horizon, master_seed, f_opt, snap = payload
    seed = derive_seed(master_seed, algo, run_idx)
    arr, snaps = simulate_single(instance, algo, params, seed, horizon, f_opt, snap)
    return algo, run_idx, arr, snaps


def _run_batch(payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [_simulate_payload(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_payload, payloads))


def collect_traces(instance: Instance, algo: str, params: dict | None = None,
                   runs: int = 50, master_seed: int = 0, horizon: int = 1000,
                   workers: int = 1, snapshot_times=(), f_opt: float | None = None):
    """In-memory variant of run_experiment for a single algorithm.

    Returns (traces, snapshots) with traces shaped (runs, horizon) and
    snapshots a list of per-run dicts keyed by snapshot time.
    """
    params = {**DEFAULT_PARAMS, **(params or {})}
    if f_opt is None:
        f_opt = true_optimum(instance)[1]
    payloads = [(algo, r, instance, params, horizon, master_seed, f_opt, tuple(snapshot_times))
                for r in range(runs)]
    out = sorted(_run_batch(payloads, workers), key=lambda r: r[1])
    traces = np.stack([arr for _, _, arr, _ in out])
    return traces, [snaps for _, _, _, snaps in out]


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class SummaryRow:
    t: int
    mean_regret: float
    ci_low: float
    ci_high: float


def checkpoint_grid(horizon: int) -> list:
    """Powers of two up to the horizon, plus the horizon itself."""
    ts = {1 << k for k in range(horizon.bit_length()) if 1 << k <= horizon}
    ts.add(horizon)
    return sorted(ts)


def summarize(traces, checkpoints=None) -> list:
    """Mean regret with a 95% normal CI across runs at each checkpoint."""
    arrs = [np.asarray(t, float) for t in traces]
    if not arrs:
        raise ValueError("need at least one trace")
    T = arrs[0].shape[-1]
    if any(a.ndim != 1 or a.shape[0] != T for a in arrs):
        raise ValueError("traces must be one-dimensional and equal length")
    mat = np.stack(arrs)
    n = mat.shape[0]
    if checkpoints is None:
        checkpoints = checkpoint_grid(T)
    rows = []
    if n == 1:
        warnings.warn("single run: confidence interval collapses to the mean")
    for t in checkpoints:
        if not (1 <= t <= T):
            raise ValueError(f"checkpoint {t} outside [1, {T}]")
        col = mat[:, t - 1]
        mean = float(col.mean())
        half = 0.0 if n == 1 else 1.96 * float(col.std(ddof=1)) / float(np.sqrt(n))
        rows.append(SummaryRow(int(t), mean, mean - half, mean + half))
    return rows


# ---------------------------------------------------------------------------
# artifact writing


def _write_trace_csv(path: Path, arr: np.ndarray, trace_every: int) -> None:
    if np.any(np.diff(arr) < 0):
        raise RuntimeError(f"nonmonotone trace about to be written to {path}")
    T = arr.shape[0]
    ts = range(trace_every, T + 1, trace_every) if trace_every > 1 else range(1, T + 1)
    lines = ["t,cum_regret"]
    lines.extend(f"{t},{float(arr[t - 1])!r}" for t in ts)
    if trace_every > 1 and T % trace_every:
        lines.append(f"{T},{float(arr[T - 1])!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_summary_csv(path: Path, rows) -> None:
    lines = ["t,mean,ci_low,ci_high"]
    lines.extend(f"{r.t},{float(r.mean_regret)!r},{float(r.ci_low)!r},{float(r.ci_high)!r}"
                 for r in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _config_sha256(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return sha256(blob.encode()).hexdigest()


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   trace_every: int = 1) -> Path:
    """Simulate every (algorithm, run) pair and write the artifact tree.

    Layout: traces/<algo>/run_<idx>.csv, summary/<algo>.csv, manifest.json.
    Returns the output directory path.
    """
    t_start = time.perf_counter()
    instance = load_instance(config.instance_path)
    if config.c is not None:
        instance = Instance(instance.theta_star, instance.sigma_star,
                            instance.rho, config.c)
    kind = FEEDBACK_NAMES[config.feedback]
    if kind is FeedbackKind.SEMI:
        _need_c(instance)
        if config.horizon < instance.d ** 2:
            raise ValueError(f"semi-bandit runs need horizon >= d^2 = {instance.d ** 2} "
                             "so the initialization sweep fits")
    f_opt = true_optimum(instance)[1]
    params = config.params()
    payloads = [(algo, r, instance, params, config.horizon, config.master_seed, f_opt, ())
                for algo in config.algorithms for r in range(config.runs)]
    results = _run_batch(payloads, workers)

    outdir = Path(config.output_dir)
    by_algo = {a: {} for a in config.algorithms}
    for algo, run_idx, arr, _ in results:
        by_algo[algo][run_idx] = arr
    (outdir / "summary").mkdir(parents=True, exist_ok=True)
    checkpoints = checkpoint_grid(config.horizon)
    for algo in config.algorithms:
        tdir = outdir / "traces" / algo
        tdir.mkdir(parents=True, exist_ok=True)
        stack = [by_algo[algo][r] for r in range(config.runs)]
        for r, arr in enumerate(stack):
            _write_trace_csv(tdir / f"run_{r:03d}.csv", arr, trace_every)
        _write_summary_csv(outdir / "summary" / f"{algo}.csv",
                           summarize(stack, checkpoints))
    manifest = {
        "config": config.to_dict(),
        "config_sha256": _config_sha256(config),
        "versions": {
            "cmcb": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "workers": workers,
        "trace_every": trace_every,
        "wall_clock_seconds": round(time.perf_counter() - t_start, 3),
    }
    with open(outdir / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return outdir

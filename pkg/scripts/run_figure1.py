#!/usr/bin/env python3
"""Reproduce the three-panel regret comparison on the d=5 synthetic instance.

Panel (a): full information, rho = 0.1   -> mc-empirical, ogd, linear-fi
Panel (b): semi-bandit, rho = 0.1, c=0.2 -> mc-ucb, mc-ucb-gamma, ols-ucb-c
Panel (c): full bandit, rho = 10         -> mc-ete, ogd-ete, linear-fb

Writes one artifact tree per panel under --out. When plotkit is installed,
also renders one SVG per panel from the summary CSVs.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from cmcb.harness import ExperimentConfig, run_experiment
from cmcb.model import Instance, save_instance

PANELS = {
    "a": ("full-info", 0.1, None, ("mc-empirical", "ogd", "linear-fi")),
    "b": ("semi-bandit", 0.1, 0.2, ("mc-ucb", "mc-ucb-gamma", "ols-ucb-c")),
    "c": ("full-bandit", 10.0, None, ("mc-ete", "ogd-ete", "linear-fb")),
}


def synthetic_instance(rho, c):
    theta = np.array([0.2, 0.3, 0.2, 0.2, 0.2])
    sigma = 1.05 * np.eye(5) - 0.05
    return Instance(theta, sigma, rho, c)


def render(panel, outdir, algorithms):
    try:
        from plotkit.plot import render_figure
    except ImportError:
        print(f"  plotkit not installed; skipping SVG for panel {panel}")
        return
    summaries = [(a, outdir / "summary" / f"{a}.csv") for a in algorithms]
    svg = outdir.parent / f"figure1{panel}.svg"
    render_figure(summaries, title=f"panel ({panel})", out=svg)
    print(f"  wrote {svg}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/figure1", help="output root")
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--trace-every", type=int, default=100)
    ap.add_argument("--panels", default="abc", help="subset of 'abc' to run")
    args = ap.parse_args(argv)

    root = Path(args.out)
    (root / "instances").mkdir(parents=True, exist_ok=True)
    for panel in args.panels:
        feedback, rho, c, algorithms = PANELS[panel]
        inst_path = root / "instances" / f"panel_{panel}.json"
        save_instance(synthetic_instance(rho, c), inst_path)
        config = ExperimentConfig(
            instance_path=str(inst_path),
            feedback=feedback,
            algorithms=algorithms,
            horizon=args.horizon,
            runs=args.runs,
            master_seed=args.master_seed,
            output_dir=str(root / f"panel_{panel}"),
            c=c,
        )
        print(f"panel ({panel}): {feedback}, rho={rho}, "
              f"{args.runs} runs to T={args.horizon}")
        t0 = time.perf_counter()
        outdir = run_experiment(config, workers=args.workers,
                                trace_every=args.trace_every)
        print(f"  done in {time.perf_counter() - t0:.0f}s -> {outdir}")
        render(panel, outdir, algorithms)


if __name__ == "__main__":
    main()

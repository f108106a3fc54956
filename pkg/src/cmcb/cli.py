"""Command line entry point.

Subcommands:
  run       simulate a JSON experiment config into an artifact directory
  verify    independent checks (design-set, solver, slope, bound-factors)
  instance  instance generators (gen-hard-sb)
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .harness import ExperimentConfig, run_experiment
from .model import load_instance, save_instance
from .oracles import bound_factors, generate_hard_sb_instance, grid_maximize
from .solver import solve_mean_cov_qp


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    outdir = run_experiment(config, workers=args.workers, trace_every=args.trace_every)
    print(f"wrote {outdir}")
    return 0


def _cmd_verify_design_set(args) -> int:
    from .full_bandit import build_design_set
    ds = build_design_set(args.d)
    rb = float(np.abs(ds.B_pinv @ ds.B - np.eye(args.d)).max())
    rc = float(np.abs(ds.C_pinv @ ds.C - np.eye(ds.d_tilde)).max())
    print(f"design-set d={args.d}: |B+B - I| = {rb:.3e}, |C+C - I| = {rc:.3e}  PASS")
    return 0


def _cmd_verify_solver(args) -> int:
    rng = np.random.default_rng(args.seed)
    rhos = (0.1, 1.0, 10.0)
    worst = 0.0
    for k in range(args.trials):
        theta = rng.uniform(0.0, 1.0, args.d)
        a = rng.normal(size=(args.d, args.d))
        sigma = a @ a.T / args.d
        sigma /= max(1.0, np.diag(sigma).max())
        rho = rhos[k % len(rhos)]
        _, v_exact = solve_mean_cov_qp(theta, sigma, rho)
        _, v_grid = grid_maximize(
            lambda w: w @ theta - rho * w @ sigma @ w, args.d, args.step)
        worst = max(worst, abs(v_exact - v_grid))
    ok = worst <= args.tol
    print(f"solver vs grid: {args.trials} trials d={args.d} step={args.step}: "
          f"max |gap| = {worst:.3e} (tol {args.tol})  {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_verify_slope(args) -> int:
    rows = []
    with open(args.summary) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["t", "mean"]:
            print(f"{args.summary}: not a summary CSV", file=sys.stderr)
            return 1
        for line in fh:
            parts = line.strip().split(",")
            rows.append((int(parts[0]), float(parts[1])))
    if not rows:
        print(f"{args.summary}: no data rows", file=sys.stderr)
        return 1
    t_hi = args.t_hi or rows[-1][0]
    t_lo = args.t_lo or max(1, t_hi // 10)
    pts = [(t, m) for t, m in rows if t_lo <= t <= t_hi and m > 0]
    if len(pts) < 2:
        print(f"fewer than two positive points in [{t_lo}, {t_hi}]", file=sys.stderr)
        return 1
    x = np.log([t for t, _ in pts])
    y = np.log([m for _, m in pts])
    slope = float(np.polyfit(x, y, 1)[0])
    ok = abs(slope - args.expect) <= args.tol
    print(f"slope on [{t_lo}, {t_hi}]: {slope:.4f} "
          f"(expect {args.expect} +- {args.tol})  {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_verify_bound_factors(args) -> int:
    instance = load_instance(args.instance)
    design = None
    if args.with_design:
        from .full_bandit import build_design_set
        design = build_design_set(instance.d)
    out = bound_factors(instance, design=design, lam=args.lam)
    for key, val in out.items():
        if isinstance(val, np.ndarray):
            val = np.array2string(val, precision=6)
        elif isinstance(val, float):
            val = f"{val:.6g}"
        print(f"{key}: {val}")
    return 0


def _cmd_gen_hard_sb(args) -> int:
    instance = generate_hard_sb_instance(args.d, args.c, args.eps, args.seed)
    if args.out:
        save_instance(instance, args.out)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(instance.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmcb",
                                     description="mean-covariance bandit simulations")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--trace-every", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="independent oracle checks")
    vsub = p_verify.add_subparsers(dest="subcommand", required=True)

    p_ds = vsub.add_parser("design-set", help="pseudoinverse identity residuals")
    p_ds.add_argument("--d", type=int, required=True)
    p_ds.set_defaults(func=_cmd_verify_design_set)

    p_sv = vsub.add_parser("solver", help="exact solver vs brute-force grid")
    p_sv.add_argument("--d", type=int, default=3)
    p_sv.add_argument("--trials", type=int, default=20)
    p_sv.add_argument("--step", type=float, default=0.01)
    p_sv.add_argument("--tol", type=float, default=1e-3)
    p_sv.add_argument("--seed", type=int, default=0)
    p_sv.set_defaults(func=_cmd_verify_solver)

    p_sl = vsub.add_parser("slope", help="log-log slope of a summary CSV")
    p_sl.add_argument("--summary", required=True)
    p_sl.add_argument("--expect", type=float, required=True)
    p_sl.add_argument("--tol", type=float, default=0.15)
    p_sl.add_argument("--t-lo", type=int, default=None)
    p_sl.add_argument("--t-hi", type=int, default=None)
    p_sl.set_defaults(func=_cmd_verify_slope)

    p_bf = vsub.add_parser("bound-factors", help="instance-dependent constants")
    p_bf.add_argument("--instance", required=True)
    p_bf.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_bf.add_argument("--with-design", action="store_true")
    p_bf.set_defaults(func=_cmd_verify_bound_factors)

    p_inst = sub.add_parser("instance", help="instance generators")
    isub = p_inst.add_subparsers(dest="subcommand", required=True)

    p_hard = isub.add_parser("gen-hard-sb", help="worst-case semi-bandit family")
    p_hard.add_argument("--d", type=int, required=True)
    p_hard.add_argument("--c", type=float, required=True)
    p_hard.add_argument("--eps", type=float, required=True)
    p_hard.add_argument("--seed", type=int, required=True)
    p_hard.add_argument("--out", default=None)
    p_hard.set_defaults(func=_cmd_gen_hard_sb)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

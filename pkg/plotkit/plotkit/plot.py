"""Render mean-regret comparison figures from experiment summary CSVs.

Inputs follow the harness summary schema: header t,mean,ci_low,ci_high
and one checkpoint per row. Each file becomes one labeled curve
with a translucent 95% CI band; curves are drawn (and listed in the
legend) in ascending order of their final mean, so the legend doubles as
a ranking. The y-axis is logarithmic unless asked otherwise, with
nonpositive values clamped to a 1e-6 floor and a warning, since a regret
of exactly zero is common at t=1.

Output bytes are deterministic for fixed inputs: fixed style, a fixed
SVG hash salt, and no embedded timestamps.
"""
from __future__ import annotations

import argparse
import colorsys
import csv
import sys
import warnings
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA = ("t", "mean", "ci_low", "ci_high")
LOG_FLOOR = 1e-6


class SummaryFormatError(ValueError):
    """A file does not match the t,mean,ci_low,ci_high schema."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure: labeled summary curves plus axis and output choices."""

    summaries: tuple  # (label, path) pairs
    title: str = ""
    log_y: bool = True
    output: str = "figure.svg"


def load_summary(path) -> dict:
    """Parse one summary CSV into a dict of float arrays keyed by column."""
    path = Path(path)
    if not path.exists():
        raise SummaryFormatError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SummaryFormatError(f"{path}: empty file")
        if tuple(header) != SCHEMA:
            raise SummaryFormatError(f"{path}: not a summary CSV "
                                     f"(header {header!r})")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(SCHEMA):
                raise SummaryFormatError(f"{path}:{lineno}: expected "
                                         f"{len(SCHEMA)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise SummaryFormatError(f"{path}:{lineno}: non-numeric "
                                         "field") from None
    if not rows:
        raise SummaryFormatError(f"{path}: no data rows")
    arr = np.array(rows)
    return {name: arr[:, k] for k, name in enumerate(SCHEMA)}


def stable_color(label: str) -> tuple:
    """Label-keyed RGB color, stable across runs and platforms."""
    digest = int(sha256(label.encode()).hexdigest()[:8], 16)
    return colorsys.hsv_to_rgb(digest / 0xFFFFFFFF, 0.65, 0.8)


def build_figure(spec: PlotSpec):
    """Assemble the figure for a spec; the caller owns saving/closing it."""
    curves = [(label, load_summary(path)) for label, path in spec.summaries]
    curves.sort(key=lambda lc: lc[1]["mean"][-1])
    fig, ax = plt.subplots(figsize=(5.0, 3.75))
    clamped = 0
    for label, data in curves:
        y, lo, hi = data["mean"], data["ci_low"], data["ci_high"]
        if spec.log_y:
            clamped += int((y <= 0).sum() + (lo <= 0).sum() + (hi <= 0).sum())
            y, lo, hi = (np.maximum(v, LOG_FLOOR) for v in (y, lo, hi))
        color = stable_color(label)
        ax.fill_between(data["t"], lo, hi, color=color, alpha=0.25,
                        linewidth=0)
        ax.plot(data["t"], y, color=color, label=label, linewidth=1.6)
    if clamped:
        warnings.warn(f"clamped {clamped} nonpositive values to {LOG_FLOOR} "
                      "for the log axis")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("mean cumulative regret")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="best", frameon=False)
    ax.grid(True, which="both", alpha=0.3, linewidth=0.5)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Build and save the figure; returns the output path."""
    out = Path(spec.output)
    suffix = out.suffix.lower()
    if suffix == ".svg":
        meta = {"Date": None}  # drop the creation timestamp
    elif suffix == ".png":
        meta = {"Software": None}
    else:
        meta = None
    with plt.rc_context({"svg.hashsalt": "plotkit"}):
        fig = build_figure(spec)
        fig.savefig(out, metadata=meta)
    plt.close(fig)
    return out


def render_figure(summaries, title: str = "", out="figure.svg",
                  log_y: bool = True) -> Path:
    """Render labeled (label, path) summaries straight to a file."""
    pairs = tuple((str(label), str(path)) for label, path in summaries)
    return render(PlotSpec(pairs, title, log_y, str(out)))


def _parse_summary(arg: str) -> tuple:
    label, sep, path = arg.partition("=")
    if not sep or not label or not path:
        raise argparse.ArgumentTypeError(f"expected LABEL=PATH, got {arg!r}")
    return label, path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plot.py",
        description="Render a regret-comparison figure from summary CSVs.")
    ap.add_argument("--summary", type=_parse_summary, action="append",
                    required=True, metavar="LABEL=PATH",
                    help="labeled summary CSV; repeat for several curves")
    ap.add_argument("--title", default="")
    ap.add_argument("--out", default="figure.svg", help="SVG or PNG path")
    ap.add_argument("--linear-y", action="store_true",
                    help="linear instead of logarithmic y-axis")
    args = ap.parse_args(argv)
    spec = PlotSpec(tuple(args.summary), args.title,
                    not args.linear_y, args.out)
    try:
        path = render(spec)
    except (SummaryFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

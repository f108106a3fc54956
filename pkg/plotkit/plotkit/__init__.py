"""Figures from experiment summary CSVs."""
from .plot import PlotSpec, render, render_figure, SummaryFormatError

__version__ = "0.1.0"
__all__ = ["PlotSpec", "render", "render_figure", "SummaryFormatError"]

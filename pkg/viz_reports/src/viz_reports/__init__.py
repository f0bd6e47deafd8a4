"""Static figures from the simulator's CSV outputs.

Two renderers: a log-log convergence plot from ``sweep.csv`` and a
multi-panel monitor/norm history plot from ``history.csv``.  Batch
artifacts only -- deterministic output, no timestamps embedded.
"""
from .tables import HistoryTable, SchemaError, SweepTable
from .plots import render_convergence_plot, render_history_plot

__version__ = "0.1.0"

__all__ = [
    "HistoryTable",
    "SchemaError",
    "SweepTable",
    "render_convergence_plot",
    "render_history_plot",
    "__version__",
]

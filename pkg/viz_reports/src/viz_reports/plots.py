"""Figure renderers.

Output is deterministic: the Agg/SVG backends are used directly (no GUI),
and no timestamps are embedded, so re-rendering identical input produces
an identical file.
"""
from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .tables import DIFF_COLUMNS, HistoryTable, SweepTable  # noqa: E402

__all__ = ["render_convergence_plot", "render_history_plot"]

_DIFF_LABELS = {
    "sup_Hsm1": r"$\sup_t\ H^{s-1}$",
    "l2t_Hsmhalf": r"$L^2_t\ H^{s-1/2}$",
    "sup_Hsm2": r"$\sup_t\ H^{s-2}$",
    "l2t_Hsm3half": r"$L^2_t\ H^{s-3/2}$",
}


def _save(fig, out_path) -> None:
    out_path = os.fspath(out_path)
    kwargs = {}
    if out_path.endswith(".svg"):
        # The SVG backend embeds a creation date unless told otherwise.
        kwargs["metadata"] = {"Date": None}
    fig.savefig(out_path, dpi=150, **kwargs)
    plt.close(fig)


def _fit_slope(s, d):
    """Least-squares slope/intercept of log d vs log s, or None if the
    data cannot support a line (fewer than 2 positive points)."""
    mask = (d > 0) & np.isfinite(d)
    if np.count_nonzero(mask) < 2:
        return None
    return np.polyfit(np.log(s[mask]), np.log(d[mask]), 1)


def render_convergence_plot(table: SweepTable, out_path) -> str:
    """Log-log scatter of each difference norm against the surface-tension
    coefficient, with per-norm fitted lines and slope-1 / slope-1/2
    reference lines.  Requires at least 3 completed rows."""
    if table.n_completed < 3:
        raise ValueError(f"need at least 3 completed sweep rows to plot a "
                         f"convergence trend, have {table.n_completed}")
    done = table.completed
    s = table.s_coeff[done]
    order = np.argsort(s)
    s = s[order]

    fig, ax = plt.subplots(figsize=(6.4, 4.8), constrained_layout=True)
    colors = plt.cm.tab10(np.linspace(0, 1, 10))
    anchor = None  # (s, d) point anchoring the reference lines
    for i, name in enumerate(DIFF_COLUMNS):
        d = table.diffs[name][done][order]
        ax.loglog(s, d, "o", color=colors[i], label=_DIFF_LABELS[name])
        fit = _fit_slope(s, d)
        if fit is not None:
            slope, intercept = fit
            ax.loglog(s, np.exp(intercept) * s ** slope, "-",
                      color=colors[i], linewidth=1,
                      label=f"fit: order {slope:.2f}")
        if anchor is None and d[-1] > 0:
            anchor = (s[-1], d[-1])

    if anchor is not None:
        s0, d0 = anchor
        ax.loglog(s, d0 * (s / s0), "k--", linewidth=1, label="slope 1")
        ax.loglog(s, d0 * np.sqrt(s / s0), "k:", linewidth=1,
                  label="slope 1/2")

    ax.set_xlabel("surface-tension coefficient")
    ax.set_ylabel("difference to the zero-surface-tension run")
    ax.set_title("Vanishing surface tension: convergence rates")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    _save(fig, out_path)
    return os.fspath(out_path)


def render_history_plot(table: HistoryTable, out_path) -> str:
    """Panels for the Rayleigh-Taylor infimum, boundary separation,
    energy, and each tracked Sobolev norm against time."""
    panels = [("inf_RT", "inf RT", table.fixed["inf_RT"]),
              ("separation", "separation", table.fixed["separation"]),
              ("energy", "energy", table.fixed["energy"])]
    for name in sorted(table.norms):
        label = name.replace("norm_H", "$H^{") + "}$ norm" \
            if name.startswith("norm_H") else name
        panels.append((name, label, table.norms[name]))

    n = len(panels)
    ncols = 2
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(8.0, 2.2 * nrows),
                             constrained_layout=True, sharex=True)
    axes = np.atleast_1d(axes).ravel()
    for ax, (_, label, values) in zip(axes, panels):
        ax.plot(table.t, values, "-", linewidth=1.2)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    for ax in axes[len(panels):]:
        ax.set_visible(False)
    for ax in axes[max(0, len(panels) - ncols):len(panels)]:
        ax.set_xlabel("t")
    fig.suptitle("Interface monitors and norms")
    _save(fig, out_path)
    return os.fspath(out_path)

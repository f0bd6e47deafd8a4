"""Vanishing-surface-tension convergence study.

Runs the s = 0 reference once, then each surface-tension run on the same
grid with snapshots forced at the reference's accepted times, so norm
differences are interpolation-free.  Fits log-log slopes of the
differences against s with 95% confidence intervals and emits
``sweep.csv`` / ``fit.json``.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import math
import os

import numpy as np
from scipy import stats

from .config import RunConfig
from .errors import MonitorBreach, MuskatError, ValidationError
from .grid import SpectralField, sobolev_norm
from .timestepping import TimeSeries, integrate

__all__ = [
    "SweepRow",
    "RateFit",
    "ConvergenceReport",
    "fit_rate",
    "run_convergence_sweep",
    "emit_report",
    "parse_sweep_csv",
    "SWEEP_HEADER",
]

SWEEP_HEADER = "s_coeff,sup_Hsm1,l2t_Hsmhalf,sup_Hsm2,l2t_Hsm3half,completed"


@dataclasses.dataclass(frozen=True)
class SweepRow:
    s_coeff: float
    sup_Hsm1: float
    l2t_Hsmhalf: float
    sup_Hsm2: float
    l2t_Hsm3half: float
    completed: bool
    uniform_proxy: float = float("nan")  # sqrt(s) * L2-in-time H^{s+3/2}

    def __post_init__(self):
        for name in ("sup_Hsm1", "l2t_Hsmhalf", "sup_Hsm2", "l2t_Hsm3half"):
            v = getattr(self, name)
            if self.completed and not (v >= 0):
                raise ValidationError(f"{name} must be nonnegative")


@dataclasses.dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    interval: float      # 95% half-width on the slope
    n_points: int
    degenerate: bool = False

    @classmethod
    def degenerate_fit(cls, n_points: int = 0) -> "RateFit":
        return cls(float("nan"), float("nan"), float("nan"), n_points, True)


def fit_rate(pairs) -> RateFit:
    """OLS on (log s, log diff); 95% interval from residual variance."""
    pairs = [(float(s), float(d)) for s, d in pairs]
    usable = [(s, d) for s, d in pairs if s > 0 and d > 0
              and math.isfinite(s) and math.isfinite(d)]
    if len(usable) < 3:
        return RateFit.degenerate_fit(len(usable))
    x = np.log([s for s, _ in usable])
    y = np.log([d for _, d in usable])
    n = len(usable)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0:
        return RateFit.degenerate_fit(n)
    if n > 2:
        se = math.sqrt(float(np.sum(resid**2)) / (n - 2) / sxx)
        half = float(stats.t.ppf(0.975, n - 2)) * se
    else:
        half = float("inf")
    return RateFit(float(slope), float(intercept), half, n)


@dataclasses.dataclass
class ConvergenceReport:
    rows: list
    fits: dict               # name -> RateFit
    norm_s: float
    metadata: dict
    reference: TimeSeries | None = None

    def completed_rows(self):
        return [r for r in self.rows if r.completed]


def _interface_norms(series: TimeSeries, times, sigma: float):
    out = []
    for t in times:
        state = series.state_at(t)
        out.append(sobolev_norm(state.eta.height, sigma))
    return np.array(out)


def _diff_norms(ref: TimeSeries, run: TimeSeries, times, sigma: float):
    out = []
    for t in times:
        d = run.state_at(t).eta.height - ref.state_at(t).eta.height
        out.append(sobolev_norm(d, sigma))
    return np.array(out)


def _l2_in_time(times, values) -> float:
    return float(math.sqrt(np.trapezoid(np.asarray(values) ** 2, times)))


def _single_run(cfg: RunConfig, s: float, forced_times):
    params = cfg.params.with_surface_tension(s)
    sim = dataclasses.replace(
        cfg.sim, tracked_sigmas=(cfg.norm_s, cfg.norm_s - 1.0,
                                 cfg.norm_s - 2.0))
    return integrate(cfg.initial_interface(), params, cfg.dom, sim,
                     solver=cfg.solver, forced_times=forced_times)


def _sweep_worker(args):
    cfg, s, forced = args
    try:
        series = _single_run(cfg, s, forced)
    except MuskatError as exc:
        return s, None, str(exc)
    if series.status != "completed":
        return s, series, series.reason
    return s, series, None


def run_convergence_sweep(cfg: RunConfig,
                          threads: int = 1) -> ConvergenceReport:
    if not cfg.sweep:
        raise ValidationError("sweep list is empty")
    smallest = min(cfg.sweep)
    time_tol = 1e-3 * smallest
    sim = dataclasses.replace(cfg.sim, tolerance=min(cfg.sim.tolerance,
                                                     time_tol))
    cfg = dataclasses.replace(cfg, sim=sim)
    t_end = cfg.sim.t_end
    quarter_marks = [t_end * f for f in (0.25, 0.5, 0.75, 1.0)]

    try:
        reference = _single_run(cfg, 0.0, quarter_marks)
    except MonitorBreach as exc:
        raise MonitorBreach(
            f"reference run (s = 0) breached monitor "
            f"{exc.monitor}: {exc}", monitor=exc.monitor,
            value=exc.value) from exc
    if reference.status != "completed":
        raise MonitorBreach(f"reference run (s = 0) did not complete: "
                            f"{reference.reason}")
    shared_times = list(reference.times)

    jobs = [(cfg, s, shared_times) for s in cfg.sweep]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(job) for job in jobs]

    s_val = cfg.norm_s
    rows = []
    for s, series, failure in results:
        if failure is not None or series is None:
            rows.append(SweepRow(s, float("nan"), float("nan"),
                                 float("nan"), float("nan"), False))
            continue
        sup1 = float(np.max(_diff_norms(reference, series, shared_times,
                                        s_val - 1.0)))
        sup2 = float(np.max(_diff_norms(reference, series, shared_times,
                                        s_val - 2.0)))
        l2h = _l2_in_time(shared_times,
                          _diff_norms(reference, series, shared_times,
                                      s_val - 0.5))
        l23 = _l2_in_time(shared_times,
                          _diff_norms(reference, series, shared_times,
                                      s_val - 1.5))
        own_times = series.times
        proxy = math.sqrt(s) * _l2_in_time(
            own_times, _interface_norms(series, own_times, s_val + 1.5))
        rows.append(SweepRow(s, sup1, l2h, sup2, l23, True, proxy))

    done = [r for r in rows if r.completed]
    fits = {
        "sup_Hsm1": fit_rate([(r.s_coeff, r.sup_Hsm1) for r in done]),
        "l2t_Hsmhalf": fit_rate([(r.s_coeff, r.l2t_Hsmhalf) for r in done]),
        "sup_Hsm2": fit_rate([(r.s_coeff, r.sup_Hsm2) for r in done]),
        "l2t_Hsm3half": fit_rate([(r.s_coeff, r.l2t_Hsm3half)
                                  for r in done]),
    }
    metadata = {
        "n_points": cfg.grid.n_points,
        "length": cfg.grid.length,
        "n_z": cfg.solver.n_z,
        "t_end": t_end,
        "time_tolerance": cfg.sim.tolerance,
        "norm_s": s_val,
        "scenario": cfg.scenario,
        "modes": [[int(k), float(a)] for k, a in cfg.modes],
        "reference_steps": len(reference.dts),
    }
    return ConvergenceReport(rows=rows, fits=fits, norm_s=s_val,
                             metadata=metadata, reference=reference)


def emit_report(report: ConvergenceReport, directory) -> dict:
    """Write sweep.csv and fit.json; returns the paths written."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, "sweep.csv")
    lines = [SWEEP_HEADER]
    for r in report.rows:
        lines.append(",".join([
            repr(float(r.s_coeff)), repr(float(r.sup_Hsm1)),
            repr(float(r.l2t_Hsmhalf)), repr(float(r.sup_Hsm2)),
            repr(float(r.l2t_Hsm3half)), "1" if r.completed else "0"]))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    fit_path = os.path.join(directory, "fit.json")
    payload = {
        "fits": {name: {"slope": f.slope, "intercept": f.intercept,
                        "interval95": f.interval, "n_points": f.n_points,
                        "degenerate": f.degenerate}
                 for name, f in report.fits.items()},
        "uniform_proxy": {repr(float(r.s_coeff)): r.uniform_proxy
                          for r in report.rows if r.completed},
        "config": report.metadata,
    }
    with open(fit_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    paths = {"sweep": csv_path, "fit": fit_path}
    if report.reference is not None:
        hist_path = os.path.join(directory, "reference_history.csv")
        report.reference.write_csv(hist_path)
        paths["reference_history"] = hist_path
    return paths


def parse_sweep_csv(path):
    """Read sweep.csv back into SweepRow objects (schema-checked)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != SWEEP_HEADER:
        raise ValidationError(
            f"bad sweep.csv header: expected {SWEEP_HEADER!r}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ValidationError(f"bad sweep.csv row: {ln!r}")
        rows.append(SweepRow(float(parts[0]), float(parts[1]),
                             float(parts[2]), float(parts[3]),
                             float(parts[4]), parts[5] == "1"))
    return rows

"""Command-line interface.

Verbs: ``run`` (single simulation), ``sweep`` (convergence study),
``dn-test`` (elliptic operator suite), ``para-test`` (paradifferential
suite), ``version``.  Exit codes: 0 success, 2 validation error,
3 monitor breach, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import __version__
from .config import parse_config
from .dynamics import FluidParams, MuskatOperators
from .elliptic import (DNOperator, EllipticSolveConfig, dn_apply,
                       solve_two_phase)
from .errors import (MonitorBreach, NumericalError, ValidationError)
from .geometry import Boundary, DomainSpec, Interface
from .grid import PeriodicGrid, SpectralField, l2_inner, sobolev_norm
from .paracalc import (CutoffPair, ParaSymbol, garding_check,
                       operator_order_fit, paradiff_apply, paradiff_matrix,
                       paralin_residual)
from .timestepping import integrate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MONITOR = 3
EXIT_NUMERICAL = 4


def _cmd_version(_args) -> int:
    print(f"muskatdn {__version__}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    sim = dataclasses.replace(
        cfg.sim, tracked_sigmas=(cfg.norm_s, cfg.norm_s - 1.0,
                                 cfg.norm_s - 2.0))
    series = integrate(cfg.initial_interface(), cfg.params, cfg.dom, sim,
                       solver=cfg.solver)
    series.write_csv(os.path.join(out_dir, "history.csv"))
    series.write_snapshots(os.path.join(out_dir, "snapshots"))
    final = series.final()
    print(f"status={series.status} t={final.t:.6g} "
          f"steps={len(series.dts)} inf_RT={final.rt_infimum:.6g} "
          f"separation={final.separation:.6g} energy={final.energy:.6g}")
    if series.status == "monitor_breach":
        print(f"monitor breach: {series.reason}", file=sys.stderr)
        return EXIT_MONITOR
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .rates import emit_report, run_convergence_sweep
    cfg = parse_config(args.config)
    out_dir = args.out or cfg.out_dir
    report = run_convergence_sweep(cfg, threads=max(1, args.threads))
    paths = emit_report(report, out_dir)
    for name, fit in report.fits.items():
        if fit.degenerate:
            print(f"{name}: degenerate fit ({fit.n_points} usable points)")
        else:
            print(f"{name}: order {fit.slope:.3f} "
                  f"+/- {fit.interval:.3f} ({fit.n_points} points)")
    print(f"wrote {paths['sweep']} and {paths['fit']}")
    return EXIT_OK


def _report(name: str, value: float, bound: float, cmp: str = "<=") -> bool:
    ok = value <= bound if cmp == "<=" else value >= bound
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {value:.3e} "
          f"({cmp} {bound:g})")
    return ok


def _cmd_dn_test(args) -> int:
    rng = np.random.default_rng(args.seed)
    grid = PeriodicGrid(128)
    config = EllipticSolveConfig(n_z=128, tol=1e-10)
    ok = True

    flat = Interface(SpectralField.zero(grid), 3.0)
    dom = DomainSpec.one_phase(Boundary.flat_at(1.0))
    flat_op = DNOperator(flat, "lower", dom, config)
    worst = 0.0
    for k in range(1, 9):
        f = SpectralField.from_function(grid, lambda x: np.cos(k * x))
        g = dn_apply(flat_op, f)
        target = k * np.tanh(k * 1.0)
        worst = max(worst, float(np.max(np.abs(g.values - target * f.values))
                                 / target))
    ok &= _report("flat DN vs |k|tanh(|k|), k=1..8", worst, 2.5e-4)

    config2 = EllipticSolveConfig(n_z=64, tol=1e-10)
    n_pairs = 8
    sym_worst = pos_worst = mean_worst = 0.0
    for _ in range(n_pairs):
        coeffs = 0.1 * rng.standard_normal(4) / np.arange(1, 5) ** 2
        eta = Interface(SpectralField.from_function(
            grid, lambda x: sum(c * np.cos((i + 1) * x + rng.uniform(0, 1))
                                for i, c in enumerate(coeffs))), 3.0)
        f = SpectralField.from_values(grid, rng.standard_normal(128))
        g = SpectralField.from_values(grid, rng.standard_normal(128))
        op = DNOperator(eta, "lower", dom, config2)
        gf, gg = op.apply(f), op.apply(g)
        scale = sobolev_norm(f, 0.0) * sobolev_norm(g, 0.0)
        sym_worst = max(sym_worst,
                        abs(l2_inner(gf, g) - l2_inner(f, gg)) / scale)
        pos_worst = max(pos_worst, -l2_inner(gf, f) / scale)
        mean_worst = max(mean_worst, abs(float(np.mean(gf.values))))
    bound = 10 * config2.tol
    ok &= _report("DN symmetry on random pairs", sym_worst, bound)
    ok &= _report("DN positivity defect", pos_worst, bound)
    ok &= _report("DN mean of output", mean_worst, bound)

    dom2 = DomainSpec.two_phase(Boundary.flat_at(1.0), Boundary.flat_at(1.0))
    eta = Interface(SpectralField.from_function(
        grid, lambda x: 0.1 * np.cos(x)), 3.0)
    v = SpectralField.from_function(grid, lambda x: np.sin(2 * x))
    jump_worst = 0.0
    for mu_m, mu_p in ((1.0, 1.0), (2.0, 0.5)):
        params = FluidParams(mu_minus=mu_m, mu_plus=mu_p, rho_minus=1.0,
                             rho_plus=0.5)
        f_m, f_p = solve_two_phase(eta, v, params, dom2, config2)
        jump_worst = max(jump_worst, float(np.max(np.abs(
            f_m.values - f_p.values - v.values))))
    ok &= _report("two-phase jump identity f- - f+ = v", jump_worst, 1e-12)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _cmd_para_test(args) -> int:
    grid = PeriodicGrid(256)
    cut = CutoffPair()
    ok = True

    one = ParaSymbol.from_multiplier(grid, lambda xi: np.ones_like(xi), 0.0)
    u = SpectralField.from_function(
        grid, lambda x: np.cos(x) + 0.3 * np.sin(5 * x) + 0.2)
    psi_u = SpectralField.from_coefficients(
        grid, cut.psi(grid.xi) * u.coefficients)
    t1_err = float(np.max(np.abs(paradiff_apply(one, u, cut).values
                                 - psi_u.values)))
    ok &= _report("T_1 = Psi(D)", t1_err, 1e-13)

    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.3 * np.cos(x)) * np.abs(xi), 1.0, 5.0)
    b = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.3 * np.sin(x)) * np.abs(xi), 1.0, 5.0)
    ma, mb = paradiff_matrix(a, cut), paradiff_matrix(b, cut)
    mab = paradiff_matrix(a.product(b), cut)

    def as_map(mat):
        return lambda f: SpectralField.from_values(
            grid, np.fft.ifft(mat @ f.coefficients * grid.n_points).real)

    delta = min(1.0, a.regularity)
    comp = operator_order_fit(as_map(ma @ mb - mab), grid)
    ok &= _report("composition order T_aT_b - T_ab", comp,
                  a.order + b.order - delta + 0.15)
    adj = operator_order_fit(as_map(np.conj(ma).T - ma), grid)
    ok &= _report("adjoint order T_a* - T_abar", adj,
                  a.order - delta + 0.15)

    eta = Interface(SpectralField.from_function(
        grid, lambda x: 0.1 * np.cos(x)), 3.0)
    rep = paralin_residual(eta, None, "DN",
                           config=EllipticSolveConfig(n_z=96, tol=1e-10))
    ok &= _report("DN paralinearization residual order", rep.fitted_order,
                  0.6)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        rep.write_csv(os.path.join(args.out, "paralin_dn.csv"))

    g1 = garding_check(
        ParaSymbol.from_multiplier(grid, np.abs, 1.0, regularity=1.0),
        m=1.0, c=1.0, samples=64, seed=args.seed)
    stable = g1.stable and np.isfinite(g1.constant)
    print(f"[{'PASS' if stable else 'FAIL'}] Garding constant "
          f"C={g1.constant:.3f} (half-sample C={g1.constant_half:.3f}, "
          f"stable={g1.stable})")
    ok &= stable
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muskatdn",
        description="Pseudospectral Muskat interface simulator")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="single simulation from a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="surface-tension convergence "
                                           "study")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--threads", type=int, default=1)

    p_dn = sub.add_parser("dn-test", help="elliptic operator verification")
    p_dn.add_argument("--seed", type=int, default=0)

    p_para = sub.add_parser("para-test",
                            help="paradifferential verification")
    p_para.add_argument("--seed", type=int, default=0)
    p_para.add_argument("--out", default=None)

    sub.add_parser("version", help="print the package version")
    return parser


_DISPATCH = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "dn-test": _cmd_dn_test,
    "para-test": _cmd_para_test,
    "version": _cmd_version,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.verb](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MonitorBreach as exc:
        print(f"monitor breach: {exc}", file=sys.stderr)
        return EXIT_MONITOR
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

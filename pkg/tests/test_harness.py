"""Config parsing, rate fitting, report emission, and the CLI."""
import dataclasses
import json
import os

import numpy as np
import pytest

from muskatdn.cli import main as cli_main
from muskatdn.config import RunConfig, parse_config_text
from muskatdn.dynamics import FluidParams
from muskatdn.elliptic import EllipticSolveConfig
from muskatdn.errors import ConfigError, MonitorBreach, ValidationError
from muskatdn.geometry import Boundary, DomainSpec
from muskatdn.grid import PeriodicGrid
from muskatdn.rates import (ConvergenceReport, RateFit, SWEEP_HEADER,
                            SweepRow, emit_report, fit_rate,
                            parse_sweep_csv, run_convergence_sweep)
from muskatdn.timestepping import SimConfig

MINIMAL = """
[scenario]
type = one-phase
"""


def test_minimal_config_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.scenario == "one-phase"
    assert cfg.params.mu_minus == 1.0 and cfg.params.is_one_phase
    assert cfg.dom.top.kind == "vacuum"
    assert cfg.grid.n_points == 256
    assert cfg.modes == ((1, 0.1), (3, 0.02))
    eta = cfg.initial_interface()
    expect = 0.1 * np.cos(cfg.grid.nodes) + 0.02 * np.cos(3 * cfg.grid.nodes)
    assert np.allclose(eta.height.values, expect, atol=1e-14)


def test_unknown_key_reports_line():
    text = MINIMAL + "\n[grid]\nn_points = 64\nbogus = 1\n"
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert "bogus" in str(err.value) and err.value.line is not None


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        parse_config_text(MINIMAL + "\n[nonsense]\nkey = 1\n")


def test_stable_regime_enforced():
    text = """
[scenario]
type = two-phase
[fluid]
mu_plus = 1.0
rho_minus = 0.5
rho_plus = 1.0
"""
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert "stable regime" in str(err.value)


def test_sweep_must_decrease():
    text = MINIMAL + "\n[sweep]\ns_values = 0.1, 0.2\n"
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert "decreasing" in str(err.value)


def test_bad_number_reports_line():
    text = MINIMAL + "\n[time]\nt_end = abc\n"
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert err.value.line is not None


def test_duplicate_key_rejected():
    text = MINIMAL + "\n[grid]\nn_points = 64\nn_points = 128\n"
    with pytest.raises(ConfigError):
        parse_config_text(text)


# --------------------------------------------------------------- fit_rate

def test_fit_rate_exact_slopes():
    svals = [2.0**-n for n in range(2, 9)]
    for slope in (1.0, 0.5):
        fit = fit_rate([(s, 3.0 * s**slope) for s in svals])
        assert abs(fit.slope - slope) < 1e-12
        assert not fit.degenerate


def test_fit_rate_noisy_oracle():
    rng = np.random.default_rng(42)
    svals = [2.0**-n for n in range(2, 9)]
    diffs = [0.7 * s * (1 + 0.05 * rng.standard_normal()) for s in svals]
    fit = fit_rate(list(zip(svals, diffs)))
    assert 0.93 <= fit.slope <= 1.07


def test_fit_rate_degenerate():
    assert fit_rate([(0.1, 1.0), (0.05, 0.5)]).degenerate
    assert fit_rate([(0.1, 0.0), (0.05, 0.0), (0.025, 0.0)]).degenerate


# --------------------------------------------------------- emit / parse

def _dummy_report(rows):
    fits = {"sup_Hsm1": RateFit(1.0, 0.0, 0.1, len(rows)),
            "l2t_Hsmhalf": RateFit(1.0, 0.0, 0.1, len(rows)),
            "sup_Hsm2": RateFit(1.0, 0.0, 0.1, len(rows)),
            "l2t_Hsm3half": RateFit(1.0, 0.0, 0.1, len(rows))}
    return ConvergenceReport(rows=rows, fits=fits, norm_s=3.0,
                             metadata={"n_points": 64})


def test_emit_report_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    rows = [SweepRow(2.0**-n, *rng.uniform(1e-6, 1.0, 4), True)
            for n in range(2, 9)]
    paths = emit_report(_dummy_report(rows), tmp_path)
    back = parse_sweep_csv(paths["sweep"])
    assert len(back) == 7
    for a, b in zip(rows, back):
        for name in ("s_coeff", "sup_Hsm1", "l2t_Hsmhalf", "sup_Hsm2",
                     "l2t_Hsm3half"):
            assert abs(getattr(a, name) - getattr(b, name)) <= 1e-15
    with open(paths["fit"]) as fh:
        payload = json.load(fh)
    assert payload["fits"]["sup_Hsm1"]["slope"] == 1.0


def test_emit_report_empty(tmp_path):
    paths = emit_report(_dummy_report([]), tmp_path)
    with open(paths["sweep"]) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    assert lines == [SWEEP_HEADER]


def test_sweep_csv_schema_guard(tmp_path):
    path = os.path.join(tmp_path, "bad.csv")
    with open(path, "w") as fh:
        fh.write("wrong,header\n1,2\n")
    with pytest.raises(ValidationError):
        parse_sweep_csv(path)


# ------------------------------------------------------------- sweeps

def _tiny_config(modes, sweep, linear_only=False, t_end=0.01):
    return RunConfig(
        scenario="one-phase",
        params=FluidParams(mu_minus=1.0),
        dom=DomainSpec.one_phase(Boundary.flat_at(1.0)),
        sim=SimConfig(t_end=t_end, tolerance=1e-7, linear_only=linear_only),
        solver=EllipticSolveConfig(n_z=16, tol=1e-10),
        grid=PeriodicGrid(32),
        modes=modes,
        sweep=sweep,
        out_dir="out")


def test_sweep_zero_data_degenerate():
    cfg = _tiny_config((), (0.25, 0.125, 0.0625))
    report = run_convergence_sweep(cfg)
    assert all(r.completed for r in report.rows)
    assert all(f.degenerate for f in report.fits.values())
    assert max(r.sup_Hsm1 for r in report.rows) == 0.0


def test_sweep_linear_mode_order_one():
    # single linear mode, nonlinearity disabled: the difference comes from
    # the exact exponential flows, so the fitted order is 1.00 +/- 0.02
    sweep = tuple(2.0**-n for n in range(2, 9))
    cfg = _tiny_config(((2, 0.1),), sweep, linear_only=True, t_end=0.02)
    report = run_convergence_sweep(cfg)
    for f in report.fits.values():
        assert abs(f.slope - 1.0) <= 0.02


def test_sweep_determinism(tmp_path):
    cfg = _tiny_config(((1, 0.1),), (0.25, 0.125, 0.0625))
    a = run_convergence_sweep(cfg)
    b = run_convergence_sweep(cfg)
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    emit_report(a, dir_a)
    emit_report(b, dir_b)
    assert (dir_a / "sweep.csv").read_bytes() == \
        (dir_b / "sweep.csv").read_bytes()


def test_sweep_diffs_monotone_at_small_s():
    cfg = _tiny_config(((1, 0.1),), (0.05, 0.025, 0.0125, 0.00625))
    report = run_convergence_sweep(cfg)
    sup = [r.sup_Hsm1 for r in report.rows]
    assert all(b <= a for a, b in zip(sup, sup[1:]))


def test_sweep_reference_breach_is_reported():
    cfg = _tiny_config(((1, 0.1),), (0.25, 0.125, 0.0625))
    cfg = dataclasses.replace(
        cfg, sim=dataclasses.replace(cfg.sim, a_min=0.9999))
    with pytest.raises(MonitorBreach) as err:
        run_convergence_sweep(cfg)
    assert "reference" in str(err.value)


# ---------------------------------------------------------------- CLI

def test_cli_version(capsys):
    assert cli_main(["version"]) == 0
    assert "muskatdn" in capsys.readouterr().out


def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfg_path = os.path.join(tmp_path, "run.cfg")
    with open(cfg_path, "w") as fh:
        fh.write("""
[scenario]
type = one-phase
[grid]
n_points = 32
[initial]
modes = 1:0.1
[time]
t_end = 0.01
[solver]
n_z = 16
""")
    out = os.path.join(tmp_path, "out")
    assert cli_main(["run", "--config", cfg_path, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "history.csv"))
    assert os.path.isdir(os.path.join(out, "snapshots"))
    capsys.readouterr()


def test_cli_validation_exit_code(tmp_path, capsys):
    bad = os.path.join(tmp_path, "bad.cfg")
    with open(bad, "w") as fh:
        fh.write("[scenario]\ntype = three-phase\n")
    assert cli_main(["run", "--config", bad, "--out",
                     os.path.join(tmp_path, "o")]) == 2
    capsys.readouterr()


def test_cli_monitor_breach_exit_code(tmp_path, capsys):
    cfg_path = os.path.join(tmp_path, "breach.cfg")
    with open(cfg_path, "w") as fh:
        fh.write("""
[scenario]
type = one-phase
[grid]
n_points = 32
[initial]
modes = 1:0.2
[time]
t_end = 0.01
a_min = 0.9999
[solver]
n_z = 16
""")
    assert cli_main(["run", "--config", cfg_path, "--out",
                     os.path.join(tmp_path, "o")]) == 3
    capsys.readouterr()


def test_cli_sweep_writes_outputs(tmp_path, capsys):
    cfg_path = os.path.join(tmp_path, "sweep.cfg")
    with open(cfg_path, "w") as fh:
        fh.write("""
[scenario]
type = one-phase
[grid]
n_points = 32
[initial]
modes = 1:0.1
[time]
t_end = 0.01
[solver]
n_z = 16
[sweep]
s_values = 0.25, 0.125, 0.0625
""")
    out = os.path.join(tmp_path, "out")
    assert cli_main(["sweep", "--config", cfg_path, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "sweep.csv"))
    assert os.path.exists(os.path.join(out, "fit.json"))
    assert os.path.exists(os.path.join(out, "reference_history.csv"))
    capsys.readouterr()

"""Paradifferential quantization, order fits, Garding scan, and
paralinearization residuals."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muskatdn.elliptic import EllipticSolveConfig
from muskatdn.errors import ValidationError
from muskatdn.geometry import Interface
from muskatdn.grid import PeriodicGrid, SpectralField
from muskatdn.paracalc import (CutoffPair, ParaSymbol, garding_check,
                               operator_order_fit, paradiff_apply,
                               paradiff_matrix, paralin_residual)


@pytest.fixture(scope="module")
def grid():
    return PeriodicGrid(256)


@pytest.fixture(scope="module")
def cut():
    return CutoffPair()


def _as_map(grid, mat):
    return lambda f: SpectralField.from_values(
        grid, np.fft.ifft(mat @ f.coefficients * grid.n_points).real)


def test_cutoff_shapes(cut):
    assert cut.psi(0.1) == 0.0 and cut.psi(0.2) == 0.0
    assert cut.psi(0.25) == 1.0 and cut.psi(5.0) == 1.0
    assert 0.0 < cut.psi(0.22) < 1.0
    assert cut.chi(0.5, 10.0) == 1.0     # |theta| <= eps1 |eta|
    assert cut.chi(2.5, 10.0) == 0.0     # |theta| >= eps2 |eta|
    assert 0.0 < cut.chi(1.5, 10.0) < 1.0
    with pytest.raises(ValidationError):
        CutoffPair(eps1=0.3, eps2=0.2)


def test_symbol_validation(grid):
    with pytest.raises(ValidationError):
        ParaSymbol(grid, np.ones((3, 3)), 1.0, 1.0)
    table = np.ones((256, 256))
    table[0, 0] = np.inf
    with pytest.raises(ValidationError):
        ParaSymbol(grid, table, 1.0, 1.0)


def test_t1_is_psi_of_d(grid, cut):
    one = ParaSymbol.from_multiplier(grid, lambda xi: np.ones_like(xi), 0.0)
    u = SpectralField.from_function(
        grid, lambda x: 1.3 + np.cos(x) + 0.4 * np.sin(7 * x))
    out = paradiff_apply(one, u, cut)
    expect = SpectralField.from_coefficients(
        grid, cut.psi(grid.xi) * u.coefficients)
    assert np.max(np.abs(out.values - expect.values)) < 1e-13


def test_x_independent_symbol_reduces_to_multiplier(grid, cut):
    a = ParaSymbol.from_multiplier(grid, np.abs, 1.0)
    for k in (1, 6, 40):
        u = SpectralField.from_function(grid, lambda x: np.cos(k * x))
        out = paradiff_apply(a, u, cut)
        assert np.max(np.abs(out.values - k * u.values)) < 1e-11 * max(k, 1)


def test_linearity_random_pairs(grid, cut):
    rng = np.random.default_rng(5)
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.1 * np.cos(x)) * np.abs(xi), 1.0, 5.0)
    for _ in range(5):
        u = SpectralField.from_values(grid, rng.standard_normal(256))
        v = SpectralField.from_values(grid, rng.standard_normal(256))
        al, be = rng.standard_normal(2)
        lhs = paradiff_apply(a, al * u + be * v, cut).values
        rhs = al * paradiff_apply(a, u, cut).values \
            + be * paradiff_apply(a, v, cut).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (
            1 + np.max(np.abs(lhs)))


def test_low_frequency_annihilation(grid, cut):
    # on the unit-period grid only k = 0 lies in |k| <= 1/5
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.1 * np.cos(x)) * np.abs(xi), 1.0, 5.0)
    u = SpectralField.constant(grid, 3.7)
    assert np.max(np.abs(paradiff_apply(a, u, cut).values)) == 0.0


def test_output_support_near_input_mode(grid, cut):
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.1 * np.cos(x)) * np.abs(xi), 1.0, 5.0)
    k = 40
    u = SpectralField.from_function(grid, lambda x: np.cos(k * x))
    out = paradiff_apply(a, u, cut)
    kk = np.rint(grid.wavenumbers).astype(int)
    outside = np.abs(out.coefficients)[np.abs(np.abs(kk) - k) > 0.2 * k]
    assert np.max(outside) < 1e-12


def test_order_fit_oracles(grid, cut):
    a = ParaSymbol.from_multiplier(grid, np.abs, 1.0)
    slope = operator_order_fit(lambda f: paradiff_apply(a, f, cut), grid)
    assert abs(slope - 1.0) < 0.01
    slope0 = operator_order_fit(lambda f: f, grid)
    assert abs(slope0) < 0.01
    assert operator_order_fit(
        lambda f: SpectralField.zero(grid), grid) == float("-inf")
    with pytest.raises(ValidationError):
        operator_order_fit(lambda f: f, grid, probes=(8, 12, 16))
    with pytest.raises(ValidationError):
        operator_order_fit(lambda f: f, grid, probes=(2, 8, 16, 32))


def test_composition_order_bound(grid, cut):
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.3 * np.cos(x)) * np.abs(xi), 1.0, 5.0)
    b = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.3 * np.sin(x)) * np.abs(xi), 1.0, 5.0)
    ma, mb = paradiff_matrix(a, cut), paradiff_matrix(b, cut)
    mab = paradiff_matrix(a.product(b), cut)
    slope = operator_order_fit(_as_map(grid, ma @ mb - mab), grid)
    delta = min(1.0, a.regularity)
    assert slope <= a.order + b.order - delta + 0.15


def test_adjoint_order_bound(grid, cut):
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.3 * np.cos(x)) * np.abs(xi), 1.0, 5.0)
    ma = paradiff_matrix(a, cut)
    slope = operator_order_fit(_as_map(grid, np.conj(ma).T - ma), grid)
    assert slope <= a.order - min(1.0, a.regularity) + 0.15


def test_garding_multiplier_case(grid):
    a = ParaSymbol.from_multiplier(grid, np.abs, 1.0, regularity=1.0)
    rep = garding_check(a, m=1.0, c=1.0, samples=64, seed=0)
    assert np.isfinite(rep.constant) and rep.stable
    assert abs(rep.constant - 1.0) < 0.1


def test_garding_variable_cubic_stable(grid):
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + 0.2 * np.cos(x)) * np.abs(xi) ** 3,
        3.0, 2.0)
    small = garding_check(a, m=3.0, c=0.8, samples=32, seed=1)
    double = garding_check(a, m=3.0, c=0.8, samples=64, seed=1)
    assert np.isfinite(double.constant) and double.stable
    assert double.constant <= 2.0 * small.constant + 1e-12


def test_garding_ellipticity_scan_failure(grid):
    a = ParaSymbol.from_function(
        grid, lambda x, xi: np.cos(x) * np.abs(xi), 1.0, 1.0)
    with pytest.raises(ValidationError):
        garding_check(a, m=1.0, c=1.0, samples=4)


def test_dn_paralinearization_gain(grid):
    eta = Interface(SpectralField.from_function(
        grid, lambda x: 0.1 * np.cos(x)), 3.0)
    rep = paralin_residual(eta, None, "DN",
                           config=EllipticSolveConfig(n_z=96, tol=1e-10))
    assert rep.fitted_order <= 0.6


def test_dn_residual_vanishes_flat(grid):
    flat = Interface(SpectralField.zero(grid), 3.0)
    rep = paralin_residual(flat, None, "DN",
                           config=EllipticSolveConfig(n_z=96, tol=1e-10))
    assert max(rep.residual_norms) < 1e-9


def test_curvature_residual_quadratic(grid):
    eta = Interface(SpectralField.from_function(
        grid, lambda x: 0.3 * np.cos(8 * x)), 3.0)
    rep = paralin_residual(eta, None, "curvature")
    assert rep.fitted_order >= 1.9


def test_residual_csv(tmp_path, grid):
    eta = Interface(SpectralField.from_function(
        grid, lambda x: 0.1 * np.cos(x)), 3.0)
    rep = paralin_residual(eta, None, "DN",
                           config=EllipticSolveConfig(n_z=48, tol=1e-10))
    path = tmp_path / "res.csv"
    rep.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "probe,residual_norm,fitted_order"
    assert len(lines) == 1 + len(rep.probes)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 5), st.floats(0.05, 0.3))
def test_paradiff_real_output(k, amp):
    grid = PeriodicGrid(64)
    cut = CutoffPair()
    a = ParaSymbol.from_function(
        grid, lambda x, xi: (1 + amp * np.cos(k * x)) * np.abs(xi),
        1.0, 3.0)
    u = SpectralField.from_function(grid, lambda x: np.sin(5 * x))
    out = paradiff_apply(a, u, cut)
    assert np.all(np.isfinite(out.values))

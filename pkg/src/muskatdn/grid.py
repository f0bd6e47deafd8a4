"""Periodic grid, Fourier-side field representation, multipliers and norms.

Conventions fixed here and used everywhere else:

* nodes ``x_j = j * length / n``, ``j = 0 .. n-1``;
* coefficients are Fourier-series coefficients, ``f(x) = sum_k fhat_k
  exp(i xi_k x)`` with ``xi_k = 2 pi k / length`` and integer ``k`` in the
  usual FFT layout, so ``fhat = fft(values) / n``;
* ``|f|_{H^sigma}^2 = length * sum_k <xi_k>^{2 sigma} |fhat_k|^2`` which
  coincides with the continuum L^2 norm at sigma = 0 by Parseval;
* pointwise products of spectral fields are dealiased by 2/3-rule
  zero padding.
"""
from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from .errors import MultiplierSymmetryError, ValidationError

__all__ = [
    "PeriodicGrid",
    "SpectralField",
    "apply_multiplier",
    "sobolev_norm",
    "smoothing_semigroup",
    "dealiased_product",
    "pointwise_nonlinearity",
    "l2_inner",
]


@dataclasses.dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on [0, length)."""

    n_points: int
    length: float = 2.0 * np.pi

    def __post_init__(self):
        if self.n_points < 8 or self.n_points % 2 != 0:
            raise ValidationError("n_points must be even and >= 8")
        if not self.length > 0:
            raise ValidationError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT layout (0, 1, ..., -1)."""
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)

    @property
    def xi(self) -> np.ndarray:
        """Physical wavenumbers 2 pi k / length in FFT layout."""
        return 2.0 * np.pi * self.wavenumbers / self.length

    def bracket(self) -> np.ndarray:
        """<xi> = sqrt(1 + xi^2) in FFT layout."""
        return np.sqrt(1.0 + self.xi**2)


def _check_hermitian(m: np.ndarray, n: int, tol: float = 1e-12) -> bool:
    # m in FFT layout; Hermitian symmetry m[-k] == conj(m[k]) plus real
    # entries at k = 0 and the Nyquist mode.
    scale = max(1.0, float(np.max(np.abs(m))))
    rev = np.conj(m[(-np.arange(n)) % n])
    return bool(np.max(np.abs(m - rev)) <= tol * scale)


class SpectralField:
    """Real periodic function held as grid samples and Fourier coefficients.

    Immutable after construction; values and coefficients agree under the
    DFT to ~1e-12 relative by construction.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: PeriodicGrid, values: np.ndarray,
                 _coeffs: np.ndarray | None = None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_points,):
            raise ValidationError(
                f"values shape {values.shape} does not match grid "
                f"({grid.n_points},)")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self._values = values
        self._coeffs = _coeffs

    # -- constructors -------------------------------------------------
    @classmethod
    def from_values(cls, grid: PeriodicGrid, values) -> "SpectralField":
        return cls(grid, values)

    @classmethod
    def from_coefficients(cls, grid: PeriodicGrid, coeffs) -> "SpectralField":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (grid.n_points,):
            raise ValidationError("coefficient array has wrong length")
        if not _check_hermitian(coeffs, grid.n_points, tol=1e-10):
            raise MultiplierSymmetryError(
                "coefficients violate conjugate symmetry; field not real")
        values = np.fft.ifft(coeffs * grid.n_points).real
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        return cls(grid, values, _coeffs=coeffs)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn) -> "SpectralField":
        return cls(grid, fn(grid.nodes))

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.n_points))

    @classmethod
    def constant(cls, grid: PeriodicGrid, c: float) -> "SpectralField":
        return cls(grid, np.full(grid.n_points, float(c)))

    # -- representation -----------------------------------------------
    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def coefficients(self) -> np.ndarray:
        if self._coeffs is None:
            c = np.fft.fft(self._values) / self.grid.n_points
            c.setflags(write=False)
            self._coeffs = c
        return self._coeffs

    def mean(self) -> float:
        return float(np.mean(self._values))

    # -- calculus -----------------------------------------------------
    def derivative(self, order: int = 1) -> "SpectralField":
        m = (1j * self.grid.xi) ** order
        if order % 2 == 1:
            # zero the (unpaired) Nyquist mode so the result stays real
            m[self.grid.n_points // 2] = 0.0
        return SpectralField.from_coefficients(self.grid, m * self.coefficients)

    # -- algebra (linear operations stay on the grid) ------------------
    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._require_same_grid(other)
            return SpectralField(self.grid, self._values + other._values)
        return SpectralField(self.grid, self._values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._require_same_grid(other)
            return SpectralField(self.grid, self._values - other._values)
        return SpectralField(self.grid, self._values - float(other))

    def __rsub__(self, other):
        return SpectralField(self.grid, float(other) - self._values)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self._values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self._values)

    def _require_same_grid(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValidationError("fields live on different grids")

    def __repr__(self):
        return (f"SpectralField(n={self.grid.n_points}, "
                f"L={self.grid.length:.6g})")


# ---------------------------------------------------------------------
# multipliers and norms
# ---------------------------------------------------------------------

def _multiplier_array(m, grid: PeriodicGrid) -> np.ndarray:
    if callable(m):
        arr = np.asarray(m(grid.xi), dtype=complex)
        if arr.shape == ():
            arr = np.full(grid.n_points, complex(arr))
    else:
        arr = np.asarray(m, dtype=complex)
    if arr.shape != (grid.n_points,):
        raise ValidationError("multiplier has wrong length for grid")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("multiplier not finite at a represented mode")
    return arr


def apply_multiplier(m, f: SpectralField, require_real: bool = True):
    """Apply a Fourier multiplier m(xi) to f.

    ``m`` is a callable evaluated on the physical wavenumbers (FFT layout)
    or a precomputed array in the same layout.  With ``require_real`` a
    non-Hermitian multiplier raises; otherwise the complex grid samples
    are returned as a plain ndarray.
    """
    arr = _multiplier_array(m, f.grid)
    out = arr * f.coefficients
    if require_real:
        if not _check_hermitian(arr, f.grid.n_points):
            raise MultiplierSymmetryError(
                "multiplier is not Hermitian; real output impossible")
        return SpectralField(f.grid, np.fft.ifft(out * f.grid.n_points).real)
    return np.fft.ifft(out * f.grid.n_points)


def sobolev_norm(f: SpectralField, sigma: float) -> float:
    """H^sigma norm, length * sum <xi>^{2 sigma} |fhat|^2, square-rooted."""
    w = f.grid.bracket() ** (2.0 * sigma)
    return float(np.sqrt(f.grid.length * np.sum(w * np.abs(f.coefficients) ** 2)))


def smoothing_semigroup(tau: float, zeta: float, f: SpectralField) -> SpectralField:
    """exp(-tau |zeta| <D>) f; forward (tau >= 0) only."""
    if tau < 0:
        raise ValidationError("smoothing semigroup requires tau >= 0")
    damp = np.exp(-tau * abs(zeta) * f.grid.bracket())
    return SpectralField.from_coefficients(f.grid, damp * f.coefficients)


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 inner product (length/n) sum f_j g_j."""
    f._require_same_grid(g)
    return float(f.grid.dx * np.dot(f.values, g.values))


# ---------------------------------------------------------------------
# dealiased products
# ---------------------------------------------------------------------

def _pad_factor(n: int, factor: float) -> int:
    m = int(np.ceil(n * factor))
    return m + (m % 2)


def resample_values(f: SpectralField, m: int) -> np.ndarray:
    """Spectrally interpolate f onto an m-point grid (m >= n)."""
    n = f.grid.n_points
    if m == n:
        return np.array(f.values)
    c = np.zeros(m, dtype=complex)
    half = n // 2
    fc = f.coefficients
    c[: half] = fc[: half]
    c[m - half:] = fc[half:]
    # split the Nyquist coefficient symmetrically
    c[half] = 0.5 * fc[half]
    c[m - half] += 0.5 * fc[half]
    return np.fft.ifft(c * m).real


def _truncate_to(values: np.ndarray, grid: PeriodicGrid) -> SpectralField:
    m = values.shape[0]
    n = grid.n_points
    if m == n:
        return SpectralField(grid, values)
    c = np.fft.fft(values) / m
    half = n // 2
    out = np.zeros(n, dtype=complex)
    out[: half] = c[: half]
    out[half + 1:] = c[m - half + 1:]
    out[half] = c[half] + c[m - half]
    return SpectralField.from_coefficients(grid, out)


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product computed with 2/3-rule zero padding."""
    f._require_same_grid(g)
    m = _pad_factor(f.grid.n_points, 1.5)
    return _truncate_to(resample_values(f, m) * resample_values(g, m), f.grid)


def pointwise_nonlinearity(fn: Callable[..., np.ndarray],
                           *fields: SpectralField,
                           refine: int = 2) -> SpectralField:
    """Evaluate fn pointwise on a refined grid, then truncate spectrally.

    Used for non-polynomial nonlinearities such as (1 + eta_x^2)^{-1/2};
    the refinement suppresses aliasing the plain 2/3 rule cannot remove.
    """
    grid = fields[0].grid
    m = refine * grid.n_points
    vals = fn(*[resample_values(f, m) for f in fields])
    return _truncate_to(np.asarray(vals, dtype=float), grid)

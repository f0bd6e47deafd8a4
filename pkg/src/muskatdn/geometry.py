"""Interface-borne geometry: curvature, principal symbols, separation,
and the strip-flattening diffeomorphism with its Jacobian safeguard."""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import FlatteningError, SeparationError, ValidationError
from .grid import (PeriodicGrid, SpectralField, pointwise_nonlinearity,
                   sobolev_norm)

__all__ = [
    "Interface",
    "Boundary",
    "DomainSpec",
    "FlatteningMap",
    "curvature",
    "symbol_lambda",
    "symbol_l",
    "separation",
    "build_flattening",
]


@dataclasses.dataclass(frozen=True)
class Interface:
    """Graph interface y = eta(x); regularity_tag is bookkeeping only."""

    height: SpectralField
    regularity_tag: float = 3.0

    @property
    def grid(self) -> PeriodicGrid:
        return self.height.grid

    @classmethod
    def flat(cls, grid: PeriodicGrid, s: float = 3.0) -> "Interface":
        return cls(SpectralField.zero(grid), s)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn, s: float = 3.0) -> "Interface":
        return cls(SpectralField.from_function(grid, fn), s)

    def slope(self) -> SpectralField:
        return self.height.derivative()


@dataclasses.dataclass(frozen=True)
class Boundary:
    """One rigid boundary: flat at a given distance, absent, or vacuum."""

    kind: str  # "flat" | "infinite" | "vacuum"
    depth: float | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "infinite", "vacuum"):
            raise ValidationError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "flat":
            if self.depth is None or not self.depth > 0:
                raise ValidationError("flat boundary needs a positive depth")
        elif self.depth is not None:
            raise ValidationError(f"{self.kind} boundary takes no depth")

    @classmethod
    def flat_at(cls, depth: float) -> "Boundary":
        return cls("flat", float(depth))

    @classmethod
    def infinite(cls) -> "Boundary":
        return cls("infinite")

    @classmethod
    def vacuum(cls) -> "Boundary":
        return cls("vacuum")


@dataclasses.dataclass(frozen=True)
class DomainSpec:
    """Bottom/top configuration and the separation threshold h."""

    bottom: Boundary
    top: Boundary
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError("separation threshold h must be positive")
        if self.bottom.kind == "vacuum":
            raise ValidationError("bottom boundary cannot be vacuum")

    @classmethod
    def one_phase(cls, bottom: Boundary | None = None, h: float = 0.5) -> "DomainSpec":
        return cls(bottom or Boundary.infinite(), Boundary.vacuum(), h)

    @classmethod
    def two_phase(cls, bottom: Boundary, top: Boundary, h: float = 0.5) -> "DomainSpec":
        return cls(bottom, top, h)

    def check_separation(self, eta: Interface) -> None:
        if separation(eta, self) <= self.h:
            raise SeparationError(
                f"interface within separation threshold h={self.h}")


def separation(eta: Interface, dom: DomainSpec) -> float:
    """Minimum vertical distance from eta to the present rigid boundaries."""
    vals = eta.height.values
    dists = []
    if dom.bottom.kind == "flat":
        dists.append(float(np.min(vals)) + dom.bottom.depth)
    if dom.top.kind == "flat":
        dists.append(dom.top.depth - float(np.max(vals)))
    return min(dists) if dists else np.inf


# ---------------------------------------------------------------------
# curvature and symbols
# ---------------------------------------------------------------------

def curvature(eta: Interface) -> SpectralField:
    """H(eta) = -d/dx (eta_x / sqrt(1 + eta_x^2)); exact zero mean."""
    slope = eta.slope()
    flux = pointwise_nonlinearity(lambda p: p / np.sqrt(1.0 + p * p), slope)
    return -flux.derivative()


def symbol_lambda(eta: Interface, xi: float) -> SpectralField:
    """Principal DN symbol; in d = 1 it collapses to the constant |xi|."""
    slope = eta.slope()
    vals = np.sqrt((1.0 + slope.values**2) * xi**2 - (slope.values * xi) ** 2)
    return SpectralField(eta.grid, vals)


def symbol_l(eta: Interface, xi: float) -> SpectralField:
    """Curvature principal symbol <eta_x>^{-3} lambda^2."""
    lam = symbol_lambda(eta, xi)
    slope = eta.slope()
    vals = (1.0 + slope.values**2) ** (-1.5) * lam.values**2
    return SpectralField(eta.grid, vals)


# ---------------------------------------------------------------------
# flattening diffeomorphism
# ---------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class FlatteningMap:
    """Samples of rho(x, z) on a lower strip z in [-1, 0].

    rho(x, 0) = eta(x), rho(x, -1) = the flat outer boundary, and the
    Jacobian bound dz_rho >= h/12 is verified on the sample grid at
    construction time.
    """

    tau: float
    z_levels: np.ndarray          # shape (n_z+1,), -1 = z_levels[0] .. 0
    rho: np.ndarray               # shape (n_z+1, n), rho at levels
    rho_half: np.ndarray          # shape (n_z, n), rho at half levels
    rho_x_half: np.ndarray        # d_x rho at half levels
    dz_rho_half: np.ndarray       # d_z rho at half levels (analytic)
    dz_rho_levels: np.ndarray     # d_z rho at levels (analytic, one-sided at 0)
    floor: float                  # the h/12 bound that was enforced

    @property
    def n_z(self) -> int:
        return self.z_levels.shape[0] - 1

    def min_jacobian(self) -> float:
        return float(min(self.dz_rho_half.min(), self.dz_rho_levels.min()))


def _rho_eval(eta: SpectralField, tau: float, z: np.ndarray,
              eta_lo: float, eta_hi: float):
    """Evaluate rho, d_x rho, d_z rho at the given z samples (z <= 0).

    rho(x,z) = (1-z^2) e^{-tau |z| <D>} eta - z(1-z)/2 eta_lo
               + z(1+z)/2 eta_hi.
    """
    grid = eta.grid
    bracket = grid.bracket()
    xi = grid.xi
    coeff = eta.coefficients
    z = np.asarray(z, dtype=float)[:, None]
    damp = np.exp(-tau * np.abs(z) * bracket[None, :])
    smooth_c = damp * coeff[None, :]
    smooth = np.fft.ifft(smooth_c * grid.n_points, axis=1).real
    dx_c = (1j * xi)[None, :] * smooth_c
    dx_c[:, grid.n_points // 2] = 0.0
    smooth_x = np.fft.ifft(dx_c * grid.n_points, axis=1).real
    # d/dz of e^{-tau|z|<D>} for z <= 0 (one-sided at 0) is +tau <D> e^{...}
    dz_sm_c = tau * bracket[None, :] * smooth_c
    smooth_z = np.fft.ifft(dz_sm_c * grid.n_points, axis=1).real

    w = 1.0 - z**2
    rho = w * smooth - 0.5 * z * (1.0 - z) * eta_lo + 0.5 * z * (1.0 + z) * eta_hi
    rho_x = w * smooth_x
    dz_rho = (-2.0 * z) * smooth + w * smooth_z \
        - 0.5 * (1.0 - 2.0 * z) * eta_lo + 0.5 * (1.0 + 2.0 * z) * eta_hi
    return rho, rho_x, dz_rho


def build_flattening(eta: Interface, dom: DomainSpec, tau: float | None = None,
                     n_z: int = 64, z_levels: np.ndarray | None = None,
                     outer_depth: float | None = None,
                     max_retries: int = 40,
                     calibration: float = 1.0) -> FlatteningMap:
    """Construct the lower-strip flattening with the Jacobian safeguard.

    The initial tau is h / (12 * calibration * |eta|_{H^s}); whenever the
    sampled Jacobian drops below h/12, tau is halved and the map rebuilt,
    up to ``max_retries`` times.
    """
    dom.check_separation(eta)
    if outer_depth is None:
        if dom.bottom.kind != "flat":
            raise ValidationError(
                "outer_depth required for an infinite bottom boundary")
        outer_depth = dom.bottom.depth
    if z_levels is None:
        z_levels = np.linspace(-1.0, 0.0, n_z + 1)
    else:
        z_levels = np.asarray(z_levels, dtype=float)
        if z_levels[0] != -1.0 or z_levels[-1] != 0.0 or \
                np.any(np.diff(z_levels) <= 0):
            raise ValidationError("z_levels must increase from -1 to 0")
    z_half = 0.5 * (z_levels[:-1] + z_levels[1:])

    eta_lo = -float(outer_depth)
    eta_hi = 2.0 * eta.height.mean() - eta_lo  # flat upper reference
    floor = dom.h / 12.0

    if tau is None:
        hs = sobolev_norm(eta.height, eta.regularity_tag)
        tau = floor / (calibration * hs) if hs > 0 else 1.0
    tau = float(tau)
    if not tau > 0:
        raise ValidationError("tau must be positive")

    for _ in range(max_retries + 1):
        rho_l, _, dz_l = _rho_eval(eta.height, tau, z_levels, eta_lo, eta_hi)
        rho_h, rho_x_h, dz_h = _rho_eval(eta.height, tau, z_half, eta_lo, eta_hi)
        if min(dz_l.min(), dz_h.min()) >= floor:
            return FlatteningMap(tau=tau, z_levels=z_levels, rho=rho_l,
                                 rho_half=rho_h, rho_x_half=rho_x_h,
                                 dz_rho_half=dz_h, dz_rho_levels=dz_l,
                                 floor=floor)
        tau *= 0.5
    raise FlatteningError(
        "Jacobian bound dz_rho >= h/12 unattainable: the smallness "
        "condition tau K |eta|_{H^s} <= h/12 cannot be met by shrinking tau")


def stretched_z_levels(n_z: int, gamma: float = 4.0) -> np.ndarray:
    """z levels on [-1, 0] geometrically clustered near the interface.

    Used for deep (artificial-depth) strips so the near-interface physical
    spacing stays fine while the strip covers many wavelengths.
    """
    u = np.linspace(0.0, 1.0, n_z + 1)
    levels = -(np.exp(gamma * (1.0 - u)) - 1.0) / (np.exp(gamma) - 1.0)
    levels[0] = -1.0
    levels[-1] = 0.0
    return levels

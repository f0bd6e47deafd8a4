"""Evolution right-hand side and stability functionals for the Muskat flow:
the interface velocity operators, the Rayleigh-Taylor field, and
d_t eta = -L(eta)(g_jump eta + s H(eta)) / (mu+ + mu-)."""
from __future__ import annotations

import dataclasses

import numpy as np

from .elliptic import DNOperator, EllipticSolveConfig, operator_L, solve_two_phase
from .errors import ValidationError
from .geometry import DomainSpec, Interface, curvature
from .grid import SpectralField, dealiased_product, pointwise_nonlinearity

__all__ = [
    "FluidParams",
    "MuskatOperators",
    "operator_B",
    "operator_V",
    "rayleigh_taylor",
    "evolution_rhs",
]


@dataclasses.dataclass(frozen=True)
class FluidParams:
    """Viscosities, densities, gravity and surface tension.

    One-phase means the top fluid is vacuum: mu+ = rho+ = 0.  Only the
    stable regime rho- > rho+ is admitted.
    """

    mu_minus: float
    mu_plus: float = 0.0
    rho_minus: float = 1.0
    rho_plus: float = 0.0
    g: float = 1.0
    surface_tension: float = 0.0

    def __post_init__(self):
        if not self.mu_minus > 0:
            raise ValidationError("mu- must be positive")
        if self.mu_plus < 0 or self.rho_plus < 0:
            raise ValidationError("mu+ and rho+ must be nonnegative")
        if not self.rho_minus > self.rho_plus:
            raise ValidationError(
                "stable regime requires rho- > rho+ (denser fluid below)")
        if not self.g > 0:
            raise ValidationError("g must be positive")
        if self.surface_tension < 0:
            raise ValidationError("surface tension must be nonnegative")
        if (self.mu_plus == 0.0) != (self.rho_plus == 0.0):
            raise ValidationError(
                "one-phase setup requires mu+ = rho+ = 0 jointly")

    @property
    def is_one_phase(self) -> bool:
        return self.mu_plus == 0.0

    @property
    def gravity_jump(self) -> float:
        """g_jump = g (rho- - rho+); equals g rho- in the one-phase case."""
        return self.g * (self.rho_minus - self.rho_plus)

    def with_surface_tension(self, s: float) -> "FluidParams":
        return dataclasses.replace(self, surface_tension=float(s))


class MuskatOperators:
    """All interface operators for one fixed eta, sharing the DN solves."""

    def __init__(self, eta: Interface, params: FluidParams, dom: DomainSpec,
                 config: EllipticSolveConfig | None = None):
        if params.is_one_phase and dom.top.kind != "vacuum":
            raise ValidationError("one-phase parameters need a vacuum top")
        if not params.is_one_phase and dom.top.kind == "vacuum":
            raise ValidationError("two-phase parameters need a fluid top side")
        dom.check_separation(eta)
        self.eta = eta
        self.params = params
        self.dom = dom
        self.config = config or EllipticSolveConfig()
        self._slope = eta.slope()
        self._prefactor = pointwise_nonlinearity(
            lambda p: 1.0 / (1.0 + p * p), self._slope)
        self._g = {}

    def dn(self, side: str) -> DNOperator:
        if side not in self._g:
            self._g[side] = DNOperator(self.eta, side, self.dom, self.config)
        return self._g[side]

    def g_apply(self, f: SpectralField, side: str) -> SpectralField:
        """G^-(eta) f or G^+(eta) f (the latter carries its minus sign)."""
        return self.dn("lower" if side == "-" else "upper").apply(f)

    def B(self, f: SpectralField, side: str) -> SpectralField:
        """<eta_x>^{-2} (eta_x f_x + G f); the trace of d_y phi."""
        self._check_side(side)
        inner = dealiased_product(self._slope, f.derivative()) \
            + self.g_apply(f, side)
        return dealiased_product(self._prefactor, inner)

    def V(self, f: SpectralField, side: str) -> SpectralField:
        """f_x - eta_x B f; the trace of d_x phi."""
        self._check_side(side)
        return f.derivative() - dealiased_product(self._slope, self.B(f, side))

    def two_phase_split(self, v: SpectralField):
        if self.params.is_one_phase:
            return v, SpectralField.zero(v.grid)
        return solve_two_phase(self.eta, v, self.params, self.dom, self.config,
                               operators=(self.dn("lower"), self.dn("upper")))

    def L(self, f: SpectralField, formula: str = "symmetric") -> SpectralField:
        ops = (self.dn("lower"),
               self.dn("upper") if not self.params.is_one_phase else None)
        return operator_L(self.eta, f, self.params, self.dom, self.config,
                          operators=ops, formula=formula)

    def rayleigh_taylor(self) -> SpectralField:
        """RT(eta) = 1 - (B- J- eta - B+ J+ eta); infimum is the monitor."""
        f_minus, f_plus = self.two_phase_split(self.eta.height)
        rt = 1.0 - self.B(f_minus, "-")
        if not self.params.is_one_phase:
            rt = rt + self.B(f_plus, "+")
        return rt

    def rt_infimum(self) -> float:
        return float(np.min(self.rayleigh_taylor().values))

    def driving_pressure(self) -> SpectralField:
        """g_jump eta + s H(eta)."""
        p = self.params
        out = p.gravity_jump * self.eta.height
        if p.surface_tension > 0:
            out = out + p.surface_tension * curvature(self.eta)
        return out

    def rhs(self) -> SpectralField:
        """-(1/(mu+ + mu-)) L(eta)(g_jump eta + s H(eta))."""
        scale = -1.0 / (self.params.mu_plus + self.params.mu_minus)
        return scale * self.L(self.driving_pressure())

    def _check_side(self, side: str):
        if side not in ("-", "+"):
            raise ValidationError("side must be '-' or '+'")
        if side == "+" and self.params.is_one_phase:
            raise ValidationError("no '+' side operators in a one-phase setup")


# functional wrappers matching the operator names used in the tests

def operator_B(eta, f, side, params, dom, config=None):
    return MuskatOperators(eta, params, dom, config).B(f, side)


def operator_V(eta, f, side, params, dom, config=None):
    return MuskatOperators(eta, params, dom, config).V(f, side)


def rayleigh_taylor(eta, params, dom, config=None):
    return MuskatOperators(eta, params, dom, config).rayleigh_taylor()


def evolution_rhs(eta, params, dom, config=None):
    return MuskatOperators(eta, params, dom, config).rhs()

"""Pseudospectral simulator for the Muskat problem in the
Dirichlet-Neumann formulation, with and without surface tension."""

from .grid import (PeriodicGrid, SpectralField, apply_multiplier,
                   dealiased_product, l2_inner, pointwise_nonlinearity,
                   smoothing_semigroup, sobolev_norm)
from .geometry import (Boundary, DomainSpec, FlatteningMap, Interface,
                       build_flattening, curvature, separation, symbol_l,
                       symbol_lambda)
from .elliptic import (DNOperator, EllipticSolveConfig, dn_apply,
                       flat_dn_multiplier, operator_L, solve_two_phase,
                       theta_lift)
from .dynamics import (FluidParams, MuskatOperators, evolution_rhs,
                       operator_B, operator_V, rayleigh_taylor)
from .timestepping import (SimConfig, SimState, TimeSeries, imex_step,
                           integrate, linear_symbol)
from .paracalc import (CutoffPair, ParaSymbol, garding_check,
                       operator_order_fit, paradiff_apply, paralin_residual)
from .config import RunConfig, parse_config
from .rates import (ConvergenceReport, RateFit, SweepRow, emit_report,
                    fit_rate, parse_sweep_csv, run_convergence_sweep)

__version__ = "0.1.0"

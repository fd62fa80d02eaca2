"""Fractional gradients, H^{s,p} energies and their p-Laplace equation on the flat torus."""

__version__ = "0.1.0"

from .errors import FracGradError, NumericalError, ValidationError
from .grid import DomainMasks, GridSpec, ScalarField, VectorField, box_masks, field_from_function, lp_norm
from .spectral import frac_divergence, frac_gradient, frac_laplacian, riesz_potential
from .energy import FracParams, first_variation, hsp_seminorm, p_energy
from .solver import Problem, SolverConfig, solve, solve_linear_p2

__all__ = [
    "FracGradError",
    "NumericalError",
    "ValidationError",
    "DomainMasks",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "box_masks",
    "field_from_function",
    "lp_norm",
    "frac_divergence",
    "frac_gradient",
    "frac_laplacian",
    "riesz_potential",
    "FracParams",
    "first_variation",
    "hsp_seminorm",
    "p_energy",
    "Problem",
    "SolverConfig",
    "solve",
    "solve_linear_p2",
]

"""The ``H^{s,p}`` seminorm, its p-energy, first variation and Euler-Lagrange operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import DomainMasks, ScalarField, VectorField, lp_norm
from .spectral import frac_divergence, frac_gradient

__all__ = [
    "FracParams",
    "FluxRule",
    "hsp_seminorm",
    "p_energy",
    "first_variation",
    "hsp_laplacian_strong",
    "energy_gradient",
]


@dataclass(frozen=True)
class FracParams:
    """Differentiability ``s``, growth exponent ``p`` and flux regularisation ``eps_reg``."""

    s: float
    p: float
    eps_reg: float = 0.0

    def __post_init__(self):
        if not 0 < self.s <= 1:
            raise ValidationError(f"s must lie in (0, 1], got {self.s}")
        if not self.p > 1:
            raise ValidationError(f"p must exceed 1, got {self.p}")
        if not self.eps_reg >= 0:
            raise ValidationError(f"eps_reg must be >= 0, got {self.eps_reg}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "eps_reg", float(self.eps_reg))

    def check_regularity_range(self, d: int) -> None:
        """Reject ``p`` outside ``(2 - 1/d, inf)``, where the regularity result applies."""
        if not self.p > 2 - 1 / d:
            raise ValidationError(
                f"p={self.p} lies outside the regularity range (2 - 1/d, inf) for d={d}"
            )

    @property
    def flux(self) -> "FluxRule":
        return FluxRule(self.p, self.eps_reg)


@dataclass(frozen=True)
class FluxRule:
    """Pointwise map ``g -> (|g|^2 + eps^2)^((p-2)/2) g``."""

    p: float
    eps_reg: float = 0.0

    def __post_init__(self):
        if self.eps_reg == 0 and self.p < 2:
            raise ValidationError("p < 2 needs eps_reg > 0: the flux is singular at g = 0")

    def __call__(self, g: VectorField) -> VectorField:
        a = g.stack()
        sq = np.sum(a**2, axis=0)
        e = self.p - 2
        if self.eps_reg > 0:
            w = (sq + self.eps_reg**2) ** (e / 2)
        elif e == 0:
            w = np.ones_like(sq)
        else:
            w = sq ** (e / 2)
        return VectorField.from_array(g.spec, a * w)

    def density(self, g: VectorField) -> np.ndarray:
        """``((|g|^2 + eps^2)^(p/2) - eps^p) / p``, evaluated without cancellation."""
        sq = np.sum(g.stack() ** 2, axis=0)
        p, eps = self.p, self.eps_reg
        if eps == 0:
            return sq ** (p / 2) / p
        return eps**p * np.expm1(0.5 * p * np.log1p(sq / eps**2)) / p


def _vec_inner(a: VectorField, b: VectorField) -> float:
    return float(a.spec.cell_volume * np.sum(a.stack() * b.stack()))


def hsp_seminorm(u: ScalarField, s: float, p: float) -> float:
    """``L^p`` norm of ``|D^s u|``."""
    if not p >= 1:
        raise ValidationError(f"p must be >= 1, got {p}")
    return lp_norm(frac_gradient(u, s).magnitude(), p)


def p_energy(u: ScalarField, params: FracParams) -> float:
    """``(1/p) int (|D^s u|^2 + eps^2)^(p/2) - eps^p``; zero on constants."""
    g = frac_gradient(u, params.s)
    return float(u.spec.cell_volume * np.sum(params.flux.density(g)))


def first_variation(u: ScalarField, phi: ScalarField, params: FracParams) -> float:
    """``int flux(D^s u) . D^s phi``, the derivative of :func:`p_energy` along ``phi``."""
    flux = params.flux(frac_gradient(u, params.s))
    return _vec_inner(flux, frac_gradient(phi, params.s))


def hsp_laplacian_strong(u: ScalarField, params: FracParams) -> ScalarField:
    """``div_s(flux(D^s u))``."""
    flux = params.flux(frac_gradient(u, params.s))
    return frac_divergence(flux, params.s)


def energy_gradient(u: ScalarField, params: FracParams, masks: DomainMasks) -> ScalarField:
    """L^2 gradient of :func:`p_energy` with respect to the values inside ``omega``."""
    g = -hsp_laplacian_strong(u, params).values
    return ScalarField(u.spec, np.where(masks.omega, g, 0.0))


"""Lifting fractional solutions to a classical p-Laplace equation.

For ``v = I_{1-s} u`` the classical gradient of ``v`` is exactly ``D^s u``,
so the weak fractional equation for ``u`` is a classical p-Laplace equation
for ``v`` tested with ``D^s phi``.  This module measures the three numerical
consequences of that identity:

* ``mu = -div(|Dv|^{p-2} Dv)`` stays bounded on ``omega1`` under refinement
  (contrasted with an oscillatory control field whose ``mu`` blows up);
* the commutator operator ``T(phi) = D^s(eta^c (-Delta)^{(1-s)/2} phi)``
  maps ``L^1`` to ``L^p`` with a resolution-stable ratio;
* the off-diagonal kernel ``k(x, y) = D^s_x [eta^c(x) zeta(y) / |x-y|^{d+1-s}]``
  has finite Schur integrals that grow as ``omega1`` approaches
  ``omega2``'s boundary.

The kernel exponent is read as ``d + 1 - s``, the dimension of the Riesz
kernel of order ``1 - s``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lattice
from .energy import FluxRule, FracParams, first_variation
from .errors import ValidationError
from .grid import (
    DomainMasks,
    GridSpec,
    ScalarField,
    VectorField,
    distance_to_set,
    lp_norm,
    masked_sup,
    set_distance,
)
from .solver import Problem, SolverConfig, solve
from .spectral import (
    classical_divergence,
    classical_gradient,
    frac_gradient,
    frac_laplacian,
    riesz_potential,
)

log = logging.getLogger(__name__)

__all__ = [
    "CutoffPair",
    "GridRecord",
    "KernelReport",
    "ReductionReport",
    "lift",
    "classical_p_laplacian",
    "reduction_identity_check",
    "smoothstep",
    "build_cutoffs",
    "bump_in",
    "test_transform",
    "random_test_functions",
    "kernel_bound_report",
    "control_field",
    "mu_boundedness_report",
]


def lift(u: ScalarField, s: float) -> ScalarField:
    """``v = I_{1-s} u``; the identity at ``s = 1``."""
    if not 0 < s <= 1:
        raise ValidationError(f"s must lie in (0, 1], got {s}")
    if s == 1:
        return u
    return riesz_potential(u, 1.0 - s)


def classical_p_laplacian(v: ScalarField, p: float, eps_reg: float = 0.0) -> ScalarField:
    """``mu = -div(flux(grad v))`` with spectral derivatives."""
    flux = FluxRule(p, eps_reg)(classical_gradient(v))
    return -classical_divergence(flux)


def reduction_identity_check(
    u: ScalarField, s: float, p: float, phi: ScalarField, eps_reg: float = 0.0
) -> float:
    """``|<flux(D lift(u)), D^s phi> - <flux(D^s u), D^s phi>|``.

    Zero in exact arithmetic; the value measures how far the discrete
    composition identity is from exact.
    """
    params = FracParams(s, p, eps_reg)
    dv = classical_gradient(lift(u, s))
    lhs = float(phi.spec.cell_volume * np.sum(params.flux(dv).stack() * frac_gradient(phi, s).stack()))
    return abs(lhs - first_variation(u, phi, params))


# ---------------------------------------------------------------- cutoffs


def smoothstep(t):
    """C^2 quintic ramp: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t**2)


@dataclass(frozen=True, eq=False)
class CutoffPair:
    """``eta`` (1 on omega2, supported in omega), ``eta_c = 1 - eta`` and ``zeta``
    (1 on omega1, supported in omega2)."""

    masks: DomainMasks
    eta: ScalarField
    eta_c: ScalarField
    zeta: ScalarField
    smoothness_width: float

    def support_gap(self) -> float:
        """Lattice distance between the supports of ``eta_c`` and ``zeta``."""
        return set_distance(self.masks.spec, self.eta_c.values > 0, self.zeta.values > 0)


def build_cutoffs(masks: DomainMasks, width: float) -> CutoffPair:
    """Mollify the indicator of omega inward (eta) and of omega1 outward (zeta)."""
    spec = masks.spec
    if not width > 0:
        raise ValidationError("cutoff width must be positive")
    if width > masks.separation / 2 * (1 + 1e-12):
        raise ValidationError(
            f"cutoff width {width} exceeds half the mask separation {masks.separation}"
        )
    to_out = distance_to_set(spec, ~masks.omega)
    eta = np.where(np.isinf(to_out), 1.0, smoothstep(to_out / width))
    zeta = 1.0 - smoothstep(distance_to_set(spec, masks.omega1) / width)
    eta_f = ScalarField(spec, eta)
    return CutoffPair(masks, eta_f, ScalarField(spec, 1.0 - eta), ScalarField(spec, zeta), width)


def bump_in(mask: np.ndarray, spec: GridSpec, width: float) -> ScalarField:
    """Smooth window equal to 1 deeper than ``width`` inside ``mask`` and 0 outside it."""
    dist = distance_to_set(spec, ~np.asarray(mask, dtype=bool))
    return ScalarField(spec, np.where(np.isinf(dist), 1.0, smoothstep(dist / width)))


# ---------------------------------------------------------------- T(phi)


def _check_support(phi: ScalarField, mask: np.ndarray, what: str) -> None:
    outside = np.abs(phi.values[~mask])
    if outside.size and outside.max() > 0:
        raise ValidationError(f"test function is not supported in {what}")


def test_transform(phi: ScalarField, s: float, cut: CutoffPair) -> VectorField:
    """``T(phi) = D^s(eta^c (-Delta)^{(1-s)/2} phi)`` for ``phi`` supported in omega1."""
    _check_support(phi, cut.masks.omega1, "omega1")
    inner_f = phi if s == 1 else frac_laplacian(phi, 1.0 - s)
    return frac_gradient(cut.eta_c * inner_f, s)


# pytest must not collect the operator above as a test
test_transform.__test__ = False


def random_test_functions(
    masks: DomainMasks, count: int, seed: int, kmax: int = 6, width: float | None = None
) -> list[ScalarField]:
    """Band-limited random fields windowed into omega1.

    The coefficients depend only on ``seed`` and ``kmax``, so the same
    continuous functions are sampled on every grid.
    """
    spec = masks.spec
    width = width if width is not None else masks.sep_inner / 2
    window = bump_in(masks.omega1, spec, width).values
    rng = np.random.default_rng(seed)
    ks = np.array(
        [k for k in np.ndindex(*([2 * kmax + 1] * spec.d))], dtype=np.float64
    ) - kmax
    coords = spec.coords()
    out = []
    for _ in range(count):
        a = rng.standard_normal(len(ks))
        b = rng.standard_normal(len(ks))
        field = np.zeros(spec.shape)
        for k, ak, bk in zip(ks, a, b):
            ph = 2 * np.pi * sum(kj * c for kj, c in zip(k, coords)) / spec.L
            field += ak * np.cos(ph) + bk * np.sin(ph)
        out.append(ScalarField(spec, field * window))
    return out


# ---------------------------------------------------------------- reports


@dataclass
class KernelReport:
    n: int
    ratios: list[float]
    max_ratio: float
    median_ratio: float
    schur_x: float
    schur_y: float
    support_gap: float


def _schur(cut: CutoffPair, s: float, y_stride: int = 1) -> tuple[float, float]:
    """``sup_x int |k| dy`` and ``sup_y int |k| dx`` for ``k = D^s_x kappa``.

    ``kappa(x, y) = eta^c(x) zeta(y) / |x - y|^{d+1-s}`` with the distance
    kernel periodised over all images, as in the default quadrature.
    """
    spec = cut.masks.spec
    d = spec.d
    beta = 1.0 - s
    idx = np.argwhere(cut.zeta.values > 0)[::y_stride]
    h = spec.h
    wy = (h * y_stride) ** d if d == 1 else spec.cell_volume * y_stride
    pts = np.stack([c.ravel() for c in np.indices(spec.shape)], axis=1)
    eta_c = cut.eta_c.values
    col_sum = np.zeros(spec.shape)
    row_max = 0.0
    for y in idx:
        a = (pts - y) / spec.n
        near = np.all(np.abs(a - np.round(a)) < 1e-15, axis=1)
        a[near] = 0.5  # value irrelevant: eta_c vanishes at and near y
        ker = spec.L ** (-d - beta) * lattice.shifted_power_sum((d + beta) / 2, a)
        kappa = eta_c * ker.reshape(spec.shape) * cut.zeta.values[tuple(y)]
        k = frac_gradient(ScalarField(spec, kappa), s).magnitude().values
        row_max = max(row_max, float(spec.cell_volume * np.sum(k)))
        col_sum += wy * k
    return float(col_sum.max()), row_max


def kernel_bound_report(
    masks: DomainMasks,
    cut: CutoffPair,
    s: float,
    p: float,
    samples: int,
    seed: int,
    *,
    kmax: int = 6,
    y_stride: int = 1,
    schur: bool = True,
) -> KernelReport:
    """Sampled ``||T(phi)||_p / ||phi||_1`` ratios and the Schur integrals of ``k``."""
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    if not 0 < s < 1:
        raise ValidationError("the kernel report needs 0 < s < 1")
    phis = random_test_functions(masks, samples, seed, kmax=kmax)
    ratios = [
        lp_norm(test_transform(phi, s, cut).magnitude(), p) / lp_norm(phi, 1) for phi in phis
    ]
    sx, sy = _schur(cut, s, y_stride) if schur else (float("nan"), float("nan"))
    return KernelReport(
        n=masks.spec.n,
        ratios=ratios,
        max_ratio=float(np.max(ratios)),
        median_ratio=float(np.median(ratios)),
        schur_x=sx,
        schur_y=sy,
        support_gap=cut.support_gap(),
    )


@dataclass
class GridRecord:
    n: int
    sup_mu_omega1: float | None
    sup_mu_control: float
    identity_defect: float | None
    converged: bool
    iterations: int


@dataclass
class ReductionReport:
    grids: list[GridRecord] = field(default_factory=list)
    kernel: KernelReport | None = None
    prop1_stable: bool = False
    control_grows: bool = False

    def to_json(self) -> dict:
        out = {
            "grids": [
                {
                    "n": g.n,
                    "sup_mu_omega1": g.sup_mu_omega1,
                    "sup_mu_control": g.sup_mu_control,
                    "identity_defect": g.identity_defect,
                    "converged": g.converged,
                    "iterations": g.iterations,
                }
                for g in self.grids
            ],
            "verdict": {"prop1_stable": self.prop1_stable, "control_grows": self.control_grows},
        }
        if self.kernel is not None:
            k = self.kernel
            out["kernel"] = {
                "max_ratio": k.max_ratio,
                "median_ratio": k.median_ratio,
                "schur_x": k.schur_x,
                "schur_y": k.schur_y,
            }
        return out


def control_field(prob: Problem, width: float | None = None) -> ScalarField:
    """Exterior data plus a resolution-tied oscillation ``sin(2 pi (n/4) x_1 / L)`` windowed into omega."""
    spec = prob.spec
    width = width if width is not None else prob.masks.sep_outer / 2
    window = bump_in(prob.masks.omega, spec, width)
    osc = np.sin(2 * np.pi * (spec.n // 4) * spec.coords()[0] / spec.L)
    return prob.exterior + window * osc


def _successive_ratios(values: Sequence[float]) -> list[float]:
    return [b / a if a > 0 else (math.inf if b > 0 else 1.0) for a, b in zip(values, values[1:])]


def mu_boundedness_report(
    make_problem: Callable[[int], Problem],
    cfg: SolverConfig,
    grid_sizes: Sequence[int],
    *,
    seed: int = 0,
    stable_ratio: float = 1.5,
    growth_ratio: float = 2.0,
    solutions: dict | None = None,
) -> ReductionReport:
    """Refinement study of ``sup_{omega1} |mu|`` for solutions and for the control field.

    ``make_problem(n)`` resamples the same continuous problem on an ``n``
    grid.  A non-converged solve marks that grid invalid (``None`` entries)
    and fails the stability verdict.  Converged solutions are stored in
    ``solutions`` (keyed by ``n``) when a dict is supplied.
    """
    sizes = list(grid_sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValidationError("grid_sizes must be strictly increasing")
    report = ReductionReport()
    for n in sizes:
        prob = make_problem(n)
        prm = prob.params
        sol = solve(prob, cfg)
        ctrl = control_field(prob)
        mu_ctrl = classical_p_laplacian(lift(ctrl, prm.s), prm.p, prm.eps_reg)
        sup_ctrl = masked_sup(mu_ctrl, prob.masks.omega1)
        if sol.converged:
            mu = classical_p_laplacian(lift(sol.u, prm.s), prm.p, prm.eps_reg)
            sup_mu = masked_sup(mu, prob.masks.omega1)
            phi = random_test_functions(prob.masks, 1, seed)[0]
            defect = reduction_identity_check(sol.u, prm.s, prm.p, phi, prm.eps_reg)
            if solutions is not None:
                solutions[n] = (prob, sol)
        else:
            log.warning("n=%d: solve did not converge (%s)", n, sol.message)
            sup_mu = defect = None
        report.grids.append(
            GridRecord(n, sup_mu, sup_ctrl, defect, sol.converged, sol.iterations)
        )
    sups = [g.sup_mu_omega1 for g in report.grids]
    report.prop1_stable = all(v is not None for v in sups) and all(
        r <= stable_ratio for r in _successive_ratios(sups)
    )
    report.control_grows = all(
        r >= growth_ratio for r in _successive_ratios([g.sup_mu_control for g in report.grids])
    )
    return report


def report_as_dict(report: KernelReport) -> dict:
    return asdict(report)

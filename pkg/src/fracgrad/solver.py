"""Variational solvers for the ``H^{s,p}``-Laplace equation with exterior data.

Unknowns are the values inside ``omega``; outside it the field equals the
exterior data ``g`` bit for bit.  :func:`solve` runs preconditioned
projected gradient descent on :func:`~fracgrad.energy.p_energy`;
:func:`solve_linear_p2` is the conjugate-gradient oracle for ``p = 2``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .energy import FracParams, energy_gradient, p_energy
from .errors import NumericalError, ValidationError
from .fieldio import write_field
from .grid import DomainMasks, GridSpec, ScalarField, lp_norm
from .spectral import _riesz, frac_divergence, frac_gradient

log = logging.getLogger(__name__)

__all__ = [
    "Problem",
    "SolverConfig",
    "Solution",
    "solve",
    "solve_linear_p2",
    "interior_residual",
    "save_solution",
]

# Gauss-Legendre rule on [0, 1] for energy differences along a step
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = (_GL_NODES + 1) / 2
_GL_WEIGHTS = _GL_WEIGHTS / 2


@dataclass(frozen=True, eq=False)
class Problem:
    spec: GridSpec
    masks: DomainMasks
    exterior: ScalarField
    params: FracParams

    def __post_init__(self):
        if self.masks.spec != self.spec or self.exterior.spec != self.spec:
            raise ValidationError("problem components live on different grids")


@dataclass(frozen=True)
class SolverConfig:
    """Descent settings.  ``tol=None`` means ``1e-9 * n^(d/2)``; ``precondition_order=None`` means ``2 s``."""

    tol: float | None = None
    max_iters: int = 5000
    step0: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    precondition_order: float | None = None

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not self.step0 > 0:
            raise ValidationError("step0 must be positive")
        if not 0 < self.shrink < 1:
            raise ValidationError("shrink must lie in (0, 1)")
        if not 0 < self.armijo < 0.5:
            raise ValidationError("armijo must lie in (0, 1/2)")

    def resolved_tol(self, spec: GridSpec) -> float:
        return self.tol if self.tol is not None else 1e-9 * spec.n ** (spec.d / 2)

    def resolved_order(self, params: FracParams) -> float:
        sigma = 2 * params.s if self.precondition_order is None else float(self.precondition_order)
        if not 0 <= sigma <= 2 * params.s + 1e-15:
            raise ValidationError(f"precondition_order must lie in [0, 2s], got {sigma}")
        return sigma


@dataclass(eq=False)
class Solution:
    u: ScalarField
    residual_history: list[float] = field(default_factory=list)
    energy_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    message: str = ""


def interior_residual(u: ScalarField, prob: Problem) -> float:
    """L^2 norm of the energy gradient over ``omega``."""
    return lp_norm(energy_gradient(u, prob.params, prob.masks), 2)


def _energy_change(gu: np.ndarray, gd: np.ndarray, t: float, prob: Problem) -> float:
    """``E(u + t d) - E(u)`` as the line integral of the first variation.

    ``gu`` and ``gd`` are ``D^s u`` and ``D^s d``.  Computing the difference
    directly keeps its relative accuracy when it is far below ``eps * E``.
    """
    p, eps = prob.params.p, prob.params.eps_reg
    total = 0.0
    for x, w in zip(_GL_NODES, _GL_WEIGHTS):
        g = gu + (x * t) * gd
        sq = np.sum(g * g, axis=0)
        if eps > 0:
            wt = (sq + eps * eps) ** ((p - 2) / 2)
        elif p == 2:
            wt = 1.0
        else:
            wt = sq ** ((p - 2) / 2)
        total += w * float(np.sum(wt * g * gd))
    return t * prob.spec.cell_volume * total


def _stack_grad(f: np.ndarray, spec: GridSpec, s: float) -> np.ndarray:
    return frac_gradient(ScalarField(spec, f), s).stack()


def solve(prob: Problem, cfg: SolverConfig | None = None) -> Solution:
    """Minimise the p-energy over fields equal to the exterior data off ``omega``.

    Direction: minus the Riesz-preconditioned energy gradient, re-masked.
    Step: backtracking until the Armijo condition holds.  The recorded
    energies are ``E(u_0)`` plus the accumulated accepted decrements, so the
    history is nonincreasing by construction.
    """
    cfg = cfg or SolverConfig()
    spec, masks, params = prob.spec, prob.masks, prob.params
    tol = cfg.resolved_tol(spec)
    sigma = cfg.resolved_order(params)
    omega = masks.omega
    g = prob.exterior.values
    u = prob.exterior
    e0 = p_energy(u, params)
    decrements: list[float] = []
    sol = Solution(u)
    sol.energy_history.append(e0)

    for it in range(cfg.max_iters + 1):
        grad = energy_gradient(u, params, masks)
        res = lp_norm(grad, 2)
        if not math.isfinite(res):
            raise NumericalError(f"non-finite residual at iteration {it}")
        sol.residual_history.append(res)
        if res <= tol:
            sol.converged = True
            sol.iterations = it
            break
        if it == cfg.max_iters:
            sol.iterations = it
            sol.message = f"max_iters={cfg.max_iters} reached with residual {res:.3e}"
            break
        pre = np.where(omega, _riesz(grad, sigma).values, 0.0)
        slope = -spec.cell_volume * float(np.sum(grad.values * pre))
        gu = frac_gradient(u, params.s).stack()
        gd = -_stack_grad(pre, spec, params.s)
        t = cfg.step0
        while True:
            de = _energy_change(gu, gd, t, prob)
            if not math.isfinite(de):
                raise NumericalError(f"non-finite energy change at iteration {it}")
            if de <= cfg.armijo * t * slope:
                break
            t *= cfg.shrink
            if t < 1e-20:
                sol.iterations = it
                sol.message = f"line search underflow at iteration {it}, residual {res:.3e}"
                log.warning(sol.message)
                sol.u = u
                return sol
        new = np.where(omega, u.values - t * pre, g)
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"non-finite iterate at iteration {it}")
        u = ScalarField(spec, new)
        decrements.append(de)
        sol.energy_history.append(math.fsum([e0, *decrements]))
    sol.u = u
    return sol


def _interior_operator(spec: GridSpec, s: float, omega: np.ndarray):
    def apply(w: np.ndarray) -> np.ndarray:
        f = ScalarField(spec, w)
        out = -frac_divergence(frac_gradient(f, s), s).values
        return np.where(omega, out, 0.0)

    return apply


def solve_linear_p2(prob: Problem, rtol: float = 1e-12, max_iters: int | None = None) -> Solution:
    """Conjugate gradients for the ``p = 2`` interior system ``-div_s D^s u = 0`` on ``omega``.

    The operator is the exact linearisation used by :func:`solve`, so both
    solvers target the same discrete solution.
    """
    params = prob.params
    if params.p != 2 or params.eps_reg != 0:
        raise ValidationError("solve_linear_p2 needs p = 2 and eps_reg = 0")
    spec, omega = prob.spec, prob.masks.omega
    A = _interior_operator(spec, params.s, omega)
    g_out = np.where(omega, 0.0, prob.exterior.values)
    b = -A(g_out)
    # same feasible start as the descent: u_0 = g, so constant data is already a solution
    x = np.where(omega, prob.exterior.values, 0.0)
    r = np.where(omega, b - A(x), 0.0)
    d = r.copy()
    rr = float(np.sum(r * r))
    bnorm = math.sqrt(float(np.sum(b * b)))
    hist = [math.sqrt(rr * spec.cell_volume)]
    max_iters = max_iters or 10 * spec.size
    converged = bnorm == 0.0 or math.sqrt(rr) <= rtol * bnorm
    it = 0
    while not converged and it < max_iters:
        Ad = A(d)
        alpha = rr / float(np.sum(d * Ad))
        x = x + alpha * d
        r = r - alpha * Ad
        rr_new = float(np.sum(r * r))
        it += 1
        hist.append(math.sqrt(rr_new * spec.cell_volume))
        if math.sqrt(rr_new) <= rtol * bnorm:
            converged = True
            break
        d = r + (rr_new / rr) * d
        rr = rr_new
    if not np.all(np.isfinite(x)):
        raise NumericalError("conjugate gradients produced non-finite values")
    u = ScalarField(spec, np.where(omega, x, prob.exterior.values))
    energy = p_energy(u, params)
    return Solution(u, hist, [energy], it, converged, "" if converged else "CG did not converge")


def save_solution(sol: Solution, prob: Problem, cfg: SolverConfig, stem) -> None:
    """Write ``<stem>.fsf`` and the JSON sidecar ``<stem>.json``."""
    write_field(f"{stem}.fsf", sol.u)
    side = {
        "iterations": sol.iterations,
        "converged": sol.converged,
        "residual_history": sol.residual_history,
        "energy_history": sol.energy_history,
        "params": asdict(prob.params),
        "config": asdict(cfg),
    }
    with open(f"{stem}.json", "w") as fh:
        json.dump(side, fh, indent=2)
        fh.write("\n")


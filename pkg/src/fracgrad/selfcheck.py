"""Invariant suite run by ``fracgrad selfcheck``.

Each check returns ``(ok, detail)``; the suite prints one line per check and
stops at the first failure.  Sizes are the defaults ``d=1, n=128`` and
``d=2, n=64`` (quadrature refinement additionally uses ``n=64, 256`` in 1D).
"""

from __future__ import annotations

import io
import os
import tempfile
import time
from typing import Callable, Iterator

import numpy as np

from . import fieldio
from .energy import FracParams, first_variation, hsp_laplacian_strong, p_energy
from .grid import DomainMasks, GridSpec, ScalarField, VectorField, box_mask, box_masks, field_from_function, lp_norm, masked_sup
from .holder import estimate_holder
from .reduction import (
    build_cutoffs,
    bump_in,
    kernel_bound_report,
    lift,
    reduction_identity_check,
    test_transform,
)
from .singular import QuadratureConfig, frac_gradient_pv, gagliardo_seminorm, wsp_laplacian_weak
from .solver import Problem, SolverConfig, solve
from .spectral import (
    classical_gradient,
    frac_divergence,
    frac_gradient,
    frac_laplacian,
    riesz_potential,
)

__all__ = ["band_limited", "gaussian_bump", "iter_checks", "run_selfcheck"]

Check = Callable[[], tuple[bool, str]]


def band_limited(spec: GridSpec, rng: np.random.Generator, kmax: int = 4) -> ScalarField:
    """Random real trigonometric polynomial with frequencies ``|k_j| <= kmax``."""
    c = np.zeros(spec.shape, dtype=complex)
    sl = tuple(np.r_[0 : kmax + 1, spec.n - kmax : spec.n] for _ in range(spec.d))
    sub = np.ix_(*sl)
    c[sub] = rng.standard_normal(c[sub].shape) + 1j * rng.standard_normal(c[sub].shape)
    return ScalarField(spec, np.real(np.fft.ifftn(c)) * spec.size / np.sqrt(c[sub].size))


def gaussian_bump(spec: GridSpec, width: float = 0.08, center=None) -> ScalarField:
    c = center if center is not None else [spec.L / 2] * spec.d
    return field_from_function(
        spec, lambda *x: np.exp(-sum((xj - cj) ** 2 for xj, cj in zip(x, c)) / width**2)
    )


def _ip(a: ScalarField, b: ScalarField) -> float:
    return float(a.spec.cell_volume * np.sum(a.values * b.values))


def _vip(a: VectorField, b: VectorField) -> float:
    return float(a.spec.cell_volume * np.sum(a.stack() * b.stack()))


def _maxdiff(a, b) -> float:
    a = a.stack() if isinstance(a, VectorField) else getattr(a, "values", a)
    b = b.stack() if isinstance(b, VectorField) else getattr(b, "values", b)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _rel(x: float, y: float) -> float:
    return abs(x - y) / max(abs(x), abs(y), 1e-300)


def _verdict(value: float, tol: float, what: str) -> tuple[bool, str]:
    return value <= tol, f"{what} = {value:.3e} (tol {tol:.0e})"


def _specs() -> list[GridSpec]:
    return [GridSpec(1, 128), GridSpec(2, 64)]


# ------------------------------------------------------------------ grid


def _grid_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    f, g = band_limited(spec, rng), band_limited(spec, rng)

    def homogeneity():
        worst = max(_rel(lp_norm(f * c, p), abs(c) * lp_norm(f, p)) for c in (-2.5, 0.3) for p in (1, 2, 3.5, np.inf))
        return _verdict(worst, 1e-12, "relative defect")

    def triangle():
        worst = max(lp_norm(f + g, p) - lp_norm(f, p) - lp_norm(g, p) for p in (1, 2, 3.5, np.inf))
        return worst <= 1e-12, f"max excess = {worst:.3e}"

    def sup_monotone():
        a = box_mask(spec, [[0.4, 0.6]] * spec.d)
        b = box_mask(spec, [[0.2, 0.8]] * spec.d)
        return masked_sup(f, a) <= masked_sup(f, b), "sup over nested masks"

    def roundtrip():
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "f.fsf")
            fieldio.write_field(path, f)
            back = fieldio.read_field(path)
        same = back.spec == spec and np.array_equal(back.values, f.values)
        return same, "FSF1 write/read bit-identical"

    yield "grid.lp_homogeneity", homogeneity
    yield "grid.triangle_inequality", triangle
    yield "grid.masked_sup_monotone", sup_monotone
    yield "grid.fsf1_roundtrip", roundtrip


# -------------------------------------------------------------- spectral


def _spectral_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    u, w = band_limited(spec, rng), band_limited(spec, rng)
    s = 0.6
    G = VectorField.from_array(spec, np.stack([band_limited(spec, rng).values for _ in range(spec.d)]))

    def linearity():
        a, b = 1.7, -0.4
        ops = [
            lambda f: frac_laplacian(f, 1.3).values,
            lambda f: riesz_potential(f, 0.7).values,
            lambda f: frac_gradient(f, s).stack(),
        ]
        worst = max(
            np.max(np.abs(op(u * a + w * b) - (a * op(u) + b * op(w)))) / max(1.0, np.max(np.abs(op(u * a + w * b))))
            for op in ops
        )
        return _verdict(float(worst), 1e-12, "relative defect")

    def composition():
        return _verdict(_maxdiff(frac_gradient(u, s), classical_gradient(riesz_potential(u, 1 - s))), 1e-11, "max error")

    def semigroup():
        lhs = frac_laplacian(frac_laplacian(u, 0.7), 0.9)
        scale = max(1.0, lp_norm(lhs, np.inf))
        return _verdict(_maxdiff(lhs, frac_laplacian(u, 1.6)) / scale, 1e-11, "relative error")

    def translation():
        shift = [3] + [5] * (spec.d - 1)
        worst = max(
            _maxdiff(frac_laplacian(u.roll(shift), 0.8), frac_laplacian(u, 0.8).roll(shift)),
            _maxdiff(frac_gradient(u.roll(shift), s)[0], frac_gradient(u, s)[0].roll(shift)),
        )
        return _verdict(worst, 1e-12, "max error")

    def skew_adjoint():
        lhs = _ip(u, frac_divergence(G, s))
        rhs = -_vip(frac_gradient(u, s), G)
        return _verdict(abs(lhs - rhs) / max(1.0, abs(lhs)), 1e-11, "duality defect")

    yield "spectral.linearity", linearity
    yield "spectral.composition_D_I", composition
    yield "spectral.semigroup", semigroup
    yield "spectral.translation_equivariance", translation
    yield "spectral.skew_adjointness", skew_adjoint

    if spec.d == 1:

        def s_to_one():
            du = classical_gradient(u)
            scale = float(np.max(np.abs(du.stack())))
            errs = [_maxdiff(frac_gradient(u, t), du) / scale for t in (0.9, 0.99, 0.999)]
            ok = errs[0] >= errs[1] >= errs[2] and errs[2] <= 1e-2
            return ok, "errors " + ", ".join(f"{e:.2e}" for e in errs)

        yield "spectral.s_to_one_continuity", s_to_one


# -------------------------------------------------------------- singular


def _singular_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    q = QuadratureConfig()
    u = band_limited(spec, rng, 3)
    phi, psi = band_limited(spec, rng, 3), band_limited(spec, rng, 3)
    s = 0.5

    if spec.d == 1:

        def refinement():
            errs = []
            for n in (64, 128, 256):
                sp = GridSpec(1, n)
                f = gaussian_bump(sp)
                ref = frac_gradient(f, s)
                errs.append(_maxdiff(frac_gradient_pv(f, s, q), ref) / lp_norm(ref[0], np.inf))
            ratios = [b / a for a, b in zip(errs, errs[1:])]
            return all(r <= 0.75 for r in ratios), "ratios " + ", ".join(f"{r:.3f}" for r in ratios)

        yield "singular.pv_refinement", refinement

    def gagliardo_shift():
        shift = [5] + [3] * (spec.d - 1)
        a = gagliardo_seminorm(u, s, 2.5, q)
        b = gagliardo_seminorm(u.roll(shift), s, 2.5, q)
        return _verdict(_rel(a, b), 1e-12, "relative change")

    def wsp_linear():
        a, b = 0.7, -1.9
        lhs = wsp_laplacian_weak(u, phi * a + psi * b, s, 3.0, q)
        rhs = a * wsp_laplacian_weak(u, phi, s, 3.0, q) + b * wsp_laplacian_weak(u, psi, s, 3.0, q)
        return _verdict(abs(lhs - rhs) / max(1.0, abs(lhs)), 1e-12, "defect")

    def permutation():
        base = frac_gradient_pv(u, s, q)
        other = frac_gradient_pv(u, s, q, order_seed=12345)
        d1 = _maxdiff(base, other) / max(1.0, float(np.max(np.abs(base.stack()))))
        g1 = gagliardo_seminorm(u, s, 2.0, q)
        g2 = gagliardo_seminorm(u, s, 2.0, q, order_seed=999)
        return _verdict(max(d1, _rel(g1, g2)), 1e-12, "reordering change")

    yield "singular.gagliardo_translation", gagliardo_shift
    yield "singular.wsp_linear_in_phi", wsp_linear
    yield "singular.order_independence", permutation


# ---------------------------------------------------------------- energy


def _energy_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    def convexity():
        worst = -np.inf
        for p in (2.0, 3.0, 4.0):
            prm = FracParams(0.5, p)
            u, w = band_limited(spec, rng), band_limited(spec, rng)
            mid = p_energy((u + w) * 0.5, prm)
            worst = max(worst, mid - 0.5 * (p_energy(u, prm) + p_energy(w, prm)))
        return worst <= 1e-12, f"max midpoint excess = {worst:.3e}"

    def fd_consistency():
        worst = 0.0
        for p, eps in ((2.0, 0.0), (3.0, 0.0), (4.0, 0.0), (1.8, 1e-3)):
            prm = FracParams(0.5, p, eps)
            u, phi = band_limited(spec, rng), band_limited(spec, rng)
            t = 1e-6
            fd = (p_energy(u + phi * t, prm) - p_energy(u - phi * t, prm)) / (2 * t)
            worst = max(worst, _rel(fd, first_variation(u, phi, prm)))
        return _verdict(worst, 1e-5, "relative mismatch")

    def p2_additive():
        prm = FracParams(0.5, 2.0)
        u, w = band_limited(spec, rng), band_limited(spec, rng)
        lhs = hsp_laplacian_strong(u + w, prm)
        rhs = hsp_laplacian_strong(u, prm) + hsp_laplacian_strong(w, prm)
        return _verdict(_maxdiff(lhs, rhs), 1e-11, "max defect")

    def eps_continuity():
        u, phi = band_limited(spec, rng), band_limited(spec, rng)
        worst = max(
            _rel(first_variation(u, phi, FracParams(0.5, p, 1e-8)), first_variation(u, phi, FracParams(0.5, p)))
            for p in (2.0, 3.0)
        )
        return _verdict(worst, 1e-6, "relative change")

    yield "energy.convexity", convexity
    yield "energy.fd_consistency", fd_consistency
    yield "energy.p2_additivity", p2_additive
    yield "energy.eps_continuity", eps_continuity


# ---------------------------------------------------------------- solver


def _standard_problem(spec: GridSpec, s=0.5, p=3.0) -> Problem:
    if spec.d == 1:
        masks = box_masks(spec, [[0.25, 0.75]], [[0.3125, 0.6875]], [[0.375, 0.625]])
    else:
        masks = box_masks(spec, [[0.2, 0.8]] * 2, [[0.3, 0.7]] * 2, [[0.4, 0.6]] * 2)
    g = field_from_function(spec, lambda *x: np.sin(2 * np.pi * x[0] / spec.L))
    return Problem(spec, masks, g, FracParams(s, p))


def _solver_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    prob = _standard_problem(spec)
    cfg = SolverConfig(max_iters=2000)
    state: dict = {}

    def run():
        if "sol" not in state:
            state["sol"] = solve(prob, cfg)
        return state["sol"]

    def exterior():
        sol = run()
        off = ~prob.masks.omega
        same = np.array_equal(sol.u.values[off], prob.exterior.values[off])
        return same and sol.converged, f"converged={sol.converged}, exterior bit-identical={same}"

    def monotone():
        e = np.asarray(run().energy_history)
        worst = float(np.max(np.diff(e))) if len(e) > 1 else 0.0
        return worst <= 0.0, f"max energy increase = {worst:.3e}"

    def optimality():
        sol = run()
        tol = cfg.resolved_tol(spec)
        window = bump_in(prob.masks.omega1, spec, prob.masks.sep_inner / 2)
        worst = 0.0
        for _ in range(10):
            phi = band_limited(spec, rng) * window
            bound = 10 * tol * lp_norm(frac_gradient(phi, prob.params.s).magnitude(), 2)
            worst = max(worst, abs(first_variation(sol.u, phi, prob.params)) / bound)
        return worst <= 1.0, f"max |first variation| / bound = {worst:.3e}"

    def determinism():
        again = solve(prob, cfg)
        return np.array_equal(again.u.values, run().u.values), "repeat solve bit-identical"

    yield "solver.exterior_invariance", exterior
    yield "solver.energy_monotone", monotone
    yield "solver.optimality", optimality
    yield "solver.determinism", determinism


# ------------------------------------------------------------- reduction


def _reduction_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    prob = _standard_problem(spec)
    masks = prob.masks
    s, p = 0.5, 3.0
    u = band_limited(spec, rng)

    def composition():
        return _verdict(_maxdiff(classical_gradient(lift(u, s)), frac_gradient(u, s)), 1e-11, "max error")

    def identity():
        phi = band_limited(spec, rng) * bump_in(masks.omega, spec, masks.sep_outer / 2)
        fv = first_variation(u, phi, FracParams(s, p))
        return _verdict(reduction_identity_check(u, s, p, phi) / (1 + abs(fv)), 1e-10, "relative defect")

    cut = build_cutoffs(masks, masks.separation / 2)
    phi1 = band_limited(spec, rng) * bump_in(masks.omega1, spec, masks.sep_inner / 2)

    def t_linear():
        return _verdict(_maxdiff(test_transform(phi1 * 2.5, s, cut), test_transform(phi1, s, cut).stack() * 2.5), 1e-12, "max defect")

    def t_degenerate():
        full = DomainMasks(spec, np.ones(spec.shape, dtype=bool), masks.omega2, masks.omega1)
        c = build_cutoffs(full, full.sep_inner / 2)
        out = float(np.max(np.abs(test_transform(phi1, s, c).stack())))
        return out == 0.0, f"max |T(phi)| with eta^c = 0: {out:.3e}"

    def kernel_deterministic():
        a = kernel_bound_report(masks, cut, s, p, 3, 11, schur=False)
        b = kernel_bound_report(masks, cut, s, p, 3, 11, schur=False)
        return a.ratios == b.ratios, "repeat sampling identical"

    yield "reduction.composition_identity", composition
    yield "reduction.identity_defect", identity
    yield "reduction.T_linear", t_linear
    yield "reduction.T_degenerate_zero", t_degenerate
    yield "reduction.kernel_report_deterministic", kernel_deterministic


# ---------------------------------------------------------------- holder


def _holder_checks(spec: GridSpec, rng) -> Iterator[tuple[str, Check]]:
    f = band_limited(spec, rng)
    region = box_mask(spec, [[0.35, 0.65]] * spec.d)
    radii = [8 * spec.h / 2**j for j in range(4)]
    radii = [r * 2 for r in radii] if radii[-1] < 2 * spec.h else radii

    def shift():
        m = [7] + [3] * (spec.d - 1)
        a = estimate_holder(f, region, radii).alpha
        b = estimate_holder(f.roll(m), np.roll(region, m, axis=tuple(range(spec.d))), radii).alpha
        return a == b, f"alpha {a:.6f} vs {b:.6f}"

    def scale():
        a = estimate_holder(f, region, radii).alpha
        b = estimate_holder(f * -3.0, region, radii).alpha
        return _verdict(abs(a - b), 1e-12, "alpha change")

    yield "holder.shift_equivariance", shift
    yield "holder.scale_invariance", scale


_GROUPS = (
    _grid_checks,
    _spectral_checks,
    _singular_checks,
    _energy_checks,
    _solver_checks,
    _reduction_checks,
    _holder_checks,
)


def iter_checks(seed: int = 0) -> Iterator[tuple[str, Check]]:
    for spec in _specs():
        for group in _GROUPS:
            rng = np.random.default_rng([seed, spec.d, _GROUPS.index(group)])
            for name, check in group(spec, rng):
                yield f"d{spec.d}n{spec.n}:{name}", check


def run_selfcheck(out: io.TextIOBase | None = None, seed: int = 0) -> bool:
    """Run every check, print one line each, stop at the first failure."""
    import sys

    out = out or sys.stdout
    start = time.perf_counter()
    for name, check in iter_checks(seed):
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failed invariant, reported as such
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}", file=out, flush=True)
        if not ok:
            print(f"selfcheck FAILED after {time.perf_counter() - start:.1f}s", file=out)
            return False
    print(f"selfcheck passed in {time.perf_counter() - start:.1f}s", file=out)
    return True

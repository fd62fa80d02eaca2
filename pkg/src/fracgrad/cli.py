"""Command-line driver.

``fracgrad <command> --config PATH [--out DIR] [--threads N] [--force-oracle]``

Exit status: 0 on success, 2 on a configuration or validation error (no
files are written), 3 on a numerical failure (a solve that did not converge,
a non-finite value, or a failed self-check).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .energy import first_variation
from .errors import NumericalError, ValidationError
from .fieldio import write_field, write_mask
from .grid import GridSpec, lp_norm
from .holder import estimate_holder
from .reduction import (
    build_cutoffs,
    kernel_bound_report,
    lift,
    mu_boundedness_report,
    random_test_functions,
)
from .singular import wsp_laplacian_weak
from .solver import save_solution, solve
from .spectral import classical_gradient, frac_gradient, set_workers

log = logging.getLogger("fracgrad")

COMMANDS = ("selfcheck", "solve", "reduce", "kernel", "holder", "compare-wsp")
ORACLE_LIMITS = {1: 256, 2: 64, 3: 16}

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class _NotConverged(Exception):
    pass


# ------------------------------------------------------------------ output


def _finite(x):
    """Replace non-finite floats by ``None`` so reports are strict JSON."""
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, np.generic):
        return _finite(x.item())
    return x


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_finite(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_masks(out: Path, masks) -> None:
    for name in ("omega", "omega2", "omega1"):
        write_mask(out / f"{name}.fsm", masks.spec, getattr(masks, name))


# ---------------------------------------------------------------- commands


def _check_oracle_size(spec: GridSpec, force: bool) -> None:
    limit = ORACLE_LIMITS[spec.d]
    if spec.n > limit and not force:
        raise ValidationError(
            f"quadrature oracle refused for d={spec.d}, n={spec.n} (limit {limit}); pass --force-oracle"
        )


def _default_radii(spec: GridSpec) -> list[float]:
    return [16 * spec.h / 2**j for j in range(4)]


def _solve_or_fail(prob, scfg, what: str):
    sol = solve(prob, scfg)
    if not sol.converged:
        raise _NotConverged(f"{what}: {sol.message}")
    return sol


def cmd_solve(cfg: RunConfig, out: Path, args) -> dict:
    prob = cfg.problem()
    scfg = cfg.solver()
    sol = solve(prob, scfg)
    out.mkdir(parents=True, exist_ok=True)
    save_solution(sol, prob, scfg, out / "solution")
    write_field(out / "exterior.fsf", prob.exterior)
    _write_masks(out, prob.masks)
    _write_csv(
        out / "residual_history.csv",
        ["iteration", "residual", "energy"],
        [(i, r, e) for i, (r, e) in enumerate(zip(sol.residual_history, sol.energy_history))],
    )
    report = {
        "command": "solve",
        "n": prob.spec.n,
        "d": prob.spec.d,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "final_residual": sol.residual_history[-1],
        "tol": scfg.resolved_tol(prob.spec),
        "energy": sol.energy_history[-1],
        "message": sol.message,
    }
    _write_json(out / "solve_report.json", report)
    if not sol.converged:
        raise _NotConverged(sol.message)
    return report


def _kernel_block(cfg: RunConfig, n: int, exp: dict, width: float | None, schur: bool = True):
    spec = cfg.grid(n)
    masks = cfg.masks(spec)
    w = width if width is not None else masks.separation / 2
    cut = build_cutoffs(masks, w)
    prm = cfg.params()
    return kernel_bound_report(
        masks, cut, prm.s, prm.p, exp["samples"], exp["seed"],
        kmax=exp["kmax"], y_stride=exp["schur_stride"], schur=schur,
    )


def cmd_reduce(cfg: RunConfig, out: Path, args) -> dict:
    exp = cfg.experiment()
    sizes = exp.get("grid_sizes") or [cfg.raw["grid"]["n"]]
    solutions: dict = {}
    rep = mu_boundedness_report(cfg.problem, cfg.solver(), sizes, seed=exp["seed"], solutions=solutions)
    rep.kernel = _kernel_block(cfg, cfg.raw["grid"]["n"], exp, exp["cutoff_width"])
    out.mkdir(parents=True, exist_ok=True)
    doc = rep.to_json()
    _write_json(out / "reduction_report.json", doc)
    _write_csv(
        out / "mu_refinement.csv",
        ["n", "sup_mu_omega1", "sup_mu_control", "identity_defect"],
        [(g.n, g.sup_mu_omega1, g.sup_mu_control, g.identity_defect) for g in rep.grids],
    )
    _write_csv(out / "kernel_ratios.csv", ["sample", "ratio"], enumerate(rep.kernel.ratios))
    for n, (prob, sol) in sorted(solutions.items()):
        write_field(out / f"u_n{n}.fsf", sol.u)
        write_field(out / f"v_n{n}.fsf", lift(sol.u, prob.params.s))
    return doc


def cmd_kernel(cfg: RunConfig, out: Path, args) -> dict:
    exp = cfg.experiment()
    spec0 = cfg.grid()
    sweep = exp.get("omega1_sweep") or []
    width = exp["cutoff_width"]
    if width is None:
        seps = [cfg.masks(spec0).separation] + [cfg.masks(spec0, b).separation for b in sweep]
        width = min(seps) / 2
    sizes = exp.get("kernel_grid_sizes") or [spec0.n]
    per_n = [_kernel_block(cfg, n, exp, width) for n in sizes]
    prm = cfg.params()
    geoms = []
    for box in sweep:
        masks = cfg.masks(spec0, box)
        r = kernel_bound_report(
            masks, build_cutoffs(masks, width), prm.s, prm.p, 1, exp["seed"],
            kmax=exp["kmax"], y_stride=exp["schur_stride"],
        )
        geoms.append({"omega1": box, "separation": masks.sep_inner, "schur_x": r.schur_x, "schur_y": r.schur_y})
    maxes = [k.max_ratio for k in per_n]
    doc = {
        "command": "kernel",
        "cutoff_width": width,
        "grids": [
            {
                "n": k.n,
                "max_ratio": k.max_ratio,
                "median_ratio": k.median_ratio,
                "schur_x": k.schur_x,
                "schur_y": k.schur_y,
                "support_gap": k.support_gap,
            }
            for k in per_n
        ],
        "max_ratio_change": [abs(b - a) / a for a, b in zip(maxes, maxes[1:])],
        "sweep": geoms,
        "schur_increasing": all(
            b["schur_x"] > a["schur_x"] and b["schur_y"] > a["schur_y"] for a, b in zip(geoms, geoms[1:])
        ),
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "kernel_report.json", doc)
    _write_csv(
        out / "kernel_ratios.csv",
        ["n", "sample", "ratio"],
        [(k.n, i, r) for k in per_n for i, r in enumerate(k.ratios)],
    )
    return doc


def cmd_holder(cfg: RunConfig, out: Path, args) -> dict:
    exp = cfg.experiment()
    prob = cfg.problem()
    spec = prob.spec
    radii = exp.get("radii") or _default_radii(spec)
    prm = prob.params
    prm.check_regularity_range(spec.d)
    sol = _solve_or_fail(prob, cfg.solver(), "holder solve")
    region, domain = prob.masks.omega1, prob.masks.omega
    est_u = estimate_holder(sol.u, region, radii, domain)
    dv = classical_gradient(lift(sol.u, prm.s))
    est_dv = [estimate_holder(dv[j], region, radii, domain) for j in range(spec.d)]
    doc = {
        "command": "holder",
        "n": spec.n,
        "s": prm.s,
        "p": prm.p,
        "u": est_u.to_json(),
        "Dv": [e.to_json() for e in est_dv],
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "holder_report.json", doc)
    rows = [("u", r, o) for r, o in zip(est_u.radii, est_u.oscillations)]
    for j, e in enumerate(est_dv):
        rows += [(f"Dv_{j}", r, o) for r, o in zip(e.radii, e.oscillations)]
    _write_csv(out / "oscillation_vs_radius.csv", ["field", "radius", "oscillation"], rows)
    write_field(out / "u.fsf", sol.u)
    return doc


def cmd_compare_wsp(cfg: RunConfig, out: Path, args) -> dict:
    exp = cfg.experiment()
    prob = cfg.problem()
    spec = prob.spec
    _check_oracle_size(spec, args.force_oracle)
    prm = prob.params
    q = cfg.quadrature()
    sol = _solve_or_fail(prob, cfg.solver(), "compare-wsp solve")
    phis = random_test_functions(prob.masks, exp["test_functions"], exp["seed"], kmax=exp["kmax"])
    rows = []
    for i, phi in enumerate(phis):
        hsp = first_variation(sol.u, phi, prm)
        wsp = wsp_laplacian_weak(sol.u, phi, prm.s, prm.p, q)
        scale = lp_norm(frac_gradient(phi, prm.s).magnitude(), 2)
        rows.append((i, hsp, wsp, scale))
    doc = {
        "command": "compare-wsp",
        "n": spec.n,
        "s": prm.s,
        "p": prm.p,
        "tests": [
            {"index": i, "hsp_weak": a, "wsp_weak": b, "norm_Ds_phi": c} for i, a, b, c in rows
        ],
        "max_abs_hsp": max(abs(r[1]) for r in rows),
        "max_abs_wsp": max(abs(r[2]) for r in rows),
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "compare_wsp.json", doc)
    _write_csv(out / "compare_wsp.csv", ["index", "hsp_weak", "wsp_weak", "norm_Ds_phi"], rows)
    write_field(out / "u.fsf", sol.u)
    return doc


_HANDLERS = {
    "solve": cmd_solve,
    "reduce": cmd_reduce,
    "kernel": cmd_kernel,
    "holder": cmd_holder,
    "compare-wsp": cmd_compare_wsp,
}
_SECTIONS = {
    "solve": ("grid", "masks", "params", "exterior"),
    "reduce": ("grid", "masks", "params", "exterior"),
    "kernel": ("grid", "masks", "params"),
    "holder": ("grid", "masks", "params", "exterior"),
    "compare-wsp": ("grid", "masks", "params", "exterior"),
}


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracgrad", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON run configuration (not needed for selfcheck)")
    ap.add_argument("--out", type=Path, default=Path("fracgrad_out"), help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="cap on FFT worker threads")
    ap.add_argument("--force-oracle", action="store_true", help="allow quadrature beyond the size limits")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    set_workers(args.threads)

    if args.command == "selfcheck":
        from .selfcheck import run_selfcheck

        seed = int(os.environ.get("FRACGRAD_SEED", "0") or 0)
        return EXIT_OK if run_selfcheck(sys.stdout, seed=seed) else EXIT_NUMERICAL

    if args.config is None:
        print(f"error: {args.command} needs --config", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = load_config(args.config)
        cfg.require(*_SECTIONS[args.command])
        if args.command == "holder":
            cfg.params().check_regularity_range(cfg.grid().d)
        if args.command == "compare-wsp":
            _check_oracle_size(cfg.grid(), args.force_oracle)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        doc = _HANDLERS[args.command](cfg, args.out, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, _NotConverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary = {k: v for k, v in doc.items() if k in ("verdict", "converged", "schur_increasing")}
    print(json.dumps(_finite({"command": args.command, "out": str(args.out), **summary})))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Hölder exponents from the decay of local oscillations.

``osc(f, B_r(x)) = max f - min f`` over lattice points within distance ``r``
of ``x``.  For ``f`` in ``C^{0, alpha}`` the worst oscillation over a set of
centres scales like ``r^alpha``; the exponent is the slope of a log-log
least-squares fit over dyadic radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .grid import GridSpec, ScalarField

__all__ = [
    "HolderEstimate",
    "local_oscillation",
    "fit_exponent",
    "sample_centers",
    "estimate_holder",
]

N_CENTERS = 50
ALPHA_MAX = 2.0


@dataclass(frozen=True, eq=False)
class HolderEstimate:
    alpha: float
    fit_quality: float
    radii: tuple[float, ...]
    oscillations: tuple[float, ...]
    region: np.ndarray
    note: str = ""

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "fit_quality": self.fit_quality,
            "radii": list(self.radii),
            "oscillations": list(self.oscillations),
            "region_points": int(np.count_nonzero(self.region)),
            "note": self.note,
        }


def _ball_offsets(spec: GridSpec, r: float) -> np.ndarray:
    m = int(math.floor(r / spec.h + 1e-9))
    rng = np.arange(-m, m + 1)
    off = np.stack(np.meshgrid(*([rng] * spec.d), indexing="ij"), axis=-1).reshape(-1, spec.d)
    keep = np.sum(off.astype(np.float64) ** 2, axis=1) * spec.h**2 <= r * r * (1 + 1e-12)
    return off[keep]


def _check_radius(spec: GridSpec, r: float) -> None:
    if r < spec.h * (1 - 1e-12):
        raise ValidationError(f"radius {r} is below the lattice spacing {spec.h}")
    if r >= spec.L / 2:
        raise ValidationError(f"radius {r} must stay below half the period {spec.L / 2}")


def _oscillations(f: ScalarField, centers: np.ndarray, r: float) -> np.ndarray:
    spec = f.spec
    off = _ball_offsets(spec, r)
    idx = (centers[:, None, :] + off[None, :, :]) % spec.n
    vals = f.values[tuple(idx[..., j] for j in range(spec.d))]
    return vals.max(axis=1) - vals.min(axis=1)


def local_oscillation(f: ScalarField, center: Sequence[int], r: float) -> float:
    """``max - min`` of ``f`` over lattice points within periodic distance ``r`` of ``center``.

    ``center`` is a lattice index tuple.
    """
    _check_radius(f.spec, r)
    c = np.asarray(center, dtype=np.int64).reshape(1, f.spec.d)
    return float(_oscillations(f, c, r)[0])


def fit_exponent(radii: Sequence[float], osc: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``log osc`` against ``log r`` and its ``R^2``."""
    x = np.log(np.asarray(radii, dtype=np.float64))
    y = np.log(np.asarray(osc, dtype=np.float64))
    if len(x) < 2:
        raise ValidationError("need at least two points for a slope")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    resid = y - (ym + slope * (x - xm))
    syy = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if syy == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / syy)
    return slope, r2


def sample_centers(region: np.ndarray, count: int = N_CENTERS) -> np.ndarray:
    """``count`` lattice indices spread evenly through ``region`` in row-major order."""
    pts = np.argwhere(region)
    if len(pts) == 0:
        raise ValidationError("region is empty")
    if len(pts) <= count:
        return pts
    pick = np.round(np.linspace(0, len(pts) - 1, count)).astype(np.int64)
    return pts[pick]


def estimate_holder(
    f: ScalarField,
    region: np.ndarray,
    radii: Sequence[float],
    domain: np.ndarray | None = None,
) -> HolderEstimate:
    """Fit the Hölder exponent of ``f`` on ``region`` from oscillations at dyadic ``radii``.

    Radii must be strictly decreasing, at least four, each half the previous
    one and at least two lattice spacings.  When ``domain`` is given, every
    ball must stay inside it.  Radii whose oscillation is within ``10 eps``
    of zero (relative to the field scale) are discarded; if fewer than two
    remain the field is locally constant and ``alpha = 2`` is returned as a
    maximal-smoothness sentinel.
    """
    spec = f.spec
    region = np.asarray(region, dtype=bool)
    if region.shape != spec.shape:
        raise ValidationError("region mask has the wrong shape")
    radii = tuple(float(r) for r in radii)
    if len(radii) < 4:
        raise ValidationError("need at least four radii")
    for a, b in zip(radii, radii[1:]):
        if not math.isclose(b, a / 2, rel_tol=1e-9):
            raise ValidationError("radii must be dyadic: r_j = r_0 2^-j")
    if radii[-1] < 2 * spec.h * (1 - 1e-12):
        raise ValidationError(f"smallest radius {radii[-1]} is below 2h = {2 * spec.h}")
    for r in radii:
        _check_radius(spec, r)
    centers = sample_centers(region)
    if domain is not None:
        domain = np.asarray(domain, dtype=bool)
        off = _ball_offsets(spec, radii[0])
        idx = (centers[:, None, :] + off[None, :, :]) % spec.n
        if not np.all(domain[tuple(idx[..., j] for j in range(spec.d))]):
            raise ValidationError("largest ball around a region point leaves the domain")

    osc = tuple(float(np.max(_oscillations(f, centers, r))) for r in radii)
    scale = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    floor = 10 * np.finfo(np.float64).eps * max(scale, np.finfo(np.float64).tiny)
    keep = [i for i, o in enumerate(osc) if o > floor]
    if len(keep) < 2:
        return HolderEstimate(ALPHA_MAX, 1.0, radii, osc, region, "locally constant field")
    note = "" if len(keep) == len(radii) else f"discarded {len(radii) - len(keep)} radii at roundoff level"
    slope, r2 = fit_exponent([radii[i] for i in keep], [osc[i] for i in keep])
    alpha = min(max(slope, 0.0), ALPHA_MAX)
    return HolderEstimate(alpha, r2, radii, osc, region, note)

"""Periodic lattices, sampled fields, nested domain masks and discrete norms.

All fields live on the flat torus ``[0, L)^d`` sampled at ``x_i = i * h`` with
``h = L / n``.  Values are stored as read-only float64 arrays of shape
``(n,) * d``; flattening them in C order gives the row-major layout used by
the binary file formats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "DomainMasks",
    "field_from_function",
    "inner",
    "lp_norm",
    "masked_sup",
    "box_mask",
    "box_masks",
    "set_distance",
    "distance_to_set",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice on ``[0, L)^d``."""

    d: int
    n: int
    L: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValidationError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValidationError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValidationError(f"period L must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        """Quadrature weight ``h^d``."""
        return self.h**self.d

    def coords(self) -> tuple[np.ndarray, ...]:
        """Lattice coordinates as ``d`` broadcast arrays (``ij`` indexing)."""
        x = np.arange(self.n) * self.h
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    def points(self) -> np.ndarray:
        """All lattice points as an ``(n^d, d)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real field sampled on a :class:`GridSpec`.

    ``values`` may be passed flat (length ``n^d``, row-major) or shaped.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.size != self.spec.size:
            raise ValidationError(
                f"field has {v.size} values, grid needs {self.spec.size}"
            )
        v = v.reshape(self.spec.shape)
        if not np.all(np.isfinite(v)):
            idx = np.unravel_index(np.flatnonzero(~np.isfinite(v))[0], v.shape)
            raise ValidationError(f"non-finite field value at lattice index {idx}")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "ScalarField":
        return cls(spec, np.full(spec.shape, float(c)))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def mean(self) -> float:
        return float(np.mean(self.values))

    def roll(self, shift: Sequence[int] | int) -> "ScalarField":
        """Cyclic shift by whole lattice cells along each axis."""
        if np.isscalar(shift):
            shift = (int(shift),) * self.spec.d
        return ScalarField(
            self.spec, np.roll(self.values, tuple(shift), axis=tuple(range(self.spec.d)))
        )

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.spec != self.spec:
                raise ValidationError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.spec, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.spec, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.spec, -self.values)

    def __repr__(self):
        return f"ScalarField(d={self.spec.d}, n={self.spec.n}, L={self.spec.L})"


@dataclass(frozen=True, eq=False)
class VectorField:
    """``d`` scalar components on a shared grid."""

    spec: GridSpec
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != self.spec.d:
            raise ValidationError(
                f"vector field needs {self.spec.d} components, got {len(comps)}"
            )
        for c in comps:
            if c.spec != self.spec:
                raise ValidationError("vector components must share the grid")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_array(cls, spec: GridSpec, arr: np.ndarray) -> "VectorField":
        return cls(spec, tuple(ScalarField(spec, a) for a in arr))

    def stack(self) -> np.ndarray:
        """Components as one ``(d, n, ..., n)`` array (a fresh copy)."""
        return np.stack([c.values for c in self.components])

    def magnitude(self) -> ScalarField:
        """Pointwise Euclidean norm."""
        return ScalarField(self.spec, np.sqrt(np.sum(self.stack() ** 2, axis=0)))

    def __getitem__(self, j: int) -> ScalarField:
        return self.components[j]

    def __len__(self):
        return len(self.components)


def field_from_function(spec: GridSpec, f: Callable[..., object]) -> ScalarField:
    """Sample ``f(x_1, ..., x_d)`` at the lattice points.

    ``f`` is called once with broadcast coordinate arrays.
    """
    coords = spec.coords()
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(f(*coords), dtype=np.float64), spec.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = np.unravel_index(np.flatnonzero(bad)[0], spec.shape)
        point = tuple(float(c[idx]) for c in coords)
        raise ValidationError(f"function is not finite at lattice point {point}")
    return ScalarField(spec, vals)


def inner(f: ScalarField, g: ScalarField) -> float:
    """Discrete L^2 inner product ``h^d * sum(f * g)``."""
    if f.spec != g.spec:
        raise ValidationError("fields live on different grids")
    return float(f.spec.cell_volume * np.sum(f.values * g.values))


def lp_norm(f: ScalarField, p: float) -> float:
    """Discrete L^p norm with quadrature weight ``h^d``; ``p=np.inf`` gives max|f|."""
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(f.values)))
    p = float(p)
    if not p >= 1:
        raise ValidationError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    scale = a.max()
    if scale == 0.0:
        return 0.0
    # scaling by the max keeps large p from overflowing
    return float(scale * (f.spec.cell_volume * np.sum((a / scale) ** p)) ** (1.0 / p))


def masked_sup(f: ScalarField, mask: np.ndarray) -> float:
    """Maximum of ``|f|`` over the marked lattice points."""
    m = np.asarray(mask, dtype=bool).reshape(f.spec.shape)
    if not m.any():
        raise ValidationError("mask is empty")
    return float(np.max(np.abs(f.values[m])))


def _as_mask(spec: GridSpec, m) -> np.ndarray:
    a = np.asarray(m, dtype=bool).reshape(spec.shape).copy()
    a.setflags(write=False)
    return a


def set_distance(spec: GridSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Minimum periodic distance between two sets of lattice points.

    Returns ``inf`` when either set is empty.
    """
    a = np.asarray(a, dtype=bool).ravel()
    b = np.asarray(b, dtype=bool).ravel()
    if not a.any() or not b.any():
        return np.inf
    pts = spec.points()
    tree = cKDTree(pts[b], boxsize=spec.L)
    dist, _ = tree.query(pts[a], k=1)
    return float(dist.min())


def distance_to_set(spec: GridSpec, target: np.ndarray) -> np.ndarray:
    """Periodic distance from every lattice point to the marked set (inf if empty)."""
    t = np.asarray(target, dtype=bool).ravel()
    if not t.any():
        return np.full(spec.shape, np.inf)
    pts = spec.points()
    tree = cKDTree(pts[t], boxsize=spec.L)
    dist, _ = tree.query(pts, k=1)
    return dist.reshape(spec.shape)


def box_mask(spec: GridSpec, box: Sequence[Sequence[float]] | None) -> np.ndarray:
    """Lattice points strictly inside an axis-aligned box; ``None`` marks everything.

    ``box`` holds one ``(lo, hi)`` interval per axis.
    """
    if box is None:
        return np.ones(spec.shape, dtype=bool)
    if len(box) != spec.d:
        raise ValidationError(f"box needs {spec.d} intervals, got {len(box)}")
    out = np.ones(spec.shape, dtype=bool)
    for c, (lo, hi) in zip(spec.coords(), box):
        if not lo < hi:
            raise ValidationError(f"empty interval ({lo}, {hi})")
        out &= (c > lo) & (c < hi)
    return out


@dataclass(frozen=True, eq=False)
class DomainMasks:
    """Nested lattice sets ``omega1 ⊂ omega2 ⊂ omega``.

    ``sep_inner`` is the distance from ``omega1`` to the complement of
    ``omega2``, ``sep_outer`` from ``omega2`` to the complement of ``omega``
    (``inf`` when ``omega`` is the whole torus, the one degenerate geometry
    allowed).
    """

    spec: GridSpec
    omega: np.ndarray
    omega2: np.ndarray
    omega1: np.ndarray
    sep_inner: float = field(init=False)
    sep_outer: float = field(init=False)

    def __post_init__(self):
        spec = self.spec
        om, om2, om1 = (_as_mask(spec, m) for m in (self.omega, self.omega2, self.omega1))
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "omega2", om2)
        object.__setattr__(self, "omega1", om1)
        if not om1.any():
            raise ValidationError("omega1 is empty")
        if np.any(om1 & ~om2) or np.any(om2 & ~om):
            raise ValidationError("masks must be nested: omega1 ⊆ omega2 ⊆ omega")
        if om2.all():
            raise ValidationError("omega2 must have a nonempty complement")
        sep_inner = set_distance(spec, om1, ~om2)
        sep_outer = set_distance(spec, om2, ~om)
        for name, sep in (("omega1/omega2", sep_inner), ("omega2/omega", sep_outer)):
            if sep < 2 * spec.h * (1 - 1e-12):
                raise ValidationError(
                    f"{name} separation {sep:.4g} is below two lattice spacings"
                )
        object.__setattr__(self, "sep_inner", sep_inner)
        object.__setattr__(self, "sep_outer", sep_outer)

    @property
    def separation(self) -> float:
        return min(self.sep_inner, self.sep_outer)


def box_masks(spec: GridSpec, omega, omega2, omega1) -> DomainMasks:
    """Build :class:`DomainMasks` from per-axis box intervals (``omega=None``: whole torus)."""
    return DomainMasks(spec, box_mask(spec, omega), box_mask(spec, omega2), box_mask(spec, omega1))

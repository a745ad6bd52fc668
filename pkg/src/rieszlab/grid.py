"""Uniform-grid scalar fields, Lebesgue and weak norms, dilation, cell sets.

All fields in this package live on a uniform cubic grid covering the box
``[origin - a, origin + a]^d``, sampled at cell centers.  Quadrature is the
midpoint rule throughout, which is exact for step functions aligned to cell
boundaries; that choice keeps every indicator-based check in the test suite
exact up to round-off.

Summation orders are fixed (C order over cells), so all reductions are
bit-reproducible regardless of how callers parallelize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "CellSet",
    "ExponentTriple",
    "make_grid",
    "lebesgue_norm",
    "weak_norm",
    "weak_norm_upper",
    "dyadic_dilate",
    "rescale_domain",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cubic grid with ``n`` cells per axis on a centered box.

    Attributes
    ----------
    dim : int
        Spatial dimension ``d >= 1``.
    n : int
        Cells per axis; the grid has ``n**dim`` cells total.
    half_width : float
        Half the box extent ``a``; each axis covers ``[o - a, o + a)``.
    periodic : tuple of bool
        Per-axis periodicity.  A periodic axis identifies index ``n`` with
        index 0, so no sample is duplicated.
    origin : tuple of float
        Box center per axis (defaults to the coordinate origin).
    """

    dim: int
    n: int
    half_width: float
    periodic: tuple[bool, ...]
    origin: tuple[float, ...]

    @property
    def spacing(self) -> float:
        """Cell width ``h = 2a / n`` (spacing times n spans the axis)."""
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis_centers(self, axis: int = 0) -> np.ndarray:
        """Cell-center coordinates ``o - a + (i + 1/2) h`` along one axis."""
        h = self.spacing
        return self.origin[axis] - self.half_width + (np.arange(self.n) + 0.5) * h

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, each of shape ``self.shape``."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij")) if self.dim > 1 else (axes[0],)

    def compatible(self, other: "Grid") -> bool:
        return (
            self.dim == other.dim
            and self.n == other.n
            and self.periodic == other.periodic
            and math.isclose(self.half_width, other.half_width, rel_tol=1e-12)
            and all(math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-300) for a, b in zip(self.origin, other.origin))
        )


def make_grid(
    dim: int,
    n: int,
    half_width: float,
    periodic: bool | tuple[bool, ...] = True,
    origin: tuple[float, ...] | None = None,
) -> Grid:
    """Build a uniform grid on ``[origin - a, origin + a]^dim``.

    Parameters
    ----------
    dim : int
        Spatial dimension, at least 1.
    n : int
        Cells per axis, at least 2.
    half_width : float
        Positive half extent ``a``; the spacing is ``2 a / n``.
    periodic : bool or tuple of bool
        Torus topology per axis (a single bool applies to all axes).
    origin : tuple of float, optional
        Box center, default the coordinate origin.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if n < 2:
        raise ValueError(f"need at least 2 cells per axis, got {n}")
    if not half_width > 0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    if isinstance(periodic, bool):
        per = (periodic,) * dim
    else:
        per = tuple(bool(p) for p in periodic)
        if len(per) != dim:
            raise ValueError("periodic flags must match dim")
    if origin is None:
        orig = (0.0,) * dim
    else:
        orig = tuple(float(x) for x in origin)
        if len(orig) != dim:
            raise ValueError("origin must match dim")
    return Grid(dim=dim, n=int(n), half_width=float(half_width), periodic=per, origin=orig)


class GridFunction:
    """Scalar field sampled at cell centers; values are immutable.

    Parameters
    ----------
    grid : Grid
    values : array_like
        Shape ``grid.shape`` (or flat of length ``grid.size``), finite.
    nonneg_hint : bool
        Declares the field nonnegative; validated at construction.
    """

    __slots__ = ("grid", "values", "nonneg_hint")

    def __init__(self, grid: Grid, values: np.ndarray, nonneg_hint: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != grid.shape:
            arr = arr.reshape(grid.shape)
        else:
            arr = arr.copy()
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        if nonneg_hint and arr.min(initial=0.0) < 0.0:
            raise ValueError("nonneg_hint set but values contain negatives")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "nonneg_hint", bool(nonneg_hint))

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def from_callable(cls, grid: Grid, fn, nonneg_hint: bool = False) -> "GridFunction":
        """Sample ``fn`` (vectorized over coordinate arrays) at cell centers."""
        vals = fn(*grid.coordinates())
        return cls(grid, np.broadcast_to(np.asarray(vals, dtype=np.float64), grid.shape), nonneg_hint)

    @classmethod
    def indicator_box(cls, grid: Grid, lo, hi) -> "GridFunction":
        """Indicator of the axis-aligned box ``[lo, hi)`` (by cell centers)."""
        return CellSet.from_box(grid, lo, hi).indicator()

    def _check_same_grid(self, other: "GridFunction"):
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def integral(self) -> float:
        """Midpoint-rule integral over the box."""
        return float(np.sum(self.values)) * self.grid.cell_volume


@dataclass(frozen=True)
class CellSet:
    """Union of grid cells, the only measurable sets used by the toolkit."""

    grid: Grid
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            m = m.reshape(self.grid.shape)
        else:
            m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_box(cls, grid: Grid, lo, hi) -> "CellSet":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        coords = grid.coordinates()
        mask = np.ones(grid.shape, dtype=bool)
        for a in range(grid.dim):
            mask &= (coords[a] >= lo[a]) & (coords[a] < hi[a])
        return cls(grid, mask)

    @classmethod
    def empty(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @property
    def measure(self) -> float:
        return float(self.mask.sum()) * self.grid.cell_volume

    def indicator(self) -> GridFunction:
        return GridFunction(self.grid, self.mask.astype(np.float64), nonneg_hint=True)

    def union(self, other: "CellSet") -> "CellSet":
        return CellSet(self.grid, self.mask | other.mask)


@dataclass(frozen=True)
class ExponentTriple:
    """Integrability exponents ``(p, q, r)`` tied to ``alpha`` and dimension.

    The triple is called scaling-consistent when
    ``1/p + 1/q = 1/r + alpha/dim`` holds to 1e-12.
    """

    p: float
    q: float
    r: float
    alpha: float
    dim: int

    def __post_init__(self):
        if min(self.p, self.q, self.r) <= 0:
            raise ValueError("exponents must be positive")
        if not 0 < self.alpha < self.dim:
            raise ValueError("alpha must lie in (0, dim)")

    @property
    def scaling_defect(self) -> float:
        return (1.0 / self.p + 1.0 / self.q) - (1.0 / self.r + self.alpha / self.dim)

    @property
    def scaling_consistent(self) -> bool:
        return abs(self.scaling_defect) <= 1e-12

    @classmethod
    def from_pq(cls, p: float, q: float, alpha: float, dim: int) -> "ExponentTriple":
        """Complete ``(p, q)`` with the ``r`` fixed by the scaling relation."""
        inv_r = 1.0 / p + 1.0 / q - alpha / dim
        if inv_r <= 0:
            raise ValueError(f"scaling relation gives nonpositive 1/r for p={p}, q={q}")
        return cls(p=p, q=q, r=1.0 / inv_r, alpha=alpha, dim=dim)


def lebesgue_norm(f: GridFunction, p: float) -> float:
    """Midpoint-rule L^p (quasi-)norm; ``p = inf`` gives the max norm.

    For ``0 < p < 1`` this is the usual quasi-norm expression
    ``(sum |f|^p h^d)**(1/p)``; it is exact for step functions.
    """
    v = np.abs(f.values)
    if p == math.inf or p == np.inf:
        return float(v.max(initial=0.0))
    if not p > 0:
        raise ValueError(f"norm exponent must be positive, got {p}")
    vol = f.grid.cell_volume
    return float(np.sum(v**p) * vol) ** (1.0 / p)


def weak_norm(f: GridFunction, r: float) -> float:
    """Weak-L^r quasi-norm, exact for the step functions a grid carries.

    Equals ``sup_v  v * measure{|f| >= v}^(1/r)`` with ``v`` running over
    the achieved values of ``|f|``, which realizes the supremum over all
    positive thresholds for piecewise-constant fields.
    """
    if not r > 0:
        raise ValueError(f"weak exponent must be positive, got {r}")
    v = np.sort(np.abs(f.values).ravel())[::-1]
    if v.size == 0 or v[0] == 0.0:
        return 0.0
    counts = np.arange(1, v.size + 1, dtype=np.float64)
    scores = v * (counts * f.grid.cell_volume) ** (1.0 / r)
    return float(scores.max())


def weak_norm_upper(f: GridFunction, r: float, s: float) -> float:
    """Super-level-set bound dominating the weak-L^r quasi-norm.

    Evaluates ``|E|^(1/r - 1/s) (int_E |f|^s)^(1/s)`` over the family of
    super-level sets ``E = {|f| >= v}`` for achieved values ``v`` and
    returns the largest score.  Always at least ``weak_norm(f, r)``.
    """
    if not 0 < s < r:
        raise ValueError(f"need 0 < s < r, got s={s}, r={r}")
    v = np.sort(np.abs(f.values).ravel())[::-1]
    if v.size == 0 or v[0] == 0.0:
        return 0.0
    vol = f.grid.cell_volume
    csum = np.cumsum(v**s) * vol
    meas = np.arange(1, v.size + 1, dtype=np.float64) * vol
    # indices closing a level set: last occurrence of each distinct value
    boundary = np.flatnonzero(np.diff(v) != 0.0)
    boundary = np.append(boundary, v.size - 1)
    boundary = boundary[v[boundary] > 0.0]
    scores = meas[boundary] ** (1.0 / r - 1.0 / s) * csum[boundary] ** (1.0 / s)
    return float(scores.max())


def _coarsen_axis(values: np.ndarray, axis: int, factor: int, n: int, periodic: bool) -> np.ndarray:
    """Average over the length-``factor`` source blocks that each target cell
    maps onto under ``x -> factor * x`` (blocks align with cell boundaries)."""
    i = np.arange(n)
    m0 = (n // 2) * (1 - factor) + factor * i
    idx = m0[:, None] + np.arange(factor)[None, :]
    moved = np.moveaxis(values, axis, 0)
    if periodic:
        gathered = moved[idx % n]
        out = gathered.mean(axis=1)
    else:
        valid = (idx >= 0) & (idx < n)
        gathered = moved[np.clip(idx, 0, n - 1)]
        gathered = np.where(valid.reshape(idx.shape + (1,) * (moved.ndim - 1)), gathered, 0.0)
        out = gathered.sum(axis=1) / factor
    return np.moveaxis(out, 0, axis)


def _refine_axis(values: np.ndarray, axis: int, factor: int, n: int) -> np.ndarray:
    """Sample the source cell containing ``x / factor`` for each target cell;
    the map never lands on a source boundary, so the lookup is exact."""
    i = np.arange(n)
    m = (2 * i + 1 + n * (factor - 1)) // (2 * factor)
    moved = np.moveaxis(values, axis, 0)
    return np.moveaxis(moved[m], 0, axis)


def dyadic_dilate(f: GridFunction, k: int) -> GridFunction:
    """Resample ``x -> f(2^k x)`` on the same grid, exactly for step data.

    For ``k >= 1`` each target cell covers ``2^(k d)`` source cells and takes
    their mean (zero extension outside a non-periodic box, wrap on a torus);
    for ``k <= -1`` each target cell sits inside one source cell and copies
    its value.  Requires ``n`` divisible by ``2^|k|``.
    """
    if k == 0:
        return GridFunction(f.grid, f.values, f.nonneg_hint)
    factor = 2 ** abs(int(k))
    g = f.grid
    if g.n % factor != 0:
        raise ValueError(f"cells per axis {g.n} not divisible by 2^|k| = {factor}")
    vals = f.values
    for axis in range(g.dim):
        if k > 0:
            vals = _coarsen_axis(vals, axis, factor, g.n, g.periodic[axis])
        else:
            vals = _refine_axis(vals, axis, factor, g.n)
    return GridFunction(g, vals, nonneg_hint=f.nonneg_hint)


def rescale_domain(f: GridFunction, scale: float) -> GridFunction:
    """View ``f`` as ``x -> f(x / scale)`` on the box scaled by ``scale``.

    The samples are untouched; only the grid geometry changes.  With
    ``scale = 2**-k`` this realizes the dyadic dilate on the nested grid,
    for which norm and operator scalings hold to round-off.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    g = f.grid
    newgrid = replace(g, half_width=g.half_width * scale, origin=tuple(o * scale for o in g.origin))
    return GridFunction(newgrid, f.values, f.nonneg_hint)

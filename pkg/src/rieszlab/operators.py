"""Riesz kernels and the bilinear integral operators built on them.

The singular kernel ``|y|^(alpha - d)`` mediates a nonlocal pair interaction.
This module evaluates

* the pointwise and cell-averaged kernel,
* the linear potential ``g -> int g(x - y) |y|^(alpha-d) dy``,
* the sheared bilinear operator
  ``(f, g) -> int f(x + (theta-1) y) g(x + theta y) |y|^(alpha-d) dy``
  together with its unit-ball and dyadic-ball truncations and the dyadic
  envelope majorant,
* the symmetric interaction stress tensor whose divergence reproduces the
  interaction force ``rho grad(K * rho)``, including a general radial-kernel
  variant.

Discretization conventions: integrals over the displacement ``y`` run over
the fundamental cube of the grid (one displacement cell per grid cell, no
lattice images); sheared arguments are sampled by multilinear interpolation
with periodic wrap; ball membership is decided by the cell-center distance.
Whole-space experiments must keep supports far enough from the box edge that
the wrap never connects them, which callers enforce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, GridFunction
from . import storage

__all__ = [
    "OperatorParams",
    "ThetaQuadrature",
    "SymTensorField",
    "riesz_kernel",
    "cell_averaged_kernel",
    "riesz_potential",
    "interaction_potential",
    "bilinear_op",
    "truncated_unit",
    "truncated_dyadic",
    "dyadic_envelope",
    "interaction_tensor",
    "interaction_stress",
    "radial_kernel_stress",
    "interaction_force_direct",
    "interaction_force_divergence",
    "tensor_divergence",
]

# fancy-indexed displacement matrices are chunked above this element count
_MATRIX_BUDGET = 6_000_000


@dataclass(frozen=True)
class OperatorParams:
    """Kernel and shear parameters shared by the operators.

    ``kernel_profile`` is either the string ``"riesz"`` (profile
    ``s^(alpha-d) / (d-alpha)`` with radial derivative ``-s^(alpha-d-1)``) or
    a callable giving a custom radial derivative ``s -> K'(s)``.
    """

    alpha: float
    dim: int
    theta: float = 0.0
    kernel_profile: object = "riesz"

    def __post_init__(self):
        if not 0.0 < self.alpha < self.dim:
            raise ValueError(f"alpha must lie in (0, dim), got {self.alpha} with dim {self.dim}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class ThetaQuadrature:
    """Quadrature on the shear interval [0, 1]; weights are positive and sum to 1."""

    rule: str
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be matching 1-d arrays")
        if weights.min(initial=1.0) <= 0.0 or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return self.nodes.size

    @classmethod
    def gauss_legendre(cls, n: int = 16) -> "ThetaQuadrature":
        x, w = np.polynomial.legendre.leggauss(n)
        return cls("gauss_legendre", (x + 1.0) / 2.0, w / 2.0)

    @classmethod
    def midpoint(cls, n: int = 16) -> "ThetaQuadrature":
        return cls("midpoint", (np.arange(n) + 0.5) / n, np.full(n, 1.0 / n))


class SymTensorField:
    """Symmetric d x d matrix field with upper-triangular storage."""

    __slots__ = ("grid", "entries", "_index")

    def __init__(self, grid: Grid, entries: np.ndarray):
        d = grid.dim
        n_entries = d * (d + 1) // 2
        arr = np.asarray(entries, dtype=np.float64)
        if arr.shape != (n_entries,) + grid.shape:
            raise ValueError(f"entries must have shape {(n_entries,) + grid.shape}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "entries", arr)
        index = {}
        k = 0
        for a in range(d):
            for b in range(a, d):
                index[(a, b)] = k
                index[(b, a)] = k
                k += 1
        object.__setattr__(self, "_index", index)

    def __setattr__(self, name, value):
        raise AttributeError("SymTensorField is immutable")

    @classmethod
    def zeros(cls, grid: Grid) -> "SymTensorField":
        d = grid.dim
        return cls(grid, np.zeros((d * (d + 1) // 2,) + grid.shape))

    @property
    def entry_names(self) -> list[str]:
        d = self.grid.dim
        return [f"s{a + 1}{b + 1}" for a in range(d) for b in range(a, d)]

    def entry(self, a: int, b: int) -> np.ndarray:
        return self.entries[self._index[(a, b)]]

    def trace(self) -> GridFunction:
        d = self.grid.dim
        tr = sum(self.entry(a, a) for a in range(d))
        return GridFunction(self.grid, tr)

    def as_matrices(self) -> np.ndarray:
        """Dense per-cell matrices, shape ``grid.shape + (d, d)``."""
        d = self.grid.dim
        out = np.empty(self.grid.shape + (d, d))
        for a in range(d):
            for b in range(d):
                out[..., a, b] = self.entry(a, b)
        return out

    def eigenvalues(self) -> np.ndarray:
        """Per-cell eigenvalues (ascending), shape ``grid.shape + (d,)``."""
        if self.grid.dim == 1:
            return self.entries[0][..., None]
        return np.linalg.eigvalsh(self.as_matrices())

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues().min())

    def operator_norm(self) -> np.ndarray:
        """Per-cell spectral norm."""
        return np.abs(self.eigenvalues()).max(axis=-1)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-vector product with a constant vector, shape ``(d,) + shape``."""
        d = self.grid.dim
        out = np.zeros((d,) + self.grid.shape)
        for a in range(d):
            for b in range(d):
                out[a] += self.entry(a, b) * vec[b]
        return out

    def scaled(self, c: float) -> "SymTensorField":
        return SymTensorField(self.grid, self.entries * c)

    def __add__(self, other: "SymTensorField") -> "SymTensorField":
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch")
        return SymTensorField(self.grid, self.entries + other.entries)

    def __sub__(self, other: "SymTensorField") -> "SymTensorField":
        if not self.grid.compatible(other.grid):
            raise ValueError("grid mismatch")
        return SymTensorField(self.grid, self.entries - other.entries)

    def save(self, path) -> None:
        storage.write_channels(path, self.grid, {n: e for n, e in zip(self.entry_names, self.entries)})

    @classmethod
    def load(cls, path) -> "SymTensorField":
        grid, channels = storage.read_channels(path)
        return cls(grid, np.stack([channels[n] for n in sorted(channels)]))


# ---------------------------------------------------------------------------
# kernel evaluation


def riesz_kernel(params: OperatorParams, x) -> float:
    """Pointwise kernel ``|x|^(alpha - d) / (d - alpha)``; singular at 0."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    if r == 0.0:
        raise ValueError("kernel is singular at the origin; use cell_averaged_kernel")
    a, d = params.alpha, params.dim
    return r ** (a - d) / (d - a)


def _gauss_nodes(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    return mid + half * x, half * w


def _origin_cell_mass(alpha: float, dim: int, h: float) -> float:
    """Exact integral of ``|y|^(alpha-d)`` over the origin cell ``[-h/2, h/2]^d``.

    d = 1 has a closed form; d = 2 reduces to a smooth polar angle integral;
    higher d uses the exact inscribed-ball integral plus a midpoint estimate
    for the corner remainder (consistent at the scheme order).
    """
    half = h / 2.0
    if dim == 1:
        return 2.0 * half**alpha / alpha
    if dim == 2:
        phi, w = _gauss_nodes(48, 0.0, math.pi / 4.0)
        angular = 8.0 * float(np.sum(w * np.cos(phi) ** (-alpha)))
        return angular * half**alpha / alpha
    surface = 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)
    ball = surface * half**alpha / alpha
    ball_volume = math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0) * half**dim
    corner_radius = half * (1.0 + math.sqrt(dim)) / 2.0
    return ball + (h**dim - ball_volume) * corner_radius ** (alpha - dim)


def _offsets(grid: Grid) -> np.ndarray:
    """Integer displacement offsets covering the fundamental cube, C order.

    Per axis the offsets are ``[-(n//2), ..., n//2 - 1]`` reordered so that
    index arithmetic ``(i - o) % n`` reproduces the torus geometry.
    """
    n = grid.n
    axis = np.where(np.arange(n) < (n + 1) // 2, np.arange(n), np.arange(n) - n)
    if grid.dim == 1:
        return axis[:, None].astype(np.int64)
    grids = np.meshgrid(*([axis] * grid.dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


_TABLE_CACHE: dict = {}


def _grid_key(grid: Grid) -> tuple:
    return (grid.dim, grid.n, grid.half_width)


def _is_nyquist(offs: np.ndarray, n: int) -> np.ndarray:
    return offs == -(n // 2) if n % 2 == 0 else np.zeros_like(offs, dtype=bool)


def _scalar_kernel_table(grid: Grid, alpha: float) -> np.ndarray:
    """Cell averages of ``|y|^(alpha - d)`` per displacement cell.

    In one dimension the averages are exact everywhere via the antiderivative
    ``sign(y) |y|^alpha / alpha`` (midpoint values near the origin would
    pollute convergence of the divergence identity); in higher dimensions the
    origin cell is exact and other cells use the midpoint value.
    """
    key = ("scalar", _grid_key(grid), alpha)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    offs = _offsets(grid)
    h = grid.spacing
    d = grid.dim
    if d == 1:
        y = offs[:, 0] * h

        def anti(t):
            return np.sign(t) * np.abs(t) ** alpha / alpha

        table = (anti(y + h / 2.0) - anti(y - h / 2.0)) / h
        nyq = _is_nyquist(offs[:, 0], grid.n)
        if nyq.any():
            a = grid.half_width
            table[nyq] = 2.0 * (anti(a) - anti(a - h / 2.0)) / h
        table[offs[:, 0] == 0] = _origin_cell_mass(alpha, 1, h) / h
    else:
        r = np.linalg.norm(offs * h, axis=1)
        origin = r == 0.0
        table = np.zeros(offs.shape[0])
        table[~origin] = r[~origin] ** (alpha - d)
        table[origin] = _origin_cell_mass(alpha, d, h) / h**d
    table = np.ascontiguousarray(table)
    table.flags.writeable = False
    _TABLE_CACHE[key] = table
    return table


def _tensor_kernel_table(grid: Grid, alpha: float) -> np.ndarray:
    """Cell averages of ``|y|^(alpha-d-2) y_a y_b`` per displacement cell,
    one column per upper-triangular entry.  The origin cell carries
    ``delta_ab / d`` times the scalar origin mass (exact by symmetry)."""
    key = ("tensor", _grid_key(grid), alpha)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    offs = _offsets(grid)
    h = grid.spacing
    d = grid.dim
    if d == 1:
        # |y|^(alpha-3) y^2 = |y|^(alpha-1): identical to the scalar table
        table = _scalar_kernel_table(grid, alpha)[:, None].copy()
    else:
        y = offs * h
        r = np.linalg.norm(y, axis=1)
        origin = r == 0.0
        radial = np.zeros(offs.shape[0])
        radial[~origin] = r[~origin] ** (alpha - d - 2)
        cols = []
        origin_mass = _origin_cell_mass(alpha, d, h) / h**d
        for a in range(d):
            for b in range(a, d):
                col = radial * y[:, a] * y[:, b]
                if a == b:
                    col[origin] = origin_mass / d
                cols.append(col)
        table = np.stack(cols, axis=1)
    table = np.ascontiguousarray(table)
    table.flags.writeable = False
    _TABLE_CACHE[key] = table
    return table


def _gradient_moment_tables_1d(grid: Grid, alpha: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact cell moments of the odd kernel ``grad K = -sign(y) |y|^(alpha-2)``.

    Returns per-displacement-cell integrals ``M0 = int grad K``,
    ``M1 = int grad K (y - y_m)`` and ``M2 = int grad K (y - y_m)^2``.  Plain
    cell averages (M0 alone) converge only like ``h^alpha`` for this
    non-integrable odd kernel because the first-moment errors of mirror cells
    reinforce; pairing the moments with a local Taylor expansion of the
    density restores second-order accuracy.
    """
    key = ("grad-moments", _grid_key(grid), alpha)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    if alpha == 1.0:
        raise ValueError("alpha = 1 is outside (0, d) in one dimension")
    n = grid.n
    h = grid.spacing
    o = _offsets(grid)[:, 0]
    y = o * h

    def p0(t):  # antiderivative of -t^(alpha-2) on t > 0, extended evenly
        return np.abs(t) ** (alpha - 1.0) / (1.0 - alpha)

    def p1(t):  # antiderivative of -t^(alpha-1), extended oddly
        return -np.sign(t) * np.abs(t) ** alpha / alpha

    def p2(t):  # antiderivative of -t^alpha, extended evenly
        return -np.abs(t) ** (alpha + 1.0) / (alpha + 1.0)

    m0 = np.zeros(o.size)
    m1 = np.zeros(o.size)
    m2 = np.zeros(o.size)
    pos = o > 0
    neg = o < 0
    for sel, sign in ((pos, 1.0), (neg, -1.0)):
        if not sel.any():
            continue
        c = np.abs(y[sel])
        lo, hi = c - h / 2.0, c + h / 2.0
        d0 = p0(hi) - p0(lo)
        d1 = p1(hi) - p1(lo)
        d2 = p2(hi) - p2(lo)
        # mirror cell: kernel odd, first moment even, second moment odd
        m0[sel] = sign * d0
        m1[sel] = d1 - c * d0
        m2[sel] = sign * (d2 - 2.0 * c * d1 + c * c * d0)
    origin = o == 0
    m1[origin] = -2.0 * (h / 2.0) ** alpha / alpha
    nyq = _is_nyquist(o, n)
    if nyq.any():
        a = grid.half_width
        d0 = p0(a) - p0(a - h / 2.0)
        d1 = p1(a) - p1(a - h / 2.0)
        m0[nyq] = 0.0
        m1[nyq] = 2.0 * (d1 - a * d0)
        m2[nyq] = 0.0
    tables = tuple(np.ascontiguousarray(t) for t in (m0, m1, m2))
    for t in tables:
        t.flags.writeable = False
    _TABLE_CACHE[key] = tables
    return tables


def _gradient_kernel_table(grid: Grid, alpha: float) -> np.ndarray:
    """Midpoint values of ``grad K = -|y|^(alpha-d-2) y`` per displacement
    cell for d >= 2, with odd components zeroed where symmetry demands it."""
    key = ("gradient", _grid_key(grid), alpha)
    hit = _TABLE_CACHE.get(key)
    if hit is not None:
        return hit
    offs = _offsets(grid)
    h = grid.spacing
    d = grid.dim
    n = grid.n
    table = np.zeros((offs.shape[0], d))
    y = offs * h
    r = np.linalg.norm(y, axis=1)
    ok = r > 0.0
    radial = np.zeros(offs.shape[0])
    radial[ok] = -(r[ok] ** (alpha - d - 2))
    for a in range(d):
        col = radial * y[:, a]
        col[_is_nyquist(offs[:, a], n)] = 0.0
        table[:, a] = col
    table = np.ascontiguousarray(table)
    table.flags.writeable = False
    _TABLE_CACHE[key] = table
    return table


def cell_averaged_kernel(params: OperatorParams, cell, h: float) -> float:
    """Average of ``|y|^(alpha - d)`` over the displacement cell at integer
    offset ``cell`` of a grid with spacing ``h``.

    The origin cell is exact; elsewhere the value is the closed-form average
    in one dimension and the midpoint value in higher dimensions.
    """
    offs = np.atleast_1d(np.asarray(cell, dtype=np.int64))
    if offs.size != params.dim:
        raise ValueError("cell offset must have one index per axis")
    a, d = params.alpha, params.dim
    if np.all(offs == 0):
        return _origin_cell_mass(a, d, h) / h**d
    if d == 1:
        y = float(offs[0]) * h

        def anti(t):
            return math.copysign(abs(t) ** a / a, t)

        return (anti(y + h / 2.0) - anti(y - h / 2.0)) / h
    r = float(np.linalg.norm(offs * h))
    return r ** (a - d)


# ---------------------------------------------------------------------------
# displacement-sum engine


def _shift_sample(values: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Sample ``x -> values(x + shift * h)`` by periodic multilinear interpolation."""
    out = values
    for axis in range(values.ndim):
        t = float(shift[axis])
        c = math.floor(t)
        w = t - c
        lo = np.roll(out, -c, axis=axis)
        if w == 0.0:
            out = lo
        else:
            out = (1.0 - w) * lo + w * np.roll(out, -(c + 1), axis=axis)
    return out


def _pair_sum_1d(fv, gv, theta, offs, weights, n):
    """1-d path: fancy-indexed (n, chunk) displacement matrices.

    The integrand ``f(x + (theta-1) y) g(x + theta y)`` is the on-grid
    product ``Q_m(z) = f(z - y_m) g(z)`` sampled at ``z = x + theta y_m``,
    so only that single product field is interpolated.  Summing a lerped
    field over the torus returns the field's own sum, which keeps the
    Fubini-side mass identities exact for every shear value.
    """
    n_cols = weights.shape[1]
    out = [np.zeros(n) for _ in range(n_cols)]
    ii = np.arange(n)[:, None]
    chunk = max(1, _MATRIX_BUDGET // n)
    o = offs[:, 0]
    for start in range(0, o.size, chunk):
        ob = o[start : start + chunk]
        Q = fv[(ii - ob[None, :]) % n] * gv[:, None]
        tg = theta * ob
        cg = np.floor(tg).astype(np.int64)
        wg = tg - cg
        idx = (ii + cg[None, :]) % n
        P = np.take_along_axis(Q, idx, axis=0) * (1.0 - wg)
        P += np.take_along_axis(Q, (idx + 1) % n, axis=0) * wg
        for c in range(n_cols):
            out[c] += P @ weights[start : start + chunk, c]
    return out


def _pair_sum_nd(fv, gv, theta, offs, weights):
    """General path: per-displacement product field, then one interpolation."""
    n_cols = weights.shape[1]
    axes = tuple(range(fv.ndim))
    out = [np.zeros(fv.shape) for _ in range(n_cols)]
    for m in range(offs.shape[0]):
        if not weights[m].any():
            continue
        Q = np.roll(fv, shift=tuple(offs[m]), axis=axes) * gv
        P = _shift_sample(Q, theta * offs[m])
        for c in range(n_cols):
            if weights[m, c] != 0.0:
                out[c] += weights[m, c] * P
    return out


def _pair_sum(f: GridFunction, g: GridFunction, theta: float, offs: np.ndarray, weights: np.ndarray):
    """Fields ``x -> sum_m w[m, c] f(x + (theta-1) y_m) g(x + theta y_m)``.

    ``weights`` has one column per output channel and already includes the
    volume element.  Returns a list of arrays, one per column.
    """
    if not f.grid.compatible(g.grid):
        raise ValueError("grid mismatch")
    if f.grid.dim == 1:
        return _pair_sum_1d(f.values, g.values, theta, offs, weights, f.grid.n)
    return _pair_sum_nd(f.values, g.values, theta, offs, weights)


def _theta_batch_tensor_2d(fv, gv, tq: ThetaQuadrature, offs, weights, n):
    """2-d tensor path: the product field is shared across quadrature nodes
    and interpolated for all of them at once per displacement."""
    n_cols = weights.shape[1]
    out = [np.zeros((n, n)) for _ in range(n_cols)]
    thetas = tq.nodes
    qw = tq.weights
    ii = np.arange(n)

    def lerp_batch(values, t):  # t: per-node shift along one fixed offset, shape (nq, 2)
        c = np.floor(t).astype(np.int64)
        w = t - c
        idx0 = (ii[None, :] + c[:, 0:1]) % n
        a0 = values[idx0] * (1.0 - w[:, 0, None, None]) + values[(idx0 + 1) % n] * w[:, 0, None, None]
        idx1 = (ii[None, :] + c[:, 1:2]) % n
        take = np.take_along_axis(a0, idx1[:, None, :], axis=2)
        take1 = np.take_along_axis(a0, (idx1 + 1)[:, None, :] % n, axis=2)
        return take * (1.0 - w[:, 1, None, None]) + take1 * w[:, 1, None, None]

    for m in range(offs.shape[0]):
        if not weights[m].any():
            continue
        o = offs[m].astype(float)
        Q = np.roll(fv, shift=tuple(offs[m]), axis=(0, 1)) * gv
        P = np.einsum("q,qij->ij", qw, lerp_batch(Q, thetas[:, None] * o[None, :]))
        for c in range(n_cols):
            out[c] += weights[m, c] * P
    return out


def _require_nonneg(*fields: GridFunction):
    for f in fields:
        if f.values.min(initial=0.0) < -1e-12 * max(1.0, float(np.abs(f.values).max(initial=0.0))):
            raise ValueError("operator requires nonnegative inputs")


# ---------------------------------------------------------------------------
# linear potential and forces


def riesz_potential(g: GridFunction, params: OperatorParams) -> GridFunction:
    """Unnormalized potential ``x -> sum_cells g(x - y) avg|y|^(alpha-d) h^d``."""
    grid = g.grid
    offs = _offsets(grid)
    table = _scalar_kernel_table(grid, params.alpha) * grid.cell_volume
    if grid.dim == 1:
        n = grid.n
        ii = np.arange(n)[:, None]
        out = np.zeros(n)
        chunk = max(1, _MATRIX_BUDGET // n)
        o = offs[:, 0]
        for s in range(0, o.size, chunk):
            ob = o[s : s + chunk]
            out += g.values[(ii - ob[None, :]) % n] @ table[s : s + chunk]
        return GridFunction(grid, out)
    out = np.zeros(grid.shape)
    for m in range(offs.shape[0]):
        out += table[m] * np.roll(g.values, shift=tuple(offs[m]), axis=tuple(range(grid.dim)))
    return GridFunction(grid, out)


def interaction_potential(g: GridFunction, params: OperatorParams) -> GridFunction:
    """Normalized potential ``K * g`` with ``K = |y|^(alpha-d) / (d-alpha)``."""
    return riesz_potential(g, params) * (1.0 / (params.dim - params.alpha))


def _correlate_1d(values: np.ndarray, offsets: np.ndarray, table: np.ndarray, n: int) -> np.ndarray:
    """Circular correlation ``x -> sum_m table[m] values(x - y_m)``."""
    ii = np.arange(n)[:, None]
    out = np.zeros(n)
    chunk = max(1, _MATRIX_BUDGET // n)
    for s in range(0, offsets.size, chunk):
        ob = offsets[s : s + chunk]
        out += values[(ii - ob[None, :]) % n] @ table[s : s + chunk]
    return out


def interaction_force_direct(rho: GridFunction, params: OperatorParams) -> tuple[GridFunction, ...]:
    """Force density ``rho * (grad K * rho)`` per component.

    The odd kernel gradient is integrated exactly over each displacement
    cell; in one dimension the within-cell density variation is carried to
    second order by exact kernel moments paired with centered-difference
    derivatives of the density (plain cell averages of this non-integrable
    odd kernel lose the mirror-pair cancellation and stall near ``h^alpha``).
    The origin cell carries no self-interaction and constant densities feel
    zero net force to round-off.
    """
    grid = rho.grid
    offs = _offsets(grid)
    comps = []
    if grid.dim == 1:
        n = grid.n
        h = grid.spacing
        o = offs[:, 0]
        m0, m1, m2 = _gradient_moment_tables_1d(grid, params.alpha)
        v = rho.values
        dv = (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * h)
        ddv = (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / (h * h)
        conv = (
            _correlate_1d(v, o, m0, n)
            - _correlate_1d(dv, o, m1, n)
            + 0.5 * _correlate_1d(ddv, o, m2, n)
        )
        comps.append(GridFunction(grid, v * conv))
    else:
        table = _gradient_kernel_table(grid, params.alpha) * grid.cell_volume
        for a in range(grid.dim):
            conv = np.zeros(grid.shape)
            for m in range(offs.shape[0]):
                if table[m, a] != 0.0:
                    conv += table[m, a] * np.roll(rho.values, shift=tuple(offs[m]), axis=tuple(range(grid.dim)))
            comps.append(GridFunction(grid, rho.values * conv))
    return tuple(comps)


def _axis_derivative(values: np.ndarray, axis: int, h: float, scheme: str) -> np.ndarray:
    if scheme == "centered-2":
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    if scheme == "centered-4":
        return (
            -np.roll(values, -2, axis=axis)
            + 8.0 * np.roll(values, -1, axis=axis)
            - 8.0 * np.roll(values, 1, axis=axis)
            + np.roll(values, 2, axis=axis)
        ) / (12.0 * h)
    raise ValueError(f"unknown finite-difference scheme {scheme!r}")


def tensor_divergence(tensor: SymTensorField, scheme: str = "centered-2") -> tuple[GridFunction, ...]:
    """Row-wise discrete divergence of a symmetric tensor field."""
    grid = tensor.grid
    h = grid.spacing
    comps = []
    for a in range(grid.dim):
        div = np.zeros(grid.shape)
        for b in range(grid.dim):
            div += _axis_derivative(tensor.entry(a, b), b, h, scheme)
        comps.append(GridFunction(grid, div))
    return tuple(comps)


def interaction_force_divergence(
    rho: GridFunction,
    params: OperatorParams,
    tq: ThetaQuadrature | None = None,
    scheme: str = "centered-2",
) -> tuple[GridFunction, ...]:
    """Interaction force computed as the divergence of the stress tensor.

    Converges to :func:`interaction_force_direct` under grid refinement at
    the order of the finite-difference scheme.
    """
    tq = tq or ThetaQuadrature.gauss_legendre(16)
    return tensor_divergence(interaction_stress(rho, params, tq), scheme)


# ---------------------------------------------------------------------------
# bilinear operators


def bilinear_op(f: GridFunction, g: GridFunction, params: OperatorParams) -> GridFunction:
    """Sheared bilinear pairing against the full singular kernel."""
    _require_nonneg(f, g)
    grid = f.grid
    offs = _offsets(grid)
    weights = (_scalar_kernel_table(grid, params.alpha) * grid.cell_volume)[:, None]
    (out,) = _pair_sum(f, g, params.theta, offs, weights)
    return GridFunction(grid, out)


def _ball_offsets(grid: Grid, radius: float) -> np.ndarray:
    if radius > grid.half_width:
        raise ValueError(f"ball radius {radius} exceeds the box half-width {grid.half_width}")
    offs = _offsets(grid)
    r = np.linalg.norm(offs * grid.spacing, axis=1)
    return offs[r <= radius]


def truncated_unit(f: GridFunction, g: GridFunction, theta: float) -> GridFunction:
    """Sheared pairing with kernel 1 on the unit ball, 0 outside."""
    _require_nonneg(f, g)
    grid = f.grid
    offs = _ball_offsets(grid, 1.0)
    weights = np.full((offs.shape[0], 1), grid.cell_volume)
    (out,) = _pair_sum(f, g, theta, offs, weights)
    return GridFunction(grid, out)


def truncated_dyadic(f: GridFunction, g: GridFunction, theta: float, j: int) -> GridFunction:
    """Sheared pairing with kernel 1 on the ball of radius ``2^j``."""
    _require_nonneg(f, g)
    grid = f.grid
    offs = _ball_offsets(grid, 2.0 ** float(j))
    weights = np.full((offs.shape[0], 1), grid.cell_volume)
    (out,) = _pair_sum(f, g, theta, offs, weights)
    return GridFunction(grid, out)


def dyadic_envelope(f: GridFunction, g: GridFunction, params: OperatorParams, j_range) -> GridFunction:
    """Annulus majorant ``2^(d-alpha) sum_j 2^((alpha-d) j) I_j`` over ``j_range``.

    Dominates :func:`bilinear_op` pointwise once ``j_range`` spans the scales
    from below the grid spacing up to the support diameter.
    """
    _require_nonneg(f, g)
    grid = f.grid
    d, alpha = params.dim, params.alpha
    offs = _offsets(grid)
    r = np.linalg.norm(offs * grid.spacing, axis=1)
    js = np.asarray(sorted(j_range), dtype=float)
    radii = 2.0**js
    if radii.size == 0:
        raise ValueError("empty j_range")
    coeff = np.zeros(offs.shape[0])
    for jv, radius in zip(js, radii):
        coeff[r <= radius] += 2.0 ** ((alpha - d) * jv)
    coeff *= 2.0 ** (d - alpha) * grid.cell_volume
    keep = coeff != 0.0
    (out,) = _pair_sum(f, g, params.theta, offs[keep], coeff[keep][:, None])
    return GridFunction(grid, out)


# ---------------------------------------------------------------------------
# stress tensors


def _tensor_from_table(
    f: GridFunction, g: GridFunction, tq: ThetaQuadrature, offs: np.ndarray, table: np.ndarray
) -> SymTensorField:
    grid = f.grid
    weights = table * grid.cell_volume
    if grid.dim == 2:
        cols = _theta_batch_tensor_2d(f.values, g.values, tq, offs, weights, grid.n)
    else:
        cols = None
        for node, w in zip(tq.nodes, tq.weights):
            part = _pair_sum(f, g, node, offs, weights)
            if cols is None:
                cols = [w * p for p in part]
            else:
                for c, p in zip(cols, part):
                    c += w * p
    return SymTensorField(grid, np.stack(cols))


def interaction_tensor(
    f: GridFunction, g: GridFunction, params: OperatorParams, tq: ThetaQuadrature | None = None
) -> SymTensorField:
    """Matrix-valued pairing against ``|y|^(alpha-d-2) y (x) y``, averaged
    over the shear parameter.

    Its trace reproduces the shear-averaged scalar pairing under the same
    quadrature, and its per-cell operator norm never exceeds it.  Signed
    inputs are accepted; positivity claims hold for nonnegative ones.
    """
    if not f.grid.compatible(g.grid):
        raise ValueError("grid mismatch")
    tq = tq or ThetaQuadrature.gauss_legendre(16)
    grid = f.grid
    return _tensor_from_table(f, g, tq, _offsets(grid), _tensor_kernel_table(grid, params.alpha))


def interaction_stress(
    rho: GridFunction, params: OperatorParams, tq: ThetaQuadrature | None = None
) -> SymTensorField:
    """Symmetric stress tensor of one density: half the pair tensor of
    ``(rho, rho)``.  Positive semi-definite for nonnegative densities, and
    its divergence reproduces the interaction force."""
    return interaction_tensor(rho, rho, params, tq).scaled(0.5)


def radial_kernel_stress(
    f: GridFunction,
    params: OperatorParams,
    tq: ThetaQuadrature | None = None,
) -> SymTensorField:
    """Stress tensor for a general radial kernel profile.

    Implements ``-1/2 int int K'(|y|) |y|^-1 f(x + (theta-1) y) f(x + theta y)
    y (x) y dtheta dy`` for the radial derivative ``K'`` carried by
    ``params.kernel_profile``; the Riesz profile reuses the exact tables of
    :func:`interaction_stress` unchanged.
    """
    tq = tq or ThetaQuadrature.gauss_legendre(16)
    if params.kernel_profile == "riesz":
        return interaction_stress(f, params, tq)
    kprime = params.kernel_profile
    if not callable(kprime):
        raise ValueError("kernel_profile must be 'riesz' or a callable radial derivative")
    grid = f.grid
    offs = _offsets(grid)
    y = offs * grid.spacing
    r = np.linalg.norm(y, axis=1)
    radial = np.zeros(offs.shape[0])
    ok = r > 0.0
    radial[ok] = -np.asarray(kprime(r[ok]), dtype=float) / r[ok]
    cols = []
    for a in range(grid.dim):
        for b in range(a, grid.dim):
            cols.append(radial * y[:, a] * y[:, b])
    table = np.stack(cols, axis=1)
    return _tensor_from_table(f, f, tq, offs, table).scaled(0.5)

"""Inequality checks with explicitly tracked proof constants.

Each check measures both sides of an estimate on concrete grid data and
records the tracked constant next to the measured ratio, so scans can
assert ``lhs <= constant * rhs`` and report how much slack the data leaves.

Constants follow the proofs they come from: the unit-ball bound carries
``3^d 5^(2d)``; the dyadic-ball mass bound carries 1; the dyadic-ball
``L^(1/2)`` bound carries ``2^(d j) 3^d 5^(2d)``; the four indicator-set
estimates carry ``max(3^d 5^(2d), nu_d)``; and the capped geometric-scale
sums carry closed forms read off the two geometric series in their proofs.
Restricted weak-type constants chain these together with the annulus
prefactor ``2^(d-alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from .grid import CellSet, ExponentTriple, Grid, GridFunction, lebesgue_norm, make_grid, weak_norm
from .interpolation import classify_region, RegionLabel, strong_type_constant
from .operators import OperatorParams, bilinear_op, riesz_potential, truncated_dyadic, truncated_unit

__all__ = [
    "InequalityReport",
    "ProofConstants",
    "SetPairSampler",
    "kernel_pairing",
    "hls_check",
    "unit_truncation_check",
    "dyadic_truncation_checks",
    "indicator_estimate_suite",
    "capped_scale_sum_sqrt",
    "capped_scale_sum",
    "restricted_weak_type_suite",
    "uniform_bound_scan",
    "ScanReport",
    "boundary_blowup_probe",
    "BlowupReport",
    "log_singular_profile",
    "gaussian_bump",
]


@dataclass(frozen=True)
class InequalityReport:
    """One measured inequality: ``lhs <= tracked_constant * rhs``."""

    name: str
    lhs: float
    rhs: float
    tracked_constant: float
    params: dict
    inputs: dict
    ratio: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            raise ValueError("report sides must be finite")
        ratio = self.lhs / self.rhs if self.rhs > 0.0 else (0.0 if self.lhs == 0.0 else math.inf)
        passed = self.lhs <= self.tracked_constant * self.rhs * (1.0 + 1e-12) + 1e-300
        object.__setattr__(self, "ratio", ratio)
        object.__setattr__(self, "passed", passed)

    def row(self) -> dict:
        out = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant": self.tracked_constant,
            "ratio": self.ratio,
            "passed": self.passed,
        }
        out.update({f"param_{k}": v for k, v in sorted(self.params.items())})
        out.update({f"input_{k}": v for k, v in sorted(self.inputs.items())})
        return out


@dataclass(frozen=True)
class ProofConstants:
    """Closed-form constants tracked through the estimate chain."""

    alpha: float
    dim: int

    @property
    def c_unit(self) -> float:
        """Unit-ball pairing into L^(1/2): 3^d 5^(2d)."""
        return 3.0**self.dim * 5.0 ** (2 * self.dim)

    @property
    def c_dyadic_mass(self) -> float:
        """Dyadic-ball pairing into L^1: plain product of masses."""
        return 1.0

    def c_dyadic_half(self, j: int) -> float:
        """Dyadic-ball pairing into L^(1/2): 2^(d j) 3^d 5^(2d)."""
        return 2.0 ** (self.dim * j) * self.c_unit

    @property
    def nu_d(self) -> float:
        """Unit-ball volume."""
        return math.pi ** (self.dim / 2.0) / math.gamma(self.dim / 2.0 + 1.0)

    @property
    def c_indicator(self) -> float:
        """Shared constant for the four indicator-set estimates."""
        return max(self.c_unit, self.nu_d)

    @property
    def annulus_prefactor(self) -> float:
        """Kernel bound per dyadic annulus: 2^(d - alpha)."""
        return 2.0 ** (self.dim - self.alpha)

    @property
    def c_scale_sum_sqrt(self) -> float:
        """Capped sum with square roots: two geometric series, squared."""
        a, d = self.alpha, self.dim
        return (1.0 / (1.0 - 2.0 ** (-a / 2.0)) + 1.0 / (1.0 - 2.0 ** ((a - d) / 2.0))) ** 2

    @property
    def c_scale_sum(self) -> float:
        """Capped linear sum: two geometric series."""
        a, d = self.alpha, self.dim
        return 1.0 / (1.0 - 2.0**-a) + 1.0 / (1.0 - 2.0 ** (a - d))

    @property
    def restricted(self) -> tuple[float, float, float, float]:
        """Restricted weak-type constants at the four square corners."""
        base = self.annulus_prefactor * self.c_indicator
        c_sqrt = base * self.c_scale_sum_sqrt
        return (c_sqrt, c_sqrt, c_sqrt, base * self.c_scale_sum)


# ---------------------------------------------------------------------------
# samplers


@dataclass
class SetPairSampler:
    """Seeded generator of cell sets for inequality scans.

    Families: ``random-cell-unions`` (a few random blocks inside the
    window), ``nested-cubes``, ``separated-cubes``, ``annuli``.
    """

    grid: Grid
    seed: int
    family: str = "random-cell-unions"
    window: float = 2.0
    max_blocks: int = 3

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)
        if self.window >= self.grid.half_width:
            raise ValueError("sampler window must sit inside the box")

    def _random_union(self) -> CellSet:
        out = CellSet.empty(self.grid)
        n_blocks = int(self._rng.integers(1, self.max_blocks + 1))
        for _ in range(n_blocks):
            lo = self._rng.uniform(-self.window, self.window * 0.6, size=self.grid.dim)
            length = self._rng.uniform(0.05, 0.8, size=self.grid.dim)
            out = out.union(CellSet.from_box(self.grid, lo, lo + length))
        if not out.mask.any():  # window narrower than a cell: take one cell
            mask = np.zeros(self.grid.shape, dtype=bool)
            mask[(self.grid.n // 2,) * self.grid.dim] = True
            out = CellSet(self.grid, mask)
        return out

    def _nested(self) -> tuple[CellSet, CellSet]:
        half = self._rng.uniform(0.3, self.window)
        inner = self._rng.uniform(0.05, half * 0.8)
        center = self._rng.uniform(-self.window + half, self.window - half, size=self.grid.dim)
        big = CellSet.from_box(self.grid, center - half, center + half)
        small = CellSet.from_box(self.grid, center - inner, center + inner)
        return small, big

    def _separated(self) -> tuple[CellSet, CellSet]:
        side = self._rng.uniform(0.1, 0.5)
        gap = self._rng.uniform(0.5, self.window)
        left = CellSet.from_box(
            self.grid, np.full(self.grid.dim, -gap - side), np.full(self.grid.dim, -gap)
        )
        right = CellSet.from_box(
            self.grid, np.full(self.grid.dim, gap), np.full(self.grid.dim, gap + side)
        )
        return left, right

    def _annulus(self) -> CellSet:
        r1 = self._rng.uniform(0.2, self.window * 0.7)
        r2 = r1 + self._rng.uniform(0.1, 0.5)
        coords = self.grid.coordinates()
        rad = np.sqrt(sum(c**2 for c in coords))
        return CellSet(self.grid, (rad >= r1) & (rad < min(r2, self.window)))

    def pair(self) -> tuple[CellSet, CellSet]:
        if self.family == "nested-cubes":
            return self._nested()
        if self.family == "separated-cubes":
            return self._separated()
        if self.family == "annuli":
            return self._annulus(), self._annulus()
        return self._random_union(), self._random_union()

    def triple(self) -> tuple[CellSet, CellSet, CellSet]:
        a, b = self.pair()
        return self._random_union(), a, b

    def pairs(self, count: int):
        return [self.pair() for _ in range(count)]

    def triples(self, count: int):
        return [self.triple() for _ in range(count)]


# ---------------------------------------------------------------------------
# pairing and the basic checks


def kernel_pairing(f: GridFunction, g: GridFunction, alpha: float) -> float:
    """Double integral ``int int f(x) |x-y|^(alpha-d) g(y) dx dy`` by the
    same displacement quadrature the operators use."""
    params = OperatorParams(alpha=alpha, dim=f.grid.dim)
    pot = riesz_potential(g, params)
    return float(np.sum(f.values * pot.values)) * f.grid.cell_volume


def hls_check(f: GridFunction, g: GridFunction, alpha: float, p: float, q: float) -> InequalityReport:
    """Measure the kernel pairing against ``||f||_p ||g||_q``.

    Requires ``1/p + 1/q = 1 + alpha/d`` with ``p, q > 1``.  No sharp
    constant is asserted; the report tracks finiteness and the ratio.
    """
    d = f.grid.dim
    if p <= 1.0 or q <= 1.0:
        raise ValueError("exponents must exceed 1")
    if abs(1.0 / p + 1.0 / q - 1.0 - alpha / d) > 1e-10:
        raise ValueError(f"exponent relation 1/p + 1/q = 1 + alpha/d violated for p={p}, q={q}")
    lhs = abs(kernel_pairing(f, g, alpha))
    rhs = lebesgue_norm(f, p) * lebesgue_norm(g, q)
    return InequalityReport(
        name="kernel-pairing",
        lhs=lhs,
        rhs=rhs,
        tracked_constant=math.inf,
        params={"alpha": alpha, "d": d, "p": p, "q": q},
        inputs={"f_mass": lebesgue_norm(f, 1), "g_mass": lebesgue_norm(g, 1)},
    )


def unit_truncation_check(f: GridFunction, g: GridFunction, theta: float) -> InequalityReport:
    """Unit-ball pairing into L^(1/2) against ``3^d 5^(2d) ||f||_1 ||g||_1``."""
    d = f.grid.dim
    consts = ProofConstants(alpha=d / 2.0, dim=d)  # alpha unused here
    lhs = lebesgue_norm(truncated_unit(f, g, theta), 0.5)
    rhs = lebesgue_norm(f, 1) * lebesgue_norm(g, 1)
    return InequalityReport(
        name="unit-ball-half-norm",
        lhs=lhs,
        rhs=rhs,
        tracked_constant=consts.c_unit,
        params={"d": d, "theta": theta},
        inputs={"f_mass": lebesgue_norm(f, 1), "g_mass": lebesgue_norm(g, 1)},
    )


def dyadic_truncation_checks(
    f: GridFunction, g: GridFunction, theta: float, j: int
) -> tuple[InequalityReport, InequalityReport]:
    """Dyadic-ball pairing: mass bound with constant 1 and the L^(1/2)
    bound with constant ``2^(d j) 3^d 5^(2d)``."""
    d = f.grid.dim
    consts = ProofConstants(alpha=d / 2.0, dim=d)
    field_j = truncated_dyadic(f, g, theta, j)
    rhs = lebesgue_norm(f, 1) * lebesgue_norm(g, 1)
    rep_mass = InequalityReport(
        name="dyadic-ball-mass",
        lhs=lebesgue_norm(field_j, 1),
        rhs=rhs,
        tracked_constant=consts.c_dyadic_mass,
        params={"d": d, "theta": theta, "j": j},
        inputs={"f_mass": lebesgue_norm(f, 1), "g_mass": lebesgue_norm(g, 1)},
    )
    rep_half = InequalityReport(
        name="dyadic-ball-half-norm",
        lhs=lebesgue_norm(field_j, 0.5),
        rhs=rhs,
        tracked_constant=consts.c_dyadic_half(j),
        params={"d": d, "theta": theta, "j": j},
        inputs={"f_mass": lebesgue_norm(f, 1), "g_mass": lebesgue_norm(g, 1)},
    )
    return rep_mass, rep_half


def indicator_estimate_suite(
    E: CellSet, A: CellSet, B: CellSet, theta: float, j: int
) -> list[InequalityReport]:
    """The four indicator-set estimates for the dyadic-ball pairing.

    With ``s1 = (int_E sqrt(I_j))^2`` and ``s4 = int_E I_j`` the bounds are

    * ``s1 <= c |A||B| min(2^(dj), |E|)``
    * ``s1 <= c |A||E| min(2^(dj), |B|)``
    * ``s1 <= c |B||E| min(2^(dj), |A|)``
    * ``s4 <= c min(2^(dj) |E|, |A||B|)``

    with the shared constant ``c = max(3^d 5^(2d), nu_d)``.
    """
    grid = E.grid
    d = grid.dim
    consts = ProofConstants(alpha=d / 2.0, dim=d)
    c = consts.c_indicator
    field_j = truncated_dyadic(A.indicator(), B.indicator(), theta, j)
    vol = grid.cell_volume
    on_E = field_j.values[E.mask]
    s1 = float(np.sum(np.sqrt(on_E)) * vol) ** 2
    s4 = float(np.sum(on_E) * vol)
    mE, mA, mB = E.measure, A.measure, B.measure
    two_dj = 2.0 ** (d * j)
    params = {"d": d, "theta": theta, "j": j}
    inputs = {"measure_E": mE, "measure_A": mA, "measure_B": mB}
    bounds = [
        ("indicator-est-1", s1, mA * mB * min(two_dj, mE)),
        ("indicator-est-2", s1, mA * mE * min(two_dj, mB)),
        ("indicator-est-3", s1, mB * mE * min(two_dj, mA)),
        ("indicator-est-4", s4, min(two_dj * mE, mA * mB)),
    ]
    return [
        InequalityReport(name=n, lhs=lhs, rhs=rhs, tracked_constant=c, params=params, inputs=inputs)
        for n, lhs, rhs in bounds
    ]


# ---------------------------------------------------------------------------
# capped geometric-scale sums


def _capped_sum(term, pivot: int, rtol: float = 1e-15) -> float:
    """Bidirectional sum of ``term(j)`` with geometric tails, truncated when
    the next term falls below ``rtol`` of the running partial sum."""
    total = term(pivot)
    j = pivot - 1
    while True:
        t = term(j)
        total += t
        if t <= rtol * total:
            break
        j -= 1
    j = pivot + 1
    while True:
        t = term(j)
        total += t
        if t <= rtol * total:
            break
        j += 1
    return total


def capped_scale_sum_sqrt(a: float, alpha: float, dim: int) -> tuple[float, float]:
    """Value and bound for the square-root capped scale sum.

    Value is ``(sum_j 2^((alpha-d) j / 2) min(2^(d j), a)^(1/2))^2``; the
    bound is the closed-form constant times ``a^(alpha/d)``.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    d = dim

    def term(j):
        return 2.0 ** ((alpha - d) * j / 2.0) * min(2.0 ** (d * j), a) ** 0.5

    pivot = math.floor(math.log2(a) / d)
    s = _capped_sum(term, pivot)
    value = s * s
    bound = ProofConstants(alpha=alpha, dim=dim).c_scale_sum_sqrt * a ** (alpha / d)
    return value, bound


def capped_scale_sum(a: float, b: float, alpha: float, dim: int) -> tuple[float, float]:
    """Value and bound for the linear capped scale sum
    ``sum_j 2^((alpha-d) j) min(2^(d j) a, b) <= c a (b/a)^(alpha/d)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    d = dim

    def term(j):
        return 2.0 ** ((alpha - d) * j) * min(2.0 ** (d * j) * a, b)

    pivot = math.floor(math.log2(b / a) / d)
    value = _capped_sum(term, pivot)
    bound = ProofConstants(alpha=alpha, dim=dim).c_scale_sum * a * (b / a) ** (alpha / d)
    return value, bound


# ---------------------------------------------------------------------------
# restricted weak type and the uniform scan


def restricted_weak_type_suite(
    A: CellSet, B: CellSet, alpha: float, theta: float
) -> list[InequalityReport]:
    """Measure the four restricted weak-type estimates for indicator inputs.

    Weak quasi-norms of the full bilinear pairing at the four corner targets
    ``r = d/(2d - alpha), 1, 1, d/alpha`` against the tracked constants
    assembled from the proof chain (annulus prefactor, indicator-set
    constant, capped-sum constant).
    """
    grid = A.grid
    d = grid.dim
    if not (A.mask.any() and B.mask.any()):
        raise ValueError("A and B must be nonempty")
    consts = ProofConstants(alpha=alpha, dim=d)
    c1, c2, c3, c4 = consts.restricted
    out = bilinear_op(A.indicator(), B.indicator(), OperatorParams(alpha=alpha, dim=d, theta=theta))
    mA, mB = A.measure, B.measure
    s = alpha / d
    params = {"alpha": alpha, "d": d, "theta": theta}
    inputs = {"measure_A": mA, "measure_B": mB}
    specs = [
        ("restricted-wt-1", d / (2.0 * d - alpha), c1, mA * mB),
        ("restricted-wt-2", 1.0, c2, mA * mB**s),
        ("restricted-wt-3", 1.0, c3, mA**s * mB),
        ("restricted-wt-4", d / alpha, c4, mA**s * mB**s),
    ]
    return [
        InequalityReport(
            name=name,
            lhs=weak_norm(out, r),
            rhs=rhs,
            tracked_constant=c,
            params={**params, "r": r},
            inputs=inputs,
        )
        for name, r, c, rhs in specs
    ]


@dataclass(frozen=True)
class ScanReport:
    """Aggregate of a ratio scan: rows plus the tracked bound."""

    name: str
    rows: list
    sup_ratio: float
    bound: float
    params: dict

    @property
    def passed(self) -> bool:
        return self.sup_ratio <= self.bound * (1.0 + 1e-12)


def uniform_bound_scan(
    pairs,
    triple: ExponentTriple,
    thetas,
    structural_factor: float = 1.0,
    safety_factor: float = 10.0,
) -> ScanReport:
    """Strong-norm ratio scan over input pairs and shear values.

    Each ratio ``||I(f, g)||_r / (||f||_p ||g||_q)`` is checked against the
    interpolated vertex constant times a quadrature safety factor.  The
    exponent pair must be interior to the uniform-bounds square and
    scaling-consistent.
    """
    if not triple.scaling_consistent:
        raise ValueError("exponent triple violates the scaling relation")
    label = classify_region(1.0 / triple.p, 1.0 / triple.q, triple.alpha, triple.dim)
    if label is not RegionLabel.INTERIOR_SQUARE:
        raise ValueError(f"exponents outside the uniform-bounds region: {label.value}")
    consts = ProofConstants(alpha=triple.alpha, dim=triple.dim)
    interp, solve = strong_type_constant(
        1.0 / triple.p,
        1.0 / triple.q,
        triple.alpha,
        triple.dim,
        consts.restricted,
        structural_factor,
    )
    bound = interp * safety_factor
    rows = []
    sup_ratio = 0.0
    for idx, fg in enumerate(pairs):
        f, g = fg
        if isinstance(f, CellSet):
            f = f.indicator()
        if isinstance(g, CellSet):
            g = g.indicator()
        fp = lebesgue_norm(f, triple.p)
        gq = lebesgue_norm(g, triple.q)
        for theta in thetas:
            out = bilinear_op(
                f, g, OperatorParams(alpha=triple.alpha, dim=triple.dim, theta=float(theta))
            )
            denom = fp * gq
            ratio = lebesgue_norm(out, triple.r) / denom if denom > 0 else 0.0
            sup_ratio = max(sup_ratio, ratio)
            rows.append({"pair": idx, "theta": float(theta), "ratio": ratio})
    return ScanReport(
        name="uniform-bound-scan",
        rows=rows,
        sup_ratio=sup_ratio,
        bound=bound,
        params={
            "alpha": triple.alpha,
            "d": triple.dim,
            "p": triple.p,
            "q": triple.q,
            "r": triple.r,
            "interpolated_constant": interp,
            "safety_factor": safety_factor,
            "vertices": solve["vertices"],
        },
    )


# ---------------------------------------------------------------------------
# boundary blow-up probe


def log_singular_profile(grid: Grid, alpha: float, delta: float = 0.1) -> GridFunction:
    """Profile ``|x|^(-alpha) (1 + |log|x||)^(-(alpha/d + delta))`` on the
    unit ball, sampled by per-cell quadrature near the singular origin.

    Lies in ``L^(d/alpha)`` while its kernel potential diverges at 0, which
    makes it the witness that the sup-norm endpoint fails.
    """
    d = grid.dim
    if d != 1:
        raise NotImplementedError("the blow-up probe is one-dimensional")
    beta = alpha / d + delta

    def profile(x):
        ax = abs(x)
        return ax**-alpha * (1.0 + abs(math.log(ax))) ** -beta if 0 < ax <= 1.0 else 0.0

    h = grid.spacing
    centers = grid.axis_centers()
    vals = np.zeros(grid.n)
    for i, c in enumerate(centers):
        lo, hi = c - h / 2.0, c + h / 2.0
        if hi <= -1.0 or lo >= 1.0:
            continue
        lo, hi = max(lo, -1.0), min(hi, 1.0)
        if abs(c) > 0.2:
            vals[i] = profile(c) * (hi - lo) / h
        else:  # quadrature against the endpoint singularity at 0
            val, _ = quad(profile, lo, hi, limit=200, points=[0.0] if lo < 0 < hi else None)
            vals[i] = val / h
    return GridFunction(grid, vals, nonneg_hint=True)


def gaussian_bump(grid: Grid, eps: float, x0: float = 0.0) -> GridFunction:
    """Normalized concentrating bump ``(1/eps)^(d/2) exp(-pi |x-x0|^2 / eps)``
    with exact cell averages, so its unit mass survives coarse sampling."""
    if grid.dim != 1:
        raise NotImplementedError("the blow-up probe is one-dimensional")
    edges = grid.axis_centers() - grid.spacing / 2.0
    edges = np.append(edges, edges[-1] + grid.spacing)
    scale = math.sqrt(math.pi / eps)
    cdf = 0.5 * erf(scale * (edges - x0))
    return GridFunction(grid, np.diff(cdf) / grid.spacing, nonneg_hint=True)


@dataclass(frozen=True)
class BlowupReport:
    """Ratios along a concentration sequence at the endpoint exponents."""

    epsilons: tuple[float, ...]
    ratios: tuple[float, ...]
    g_kind: str
    params: dict

    @property
    def growth_factor(self) -> float:
        return self.ratios[-1] / self.ratios[0]

    @property
    def max_step_change(self) -> float:
        steps = [abs(b / a - 1.0) for a, b in zip(self.ratios, self.ratios[1:])]
        return max(steps)


def boundary_blowup_probe(
    alpha: float,
    dim: int,
    epsilons=(1e-1, 1e-2, 1e-3),
    x0: float = 0.0,
    g_kind: str = "unbounded",
    n: int = 1024,
    half_width: float = 2.0,
    p: float | None = None,
    delta: float = 0.1,
) -> BlowupReport:
    """Probe the endpoint ``q = d/alpha`` with a concentrating bump.

    Measures ``||I(f_eps, g)||_p / (||f_eps||_p ||g||_{d/alpha})`` at shear 1
    as the bump concentrates at ``x0``.  With the log-singular profile the
    ratio tracks the diverging potential and keeps growing; with a smooth
    bounded profile it settles at the potential value at ``x0``.
    """
    if dim != 1:
        raise NotImplementedError("the blow-up probe is one-dimensional")
    grid = make_grid(dim, n, half_width)
    if p is None:
        p = 0.75 * dim / alpha  # strictly inside (1, d/alpha)
    if g_kind == "unbounded":
        g = log_singular_profile(grid, alpha, delta)
    elif g_kind == "smooth":
        g = GridFunction.from_callable(
            grid, lambda x: np.exp(-4.0 * (x - x0) ** 2), nonneg_hint=True
        )
    else:
        raise ValueError(f"unknown g_kind {g_kind!r}")
    q = dim / alpha
    gq = lebesgue_norm(g, q)
    ratios = []
    for eps in epsilons:
        f = gaussian_bump(grid, eps, x0)
        out = bilinear_op(f, g, OperatorParams(alpha=alpha, dim=dim, theta=1.0))
        ratios.append(lebesgue_norm(out, p) / (lebesgue_norm(f, p) * gq))
    return BlowupReport(
        epsilons=tuple(float(e) for e in epsilons),
        ratios=tuple(ratios),
        g_kind=g_kind,
        params={"alpha": alpha, "d": dim, "p": p, "q": q, "n": n, "half_width": half_width, "x0": x0, "delta": delta},
    )

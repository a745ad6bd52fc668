"""Grid fields, norms, weak norms, dilation, and the binary format."""

import math

import numpy as np
import pytest

from rieszlab import (
    CellSet,
    ExponentTriple,
    GridFunction,
    dyadic_dilate,
    lebesgue_norm,
    make_grid,
    rescale_domain,
    weak_norm,
    weak_norm_upper,
)
from rieszlab.storage import read_channels, read_field, write_channels, write_field


def step_function(grid, rng, levels=4):
    """Random nonnegative step function with a few distinct levels."""
    vals = rng.integers(0, levels, size=grid.shape).astype(float)
    return GridFunction(grid, vals, nonneg_hint=True)


class TestMakeGrid:
    def test_1d_centers(self):
        g = make_grid(1, 4, 1.0)
        assert g.spacing == 0.5
        np.testing.assert_allclose(g.axis_centers(), [-0.75, -0.25, 0.25, 0.75])

    def test_2d_counts(self):
        g = make_grid(2, 8, 0.5)
        assert g.size == 64
        assert g.spacing == 0.125

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            make_grid(1, 1, 1.0)
        with pytest.raises(ValueError):
            make_grid(1, 8, 0.0)
        with pytest.raises(ValueError):
            make_grid(0, 8, 1.0)

    def test_spacing_times_n_spans_axis(self):
        g = make_grid(2, 10, 1.5)
        assert g.spacing * g.n == pytest.approx(2 * g.half_width, rel=1e-15)


class TestGridFunction:
    def test_rejects_nonfinite(self):
        g = make_grid(1, 4, 1.0)
        with pytest.raises(ValueError):
            GridFunction(g, [1.0, np.nan, 0.0, 0.0])

    def test_rejects_negative_with_hint(self):
        g = make_grid(1, 4, 1.0)
        with pytest.raises(ValueError):
            GridFunction(g, [1.0, -1.0, 0.0, 0.0], nonneg_hint=True)

    def test_immutable(self):
        g = make_grid(1, 4, 1.0)
        f = GridFunction(g, np.ones(4))
        with pytest.raises(ValueError):
            f.values[0] = 2.0


class TestLebesgueNorm:
    def test_indicator_l1(self):
        g = make_grid(1, 64, 1.0)
        f = GridFunction.indicator_box(g, [-0.5], [0.25])
        k = int(f.values.sum())
        assert lebesgue_norm(f, 1) == pytest.approx(k * g.spacing, rel=1e-14)

    def test_constant_on_unit_torus(self):
        g = make_grid(2, 16, 0.5)  # measure 1
        f = GridFunction(g, np.full(g.shape, -3.0))
        for p in (0.5, 1, 2, 7):
            assert lebesgue_norm(f, p) == pytest.approx(3.0, rel=1e-12)
        assert lebesgue_norm(f, math.inf) == 3.0

    def test_linear_profile_l2(self):
        # int_0^1 x^2 dx = 1/3
        g = make_grid(1, 1024, 0.5, origin=(0.5,))
        f = GridFunction.from_callable(g, lambda x: x)
        assert lebesgue_norm(f, 2) == pytest.approx(1 / math.sqrt(3), abs=1e-3)

    def test_homogeneity(self):
        rng = np.random.default_rng(0)
        g = make_grid(1, 128, 1.0)
        f = GridFunction(g, rng.standard_normal(128))
        for p in (0.5, 1, 2):
            assert lebesgue_norm(3.7 * f, p) == pytest.approx(3.7 * lebesgue_norm(f, p), rel=1e-12)


class TestWeakNorm:
    def test_indicator(self):
        g = make_grid(1, 64, 1.0)
        E = CellSet.from_box(g, [-0.5], [0.5])
        for r in (0.5, 1.0, 2.0):
            assert weak_norm(E.indicator(), r) == pytest.approx(E.measure ** (1 / r), rel=1e-14)

    def test_zero(self):
        g = make_grid(1, 16, 1.0)
        assert weak_norm(GridFunction(g, np.zeros(16)), 1.5) == 0.0

    def test_two_level(self):
        # f = 2 on A, 1 on B, |A| = |B| = 1, r = 1: max(2 * 1, 1 * 2) = 2
        g = make_grid(1, 64, 2.0)
        f = (
            2.0 * GridFunction.indicator_box(g, [-2.0], [-1.0])
            + GridFunction.indicator_box(g, [0.0], [1.0])
        )
        assert weak_norm(f, 1.0) == pytest.approx(2.0, rel=1e-12)

    def test_chebyshev_on_random_steps(self):
        rng = np.random.default_rng(42)
        g = make_grid(1, 256, 1.0)
        for _ in range(25):
            f = step_function(g, rng)
            for r in (0.5, 1.0, 3.0):
                assert weak_norm(f, r) <= lebesgue_norm(f, r) * (1 + 1e-12)


class TestWeakNormUpper:
    def test_indicator(self):
        g = make_grid(1, 64, 1.0)
        E = CellSet.from_box(g, [-0.25], [0.75])
        assert weak_norm_upper(E.indicator(), 1.0, 0.5) == pytest.approx(E.measure, rel=1e-13)

    def test_zero(self):
        g = make_grid(1, 16, 1.0)
        assert weak_norm_upper(GridFunction(g, np.zeros(16)), 1.0, 0.5) == 0.0

    def test_two_level_dominates(self):
        g = make_grid(1, 64, 2.0)
        f = (
            2.0 * GridFunction.indicator_box(g, [-2.0], [-1.0])
            + GridFunction.indicator_box(g, [0.0], [1.0])
        )
        up = weak_norm_upper(f, 1.0, 0.5)
        assert up >= 2.0
        # enumerate the two super-level sets directly
        h = g.spacing
        best = 0.0
        for lev in (2.0, 1.0):
            mask = f.values >= lev
            meas = mask.sum() * h
            integ = np.sum(np.sqrt(f.values[mask])) * h
            best = max(best, meas ** (1 / 1.0 - 1 / 0.5) * integ**2)
        assert up == pytest.approx(best, rel=1e-12)

    def test_dominates_weak_norm_randomly(self):
        rng = np.random.default_rng(3)
        g = make_grid(1, 128, 1.0)
        for _ in range(25):
            f = step_function(g, rng)
            for (s, r) in ((0.5, 1.0), (1.0, 2.0), (0.25, 0.5)):
                assert weak_norm_upper(f, r, s) >= weak_norm(f, r) * (1 - 1e-12)

    def test_rejects_bad_exponents(self):
        g = make_grid(1, 16, 1.0)
        f = GridFunction(g, np.ones(16))
        with pytest.raises(ValueError):
            weak_norm_upper(f, 1.0, 1.5)


class TestDyadicDilate:
    def test_identity(self):
        g = make_grid(1, 32, 2.0)
        f = GridFunction.indicator_box(g, [0.0], [1.0])
        np.testing.assert_array_equal(dyadic_dilate(f, 0).values, f.values)

    def test_halving_interval(self):
        g = make_grid(1, 32, 2.0, periodic=False)
        f = GridFunction.indicator_box(g, [0.0], [1.0])
        d = dyadic_dilate(f, 1)
        expected = GridFunction.indicator_box(g, [0.0], [0.5])
        np.testing.assert_array_equal(d.values, expected.values)
        assert lebesgue_norm(d, 1) == pytest.approx(0.5 * lebesgue_norm(f, 1), rel=1e-14)

    def test_norm_scaling_contraction(self):
        # contraction is exact for supports aligned to the 2^k-coarse mesh
        g = make_grid(2, 32, 2.0, periodic=False)
        f = GridFunction.indicator_box(g, [-1.0, -0.5], [0.5, 0.5])
        for k in (1, 2):
            dil = dyadic_dilate(f, k)
            for p in (1.0, 2.0):
                assert lebesgue_norm(dil, p) == pytest.approx(
                    2 ** (-k * g.dim / p) * lebesgue_norm(f, p), rel=1e-12
                )

    def test_norm_scaling_expansion(self):
        # expansion is exact for any aligned step data that stays in the box
        g = make_grid(2, 32, 2.0, periodic=False)
        f = GridFunction.indicator_box(g, [-0.25, -0.25], [0.25, 0.5])
        for k in (-1, -2):
            dil = dyadic_dilate(f, k)
            for p in (1.0, 2.0):
                assert lebesgue_norm(dil, p) == pytest.approx(
                    2 ** (-k * g.dim / p) * lebesgue_norm(f, p), rel=1e-12
                )

    def test_rejects_incompatible_n(self):
        g = make_grid(1, 12, 1.0)
        f = GridFunction(g, np.ones(12))
        with pytest.raises(ValueError):
            dyadic_dilate(f, 3)

    def test_roundtrip_refine_then_coarsen(self):
        # expanding then contracting recovers the central half of the box
        # (the expansion can only represent f on half the domain)
        rng = np.random.default_rng(5)
        g = make_grid(1, 64, 1.0, periodic=False)
        f = step_function(g, rng)
        back = dyadic_dilate(dyadic_dilate(f, -1), 1)
        center = slice(16, 48)
        np.testing.assert_allclose(back.values[center], f.values[center], atol=1e-14)


class TestRescaleDomain:
    def test_norm_scaling_exact(self):
        rng = np.random.default_rng(11)
        g = make_grid(1, 128, 2.0, periodic=False)
        f = step_function(g, rng)
        k = 2
        fk = rescale_domain(f, 2.0**-k)
        for p in (0.5, 1.0, 2.0):
            assert lebesgue_norm(fk, p) == pytest.approx(
                2 ** (-k / p) * lebesgue_norm(f, p), rel=1e-14
            )


class TestExponentTriple:
    def test_from_pq(self):
        t = ExponentTriple.from_pq(1.2, 1.2, 0.5, 1)
        assert t.r == pytest.approx(6 / 7, rel=1e-14)
        assert t.scaling_consistent

    def test_defect_detection(self):
        t = ExponentTriple(p=1.2, q=1.2, r=1.0, alpha=0.5, dim=1)
        assert not t.scaling_consistent

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            ExponentTriple(p=2, q=2, r=2, alpha=1.5, dim=1)


class TestCellSet:
    def test_measure(self):
        g = make_grid(2, 16, 1.0)
        s = CellSet.from_box(g, [-1.0, -1.0], [0.0, 0.0])
        assert s.measure == pytest.approx(1.0, rel=1e-13)
        assert CellSet.empty(g).measure == 0.0

    def test_indicator_roundtrip(self):
        g = make_grid(1, 16, 1.0)
        s = CellSet.from_box(g, [-0.5], [0.5])
        assert s.indicator().integral() == pytest.approx(s.measure, rel=1e-14)


class TestStorage:
    def test_field_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        g = make_grid(2, 8, 1.5, periodic=(True, False), origin=(0.25, 0.0))
        f = GridFunction(g, rng.standard_normal(g.shape))
        path = tmp_path / "field.bin"
        write_field(path, f)
        back = read_field(path)
        assert back.grid.compatible(g)
        np.testing.assert_array_equal(back.values, f.values)

    def test_channels_roundtrip(self, tmp_path):
        rng = np.random.default_rng(10)
        g = make_grid(2, 8, 1.0)
        chans = {"s11": rng.random(g.shape), "s12": rng.random(g.shape), "s22": rng.random(g.shape)}
        path = tmp_path / "tensor.bin"
        write_channels(path, g, chans)
        g2, back = read_channels(path)
        assert g2.compatible(g)
        for name, arr in chans.items():
            np.testing.assert_array_equal(back[name], arr)

    def test_header_is_json_line(self, tmp_path):
        import json

        g = make_grid(1, 4, 1.0)
        f = GridFunction(g, np.arange(4.0))
        path = tmp_path / "f.bin"
        write_field(path, f)
        head = json.loads(path.read_bytes().split(b"\n", 1)[0])
        assert head["dtype"] == "float64-le"
        assert head["count"] == 4
        assert head["cells"] == [4]

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_pl_path
from responsekit.paths import (GridRangeError, LengthMismatchError, NonFiniteValueError,
                               NonMonotoneTimesError, DimensionMismatchError, Path,
                               PolyBasis, augment_time, concat, make_path, one_variation,
                               read_path_csv, refine_grid, resample_linear, reverse,
                               write_path_csv)
from responsekit.signature import signature


class TestMakePath:
    def test_constant(self):
        p = make_path([0, 1], [[0], [0]])
        assert len(p) == 2 and p.dim == 1 and p.segments == 1

    def test_two_channel(self):
        p = make_path([0, 1, 2], [[0, 0], [1, 0], [1, 1]])
        assert p.dim == 2 and p.segments == 2

    def test_scalar_values_promoted(self):
        assert make_path([0, 1], [3.0, 4.0]).values.shape == (2, 1)

    def test_errors_are_distinct(self):
        with pytest.raises(NonMonotoneTimesError):
            make_path([0, 0], [[0], [1]])
        with pytest.raises(LengthMismatchError):
            make_path([0, 1, 2], [[0], [1]])
        with pytest.raises(NonFiniteValueError):
            make_path([0, 1], [[0], [np.nan]])

    def test_immutable(self):
        p = make_path([0, 1], [[0], [1]])
        with pytest.raises(ValueError):
            p.values[0, 0] = 5.0


class TestConcat:
    def test_constants(self):
        c = make_path([0, 1], [[2.0], [2.0]])
        out = concat(c, c)
        assert np.all(out.values == 2.0)
        assert out.segments == 2

    def test_collinear_join(self):
        line = make_path([0, 1], [[0.0], [1.0]])
        out = concat(line, line)
        np.testing.assert_array_equal(out.times, [0, 1, 2])
        np.testing.assert_array_equal(out.values[:, 0], [0, 1, 2])

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            concat(make_path([0, 1], [[0], [1]]), make_path([0, 1], [[0, 0], [1, 1]]))

    @given(st.integers(0, 10_000))
    def test_variation_additive(self, seed):
        rng = np.random.default_rng(seed)
        a = random_pl_path(rng, 3, int(rng.integers(1, 6)), uniform_times=False)
        b = random_pl_path(rng, 3, int(rng.integers(1, 6)), uniform_times=False)
        ab = concat(a, b)
        assert ab.segments == a.segments + b.segments
        assert abs(one_variation(ab) - one_variation(a) - one_variation(b)) < 1e-12


class TestOneVariation:
    def test_constant(self):
        assert one_variation(make_path([0, 1, 2], [[1], [1], [1]])) == 0.0

    def test_monotone_equals_increment(self):
        p = make_path([0, 0.5, 1, 3], [[0], [0.5], [2], [3]])
        assert one_variation(p) == pytest.approx(3.0, abs=1e-15)

    def test_zigzag(self):
        assert one_variation(make_path([0, 1, 2], [[0], [1], [0]])) == 2.0


class TestResample:
    def test_original_times_identity(self, rng):
        p = random_pl_path(rng, 2, 4, uniform_times=False)
        assert resample_linear(p, p.times) == p

    def test_line(self):
        p = make_path([0, 2], [[0.0], [2.0]])
        np.testing.assert_allclose(resample_linear(p, [0, 1, 2]).values[:, 0], [0, 1, 2])

    def test_out_of_range(self):
        with pytest.raises(GridRangeError):
            resample_linear(make_path([0, 1], [[0], [1]]), [0, 1.5])

    @given(st.integers(0, 10_000), st.integers(2, 7))
    def test_refinement_keeps_variation(self, seed, factor):
        rng = np.random.default_rng(seed)
        p = random_pl_path(rng, 2, int(rng.integers(1, 6)), uniform_times=False)
        q = resample_linear(p, refine_grid(p.times, factor))
        assert abs(one_variation(q) - one_variation(p)) < 1e-12


class TestAugmentTime:
    def test_degree_one_is_identity(self, rng):
        u = random_pl_path(rng, 3, 5)
        for kind in ("monomial", "legendre"):
            out = augment_time(u, PolyBasis(kind, 1))
            assert out == u

    def test_constant_input_gives_time_channel(self):
        u = make_path([0, 1], [[1.0], [1.0]])
        out = augment_time(u, PolyBasis("monomial", 2))
        np.testing.assert_allclose(out.values[:, 0], 1.0)
        np.testing.assert_allclose(out.values[:, 1], out.times)

    def test_linear_input_level_one(self):
        u = make_path([0, 1], [[0.0], [1.0]])
        out = augment_time(u, PolyBasis("monomial", 2))
        np.testing.assert_allclose(out.values, np.column_stack([out.times, out.times ** 2]))
        np.testing.assert_allclose(signature(out, 1)[1], [1.0, 1.0], atol=1e-15)

    def test_channel_layout(self, rng):
        u = random_pl_path(rng, 2, 3)
        out = augment_time(u, PolyBasis("monomial", 3), refine=2)
        assert out.dim == 6
        tau = (out.times - u.t0) / (u.t1 - u.t0)
        np.testing.assert_allclose(out.values[:, 1 * 3 + 2], u(out.times)[:, 1] * tau ** 2)

    def test_legendre_orthogonal(self):
        basis = PolyBasis("legendre", 4, domain=(0.0, 2.0))
        x, w = np.polynomial.legendre.leggauss(20)
        t = 1.0 + x
        psi = basis(t)
        gram = (psi * w[:, None]).T @ psi
        np.testing.assert_allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-13)

    def test_bad_degree(self):
        with pytest.raises(ValueError):
            PolyBasis("monomial", 0)

    def test_output_bounded_variation(self, rng):
        u = random_pl_path(rng, 2, 5)
        out = augment_time(u, PolyBasis("monomial", 3))
        assert np.isfinite(one_variation(out))


def test_reverse_roundtrip(rng):
    p = random_pl_path(rng, 2, 4, uniform_times=False)
    assert reverse(reverse(p)) == p


def test_csv_roundtrip(tmp_path, rng):
    p = random_pl_path(rng, 3, 4, uniform_times=False)
    f = tmp_path / "p.csv"
    write_path_csv(p, f)
    assert f.read_text().splitlines()[0] == "t,x1,x2,x3"
    assert read_path_csv(f) == p


def test_csv_rejects_nonmonotone(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("t,x1\n0,0\n1,1\n0.5,2\n")
    with pytest.raises(NonMonotoneTimesError):
        read_path_csv(f)

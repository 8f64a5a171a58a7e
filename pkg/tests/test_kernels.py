import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_pl_path
from responsekit.acceptance import random_smooth_path
from responsekit.kernels import (GridMismatchError, KernelSpec, features, fock_inner, gram,
                                 kernel, prepare, sig_kernel_fock, sig_kernel_pl,
                                 truncated_exp_series, write_gram_csv)
from responsekit.paths import PolyBasis, make_path, one_variation
from responsekit.signature import signature, tensor_exp, unit

SPEC = KernelSpec.uniform(10, 1.0, basis=PolyBasis("monomial", 3))


def segment(h):
    h = np.asarray(h, dtype=float)
    return make_path([0.0, 1.0], [np.zeros_like(h), h])


class TestFockInner:
    def test_unit(self):
        assert fock_inner(unit(3, 4), unit(3, 4)) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            fock_inner(unit(2, 3), unit(2, 4))

    @given(st.integers(0, 10_000), st.integers(0, 12))
    def test_truncated_exponential_series(self, seed, level):
        h1, h2 = np.random.default_rng(seed).uniform(-1, 1, (2, 2))
        ip = float(h1 @ h2)
        expect = sum(ip ** n / math.factorial(n) for n in range(level + 1))
        assert fock_inner(tensor_exp(h1, level), tensor_exp(h2, level)) == pytest.approx(
            expect, abs=1e-13)

    def test_orthogonal_increments(self):
        assert fock_inner(tensor_exp([1, 0], 20), tensor_exp([0, 1], 20)) == 1.0

    @given(st.integers(0, 10_000))
    def test_self_inner_at_least_one(self, seed):
        s = signature(random_pl_path(np.random.default_rng(seed), 2, 4), 4)
        assert fock_inner(s, s) >= 1 - 1e-12

    @given(st.integers(0, 10_000))
    def test_bilinear(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (signature(random_pl_path(rng, 2, 3), 3) for _ in range(3))
        from responsekit.signature import TruncatedSignature
        ab = TruncatedSignature(2, 3, tuple(x + 2 * y for x, y in zip(a.levels, b.levels)))
        assert fock_inner(ab, c) == pytest.approx(fock_inner(a, c) + 2 * fock_inner(b, c),
                                                  rel=1e-12, abs=1e-12)


class TestPiecewiseExp:
    def test_constant_path_gives_one(self, rng):
        const = make_path([0.0, 1.0], [[0.3, 0.3], [0.3, 0.3]])
        assert sig_kernel_pl(const, segment(rng.normal(size=2))) == 1.0

    def test_unit_increment(self):
        assert sig_kernel_pl(segment([1.0, 0.0]), segment([1.0, 0.0])) == pytest.approx(
            2.718281828, abs=1e-9)

    @given(st.integers(0, 10_000))
    def test_matches_level_twenty_fock(self, seed):
        h1, h2 = (v / max(1.0, np.linalg.norm(v))
                  for v in np.random.default_rng(seed).uniform(-1, 1, (2, 2)))
        fock = fock_inner(signature(segment(h1), 20, max_level=20),
                          signature(segment(h2), 20, max_level=20))
        assert abs(sig_kernel_pl(segment(h1), segment(h2)) - fock) <= 1e-8

    @given(st.integers(0, 10_000), st.integers(0, 8))
    def test_truncation_tail_bound(self, seed, level):
        rng = np.random.default_rng(seed)
        h1, h2 = rng.uniform(-1.5, 1.5, (2, 2))
        ip = abs(float(h1 @ h2))
        gap = abs(sig_kernel_pl(segment(h1), segment(h2)) - truncated_exp_series(float(h1 @ h2),
                                                                                 level))
        bound = ip ** (level + 1) * math.exp(ip) / math.factorial(level + 1)
        assert gap <= bound + 1e-15

    def test_grid_mismatch(self):
        x = make_path([0.0, 1.0], [[0.0], [1.0]])
        y = make_path([0.0, 0.5, 1.0], [[0.0], [0.2], [1.0]])
        with pytest.raises(GridMismatchError):
            sig_kernel_pl(x, y)
        with pytest.raises(GridMismatchError):
            sig_kernel_pl(x, x, SPEC)

    @given(st.integers(0, 10_000))
    def test_symmetric_and_positive(self, seed):
        rng = np.random.default_rng(seed)
        x, y = random_smooth_path(rng), random_smooth_path(rng)
        assert kernel(x, y, SPEC) == kernel(y, x, SPEC)
        assert kernel(x, y, SPEC) > 0


class TestGram:
    def test_single_path(self, rng):
        g = gram([random_smooth_path(rng)], SPEC)
        assert g.shape == (1, 1) and g[0, 0] > 0

    def test_duplicates_rank_deficient(self, rng):
        x, y = random_smooth_path(rng), random_smooth_path(rng)
        g = gram([x, y, x], SPEC)
        np.testing.assert_array_equal(g[0], g[2])
        assert np.linalg.matrix_rank(g) == 2

    def test_symmetric_exactly(self, rng):
        g = gram([random_smooth_path(rng) for _ in range(12)], SPEC)
        np.testing.assert_array_equal(g, g.T)

    def test_entries_match_pairwise_kernel(self, rng):
        xs = [random_smooth_path(rng) for _ in range(4)]
        g = gram(xs, SPEC)
        for i in range(4):
            for j in range(4):
                assert g[i, j] == pytest.approx(kernel(xs[i], xs[j], SPEC), rel=1e-13)

    def test_psd(self, rng):
        ev = np.linalg.eigvalsh(gram([random_smooth_path(rng) for _ in range(100)], SPEC))
        assert ev[0] >= -1e-8 * ev[-1]

    def test_fock_kind(self, rng):
        spec = KernelSpec(kind="fock_truncated", level=3, basis=PolyBasis("monomial", 2))
        xs = [random_smooth_path(rng, amp=0.2) for _ in range(5)]
        g = gram(xs, spec)
        px = [prepare(x, spec) for x in xs]
        assert g[1, 3] == pytest.approx(sig_kernel_fock(px[1], px[3], 3), rel=1e-12)
        assert np.linalg.eigvalsh(g)[0] >= -1e-10 * np.abs(g).max()

    def test_write_csv(self, tmp_path, rng):
        g = gram([random_smooth_path(rng) for _ in range(3)], SPEC)
        write_gram_csv(g, tmp_path / "g.csv")
        np.testing.assert_array_equal(np.loadtxt(tmp_path / "g.csv", delimiter=","), g)


class TestSpec:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            KernelSpec(kind="rbf")

    def test_dict_roundtrip(self):
        assert KernelSpec.from_dict(SPEC.to_dict()) == SPEC

    def test_dict_from_segments(self):
        assert KernelSpec.from_dict({"segments": 10, "horizon": 1.0,
                                     "basis": {"kind": "monomial", "degree": 3}}) == SPEC

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            KernelSpec.from_dict({"kind": "piecewise_exp", "bogus": 1})

    def test_prepare_on_grid(self, rng):
        p = prepare(random_smooth_path(rng), SPEC)
        np.testing.assert_allclose(p.times, SPEC.segment_grid)
        assert p.dim == 2 * 3

    def test_normalize(self, rng):
        spec = KernelSpec.uniform(10, 1.0, normalize=True)
        assert one_variation(prepare(random_smooth_path(rng), spec)) == pytest.approx(1.0)

    def test_features_are_increments(self, rng):
        xs = [prepare(random_smooth_path(rng), SPEC) for _ in range(2)]
        z = features(xs, SPEC)
        np.testing.assert_array_equal(z[0], xs[0].increments.ravel())

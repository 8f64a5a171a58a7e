import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from responsekit.acceptance import synthetic_kernel_sets
from responsekit.paths import make_path
from responsekit.response import (AmplitudeWarning, GridMismatchError, ImpulseSpec,
                                  NonStationaryInitError, VolterraKernels, _central_estimate,
                                  bump_profile, compose_kernels, compositions,
                                  fdt_correlation_ou, fdt_report, impulse_response2_mc,
                                  impulse_response_mc, memoryless_features, multiplicity,
                                  sorted_tuples, trapezoid_weights, volterra_eval,
                                  volterra_eval_grid, write_fdt_csv)
from responsekit.srnn import SrnnParams

OU = SrnnParams.scalar_ou(1.0, 0.5)
OU_STAT = OU.stationary()


class TestImpulse:
    def test_bump_default_width(self):
        prof = bump_profile(ImpulseSpec(), 0.5, 0.01, 100)
        assert prof.sum() * 0.01 == pytest.approx(0.04)
        mids = (np.flatnonzero(prof) + 0.5) * 0.01
        assert mids.mean() == pytest.approx(0.5)

    def test_bump_outside_window(self):
        with pytest.raises(ValueError):
            bump_profile(ImpulseSpec(), 0.99, 0.01, 100)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ImpulseSpec(eps=0.0)
        with pytest.raises(ValueError):
            ImpulseSpec(shape="gauss")

    def test_antisymmetry(self):
        rng = np.random.default_rng(0)
        fp, fm = rng.normal(size=(2, 50))
        a = _central_estimate(fp, fm, 0.05, 0.02)
        b = _central_estimate(fm, fp, -0.05, 0.02)
        assert a == b

    def test_s_before_t(self):
        with pytest.raises(ValueError):
            impulse_response_mc(OU, [1.0], 0.5, 0.5)

    def test_ou_unit_lag(self):
        est, se = impulse_response_mc(OU, [1.0], 1.1, 0.1, dt=0.005, K=2000, seed=1)
        # reference value quoted to four decimals
        assert abs(est - 0.3679) <= 3 * se + 5e-5

    def test_short_lag_tends_to_one(self):
        dt = 0.005
        spec = ImpulseSpec()
        est, _ = impulse_response_mc(OU, [1.0], 0.1 + 3 * dt, 0.1, spec, dt, 500, seed=2)
        assert abs(est - 1.0) <= 4 * dt

    def test_triangle_bump(self):
        est, se = impulse_response_mc(OU, [1.0], 1.1, 0.1, ImpulseSpec(shape="triangle"),
                                      0.005, 500, seed=1)
        assert abs(est - math.exp(-1.0)) <= 3 * se + 5e-3

    def test_linear_second_order_is_zero(self):
        for s1, s2 in ((0.3, 0.6), (0.4, 0.4)):
            est, se = impulse_response2_mc(OU, [1.0], 1.0, s1, s2, dt=0.01, K=2000, seed=3)
            assert abs(est) <= 3 * se

    def test_amplitude_warning(self):
        p = SrnnParams(gamma=[[1.0]], W=[[0.0]], b=[0.0], C=[[1.0]], sigma=[[0.0]],
                       activation="zero")
        p = p.replace(activation="tanh", W=[[3.0]], b=[0.5])
        with pytest.warns(AmplitudeWarning):
            impulse_response_mc(p, [1.0], 0.5, 0.2, ImpulseSpec(eps=50.0), 0.01, 2, seed=0)

    def test_no_warning_for_small_kick(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", AmplitudeWarning)
            impulse_response_mc(OU, [1.0], 0.5, 0.2, ImpulseSpec(eps=0.05), 0.01, 50, seed=0)


class TestFdt:
    def test_zero_lag(self):
        est, se = fdt_correlation_ou(OU_STAT, [1.0], 0.0, 0.01, 20_000, seed=5)
        assert abs(est - 1.0) <= 3 * se

    def test_unit_lag(self):
        est, se = fdt_correlation_ou(OU_STAT, [1.0], 1.0, 0.005, 20_000, seed=6)
        assert abs(est - math.exp(-1.0)) <= 3 * se

    def test_requires_stationary(self):
        with pytest.raises(NonStationaryInitError):
            fdt_correlation_ou(OU, [1.0], 1.0)
        with pytest.raises(NonStationaryInitError):
            fdt_correlation_ou(SrnnParams.random_tanh(2, 1, 0.3), [1.0], 1.0)

    def test_report_matches(self, tmp_path):
        rows = fdt_report(OU_STAT, [1.0], [0.5, 1.0], 0.05, dt=0.005, K=20_000, seed=7)
        for r in rows:
            combined = math.hypot(r["stderr_i"], r["stderr_c"])
            assert abs(r["impulse"] - r["correlation"]) <= 3 * combined + 0.01
        write_fdt_csv(rows, tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "tau,impulse,correlation,stderr_i,stderr_c" and len(lines) == 3


class TestSimplex:
    def test_sorted_tuples_count(self):
        for i in range(5):
            for n in range(1, 4):
                assert len(sorted_tuples(i, n)) == math.comb(i + n, n)

    def test_multiplicity(self):
        tup = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 2]])
        np.testing.assert_array_equal(multiplicity(tup), [1, 3, 6])

    def test_compositions(self):
        assert sorted(compositions(4, 2, 2)) == [(2, 2)]
        assert sorted(compositions(3, 2, 2)) == [(1, 2), (2, 1)]
        assert len(list(compositions(5, 3, 5))) == math.comb(4, 2)

    def test_trapezoid_weights(self):
        x = np.linspace(0, 2, 9)
        assert trapezoid_weights(x) @ x ** 2 == pytest.approx(trapezoid(x ** 2, x))


GRID = np.linspace(0.0, 2.0, 201)
EXP1 = VolterraKernels.from_functions(GRID, [lambda t, S: np.exp(-(t - S[:, 0]))])


class TestVolterraEval:
    def test_zero_input(self):
        assert volterra_eval(EXP1, make_path([0.0, 2.0], [[0.0], [0.0]]), 1.0) == 0.0

    def test_constant_input(self):
        c = 0.3
        g = make_path([0.0, 2.0], [[c], [c]])
        for t in (0.5, 1.0, 2.0):
            # trapezoid error is O(h^2)
            assert volterra_eval(EXP1, g, t) == pytest.approx(c * (1 - math.exp(-t)), abs=1e-5)

    @given(st.integers(0, 10_000))
    def test_linear_in_input(self, seed):
        rng = np.random.default_rng(seed)
        g = make_path(np.linspace(0, 2, 11), rng.normal(size=11))
        g2 = make_path(g.times, 2 * g.values)
        assert volterra_eval(EXP1, g2, 1.5) == pytest.approx(2 * volterra_eval(EXP1, g, 1.5),
                                                             rel=1e-12, abs=1e-15)

    def test_off_grid(self):
        with pytest.raises(GridMismatchError):
            volterra_eval(EXP1, make_path([0.0, 2.0], [[0.0], [1.0]]), 0.123)

    def test_second_order_against_full_square(self):
        grid = np.linspace(0, 1, 12)
        k = VolterraKernels.from_functions(grid, [
            lambda t, S: np.cos(t - S[:, 0]),
            lambda t, S: np.exp(-(t - S[:, 0]) * (t - S[:, 1]))])
        g = make_path(grid, np.sin(3 * grid) + 0.2)
        i = 9
        w = trapezoid_weights(grid[: i + 1]) * g(grid[: i + 1])[:, 0]
        full = w @ k.dense(1, i) + w @ k.dense(2, i) @ w
        assert volterra_eval(k, g, grid[i]) == pytest.approx(full, rel=1e-12)

    def test_dense_is_symmetric(self):
        F, _ = synthetic_kernel_sets(np.linspace(0, 1, 6))
        d = F.dense(2, 5)
        np.testing.assert_array_equal(d, d.T)
        assert F.value(2, 5, (4, 1)) == F.value(2, 5, (1, 4)) == d[1, 4]

    def test_json_roundtrip(self, tmp_path):
        F, _ = synthetic_kernel_sets(np.linspace(0, 1, 6))
        F.save(tmp_path / "k.json")
        back = VolterraKernels.load(tmp_path / "k.json")
        assert back.orders == 2
        for a, b in zip(F.kernels, back.kernels):
            for x, y in zip(a, b):
                np.testing.assert_array_equal(x, y)

    def test_bad_slice(self):
        with pytest.raises(ValueError):
            VolterraKernels(np.linspace(0, 1, 3), ([[1.0], [1.0, 2.0], [1.0]],))


class TestCompose:
    def test_order_count(self):
        F, G = synthetic_kernel_sets(np.linspace(0, 1, 8))
        assert compose_kernels(F, G).orders == 4

    def test_grid_mismatch(self):
        F, _ = synthetic_kernel_sets(np.linspace(0, 1, 8))
        _, G = synthetic_kernel_sets(np.linspace(0, 1, 9))
        with pytest.raises(GridMismatchError):
            compose_kernels(F, G)

    def test_first_order_is_single_integral(self):
        grid = np.linspace(0, 1, 21)
        F = VolterraKernels.from_functions(grid, [lambda t, S: np.exp(-(t - S[:, 0]))])
        G = VolterraKernels.from_functions(grid, [lambda t, S: np.cos(t - S[:, 0])])
        H = compose_kernels(F, G)
        assert H.orders == 2
        i, j = 17, 5
        s = grid[j: i + 1]
        direct = trapezoid(np.exp(-(grid[i] - s)) * np.cos(s - grid[j]), s)
        assert H.value(1, i, (j,)) == pytest.approx(direct, rel=1e-12)
        assert np.all(H.kernels[1][i] == 0.0)

    def test_nested_vs_composed(self):
        grid = np.linspace(0.0, 1.0, 24)
        F, G = synthetic_kernel_sets(grid)
        H = compose_kernels(F, G)
        g = make_path(grid, 0.1 * np.sin(2 * np.pi * grid))
        inner = make_path(grid, volterra_eval_grid(G, g))
        for i in (12, 23):
            nested = volterra_eval(F, inner, grid[i])
            assert volterra_eval(H, g, grid[i]) == pytest.approx(nested, rel=1e-2)


class TestMemoryless:
    def test_zero_input(self):
        u = make_path([0.0, 1.0], [[0.0, 0.0], [0.0, 0.0]])
        vals, _ = memoryless_features(u, 2, 1, 1.0)
        assert np.all(vals == 0.0)

    def test_one_times_s(self):
        u = make_path(np.linspace(0, 2, 2049), np.ones(2049))
        vals, labels = memoryless_features(u, 1, 1, 2.0)
        assert vals[labels.index((1, (0, 1), (1,)))] == pytest.approx(2.0, abs=1e-6)

    def test_nested_linear(self):
        s = np.linspace(0, 1.5, 4097)
        vals, labels = memoryless_features(make_path(s, s), 2, 0, 1.5)
        assert vals[labels.index((2, (0, 0, 0), (1, 1)))] == pytest.approx(1.5 ** 4 / 8,
                                                                          abs=1e-6)

    @given(st.integers(0, 10_000))
    def test_first_order_is_plain_integral(self, seed):
        rng = np.random.default_rng(seed)
        t = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 6)]))
        u = make_path(np.unique(t), rng.normal(size=(len(np.unique(t)), 2)))
        vals, labels = memoryless_features(u, 1, 0, 1.0)
        for k in (0, 1):
            ref = trapezoid(u.values[:, k], u.times)
            assert vals[labels.index((1, (0, 0), (k + 1,)))] == pytest.approx(ref, abs=1e-12)

    def test_ordering(self):
        u = make_path([0.0, 1.0], [[0.0, 1.0], [1.0, 0.0]])
        _, labels = memoryless_features(u, 2, 1, 1.0)
        orders = [lab[0] for lab in labels]
        assert orders == sorted(orders)
        assert labels[:4] == [(1, (0, 0), (1,)), (1, (0, 0), (2,)),
                              (1, (0, 1), (1,)), (1, (0, 1), (2,))]
        assert len(labels) == 4 * 2 + 8 * 4

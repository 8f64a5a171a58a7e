"""Acceptance checks, one function per criterion.

Each check returns ``(passed, details)``; :func:`run` adds wall-clock timing
and compares it with the criterion's budget. All randomness derives from a
single master seed.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .kernels import KernelSpec, fock_inner, gram, sig_kernel_pl
from .learn import fit, rmse, training_residual
from .paths import PolyBasis, augment_time, concat, make_path
from .response import (AmplitudeWarning, ImpulseSpec, VolterraKernels, compose_kernels,
                       fdt_correlation_ou, impulse_response2_mc, impulse_response_mc,
                       memoryless_features, output_deviation_mc, volterra_eval,
                       volterra_eval_grid)
from .rng import derive_seed
from .signature import (coeff, sig_oracle_converged, signature, tensor_exp, tensor_mul,
                        unit, words)
from .srnn import (SrnnParams, discretize, input_drive, output_functional,
                   simulate_ensemble, trajectory_noise)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    budget: float
    details: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.seconds < self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        note = "" if self.within_budget else f" (over budget {self.budget:g}s)"
        return f"[{status}] {self.number:2d} {self.name}: {self.seconds:.2f}s{note}"


def random_smooth_path(rng: np.random.Generator, dim: int = 2, amp: float = 0.5,
                       knots: int = 21, horizon: float = 1.0):
    """Three-mode random Fourier path on ``[0, horizon]`` sampled at ``knots`` points."""
    t = np.linspace(0.0, horizon, knots)
    j = np.arange(1, 4)
    a = rng.normal(size=(3, dim)) * amp / j[:, None]
    b = rng.normal(size=(3, dim)) * amp / j[:, None]
    phase = np.pi * np.outer(t / horizon, j)
    return make_path(t, np.sin(phase) @ a + np.cos(phase) @ b)


def random_segment_path(rng: np.random.Generator, dim: int, segments: int):
    """Integer-time piecewise-linear path with increment norms at most one."""
    inc = rng.uniform(-1.0, 1.0, (segments, dim))
    inc /= np.maximum(1.0, np.linalg.norm(inc, axis=1, keepdims=True))
    start = rng.normal(size=dim)
    return make_path(np.arange(segments + 1.0), np.vstack([start, start + np.cumsum(inc, 0)]))


# --- 1-4: signatures and kernels ---------------------------------------------

def check_signature_closed_forms(seed: int = 0):
    s = signature(make_path([0.0, 1.0], [[0.0], [2.0]]), 3)
    expect = [1.0, 2.0, 2.0, 4.0 / 3.0]
    err = max(abs(float(s.levels[n][0]) - expect[n]) for n in range(4))
    const = make_path([0.0, 0.5, 1.0], [[1.0, -2.0]] * 3)
    sc, u = signature(const, 5), unit(2, 5)
    exact_unit = all(np.array_equal(a, b) for a, b in zip(sc.levels, u.levels))
    return err <= 1e-12 and exact_unit, {"max_err": err, "constant_is_unit": exact_unit}


def check_chen_identity(seed: int = 0):
    rng = np.random.default_rng(derive_seed(seed, "chen"))
    level = 4
    chen_err = 0.0
    oracle_rel = 0.0
    for _ in range(10):
        nseg = int(rng.integers(2, 6))
        p = random_segment_path(rng, 2, nseg)
        cut = int(rng.integers(1, nseg))
        a = make_path(p.times[: cut + 1], p.values[: cut + 1])
        b = make_path(p.times[cut:] - p.times[cut], p.values[cut:])
        joined = signature(concat(a, b), level)
        prod = tensor_mul(signature(a, level), signature(b, level), level)
        chen_err = max(chen_err, max(float(np.max(np.abs(x - y)))
                                     for x, y in zip(joined.levels, prod.levels)))
        sig = signature(p, level)
        for n in range(1, level + 1):
            for w in words(2, n):
                ref, _ = sig_oracle_converged(p, w, tol=1e-7, subdiv=4 * nseg)
                oracle_rel = max(oracle_rel, abs(coeff(sig, w) - ref) / abs(ref))
    return chen_err <= 1e-10 and oracle_rel <= 1e-6, {
        "chen_max_abs": chen_err, "oracle_max_rel": oracle_rel}


def check_exponential_property(seed: int = 0):
    rng = np.random.default_rng(derive_seed(seed, "exp"))
    fock_err = 0.0
    pl_err = 0.0
    for _ in range(20):
        h1, h2 = (v / max(1.0, np.linalg.norm(v)) for v in rng.uniform(-1, 1, (2, 2)))
        limit = np.exp(float(np.dot(h1, h2)))
        fock_err = max(fock_err, abs(fock_inner(tensor_exp(h1, 20), tensor_exp(h2, 20)) - limit))
        x = make_path([0.0, 1.0], [np.zeros(2), h1])
        y = make_path([0.0, 1.0], [np.zeros(2), h2])
        pl_err = max(pl_err, abs(sig_kernel_pl(x, y) - limit))
    return fock_err <= 1e-10 and pl_err <= 1e-8, {"fock_max_abs": fock_err,
                                                  "pl_max_abs": pl_err}


def check_gram_positivity(seed: int = 0):
    rng = np.random.default_rng(derive_seed(seed, "gram"))
    spec = KernelSpec.uniform(10, 1.0, basis=PolyBasis("monomial", 3))
    G = gram([random_smooth_path(rng) for _ in range(100)], spec)
    ev = np.linalg.eigvalsh(G)
    ratio = float(ev[0] / ev[-1])
    return ratio >= -1e-8, {"min_eig": float(ev[0]), "max_eig": float(ev[-1])}


# --- 5-6: OU response and fluctuation-dissipation ------------------------------

OU_LAGS = (0.25, 0.5, 1.0, 2.0)
OU_KICK_TIME = 0.05


@lru_cache(maxsize=4)
def _ou_runs(seed: int, K: int = 200_000, dt: float = 0.005):
    params = SrnnParams.scalar_ou(1.0, 0.5).stationary()
    taus = np.array(OU_LAGS)
    spec = ImpulseSpec(eps=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AmplitudeWarning)
        imp, imp_se = impulse_response_mc(params, [1.0], OU_KICK_TIME + taus, OU_KICK_TIME,
                                          spec, dt, K, derive_seed(seed, "impulse"))
    cor, cor_se = fdt_correlation_ou(params, [1.0], taus, dt, K, derive_seed(seed, "fdt"))
    return taus, imp, imp_se, cor, cor_se


def check_ou_linear_response(seed: int = 0):
    taus, imp, se, _, _ = _ou_runs(seed)
    exact = np.exp(-taus)
    tol = np.maximum(3 * se, 0.02)
    err = np.abs(imp - exact)
    return bool(np.all(err <= tol)), {"impulse": imp.tolist(), "exact": exact.tolist(),
                                      "stderr": se.tolist(), "abs_err": err.tolist()}


def check_fdt(seed: int = 0):
    taus, imp, ise, cor, cse = _ou_runs(seed)
    tol = 3 * np.sqrt(ise ** 2 + cse ** 2) + 0.01
    err = np.abs(imp - cor)
    return bool(np.all(err <= tol)), {"correlation": cor.tolist(), "stderr": cse.tolist(),
                                      "abs_err": err.tolist(), "tol": tol.tolist()}


# --- 7-8: Volterra series -------------------------------------------------------

def check_volterra_first_order(seed: int = 0):
    params = SrnnParams.scalar_ou(1.0, 0.5).stationary()
    horizon, dt = 2.0, 0.0005
    grid = np.linspace(0.0, horizon, 401)
    gamma = make_path(np.linspace(0, horizon, 4001),
                      0.1 * np.sin(2 * np.pi * np.linspace(0, horizon, 4001)))
    # R1(t, s) = exp(-(t - s)) for unit gain, unit decay and identity readout
    kern = VolterraKernels.from_functions(grid, [lambda t, S: np.exp(-(t - S[:, 0]))])
    ts = (0.5, 1.0, 2.0)
    mc, se = output_deviation_mc(params, gamma, ts, dt, 2000, derive_seed(seed, "volterra"))
    pred = np.array([volterra_eval(kern, gamma, t) for t in ts])
    err = np.abs(pred - mc)
    first_ok = bool(np.all(err <= 3 * se + 1e-3))
    r2, r2_se = impulse_response2_mc(params, [1.0], 1.0, 0.3, 0.6, ImpulseSpec(eps=0.05),
                                     0.005, 10_000, derive_seed(seed, "second"))
    second_ok = abs(r2) <= 3 * r2_se
    return first_ok and second_ok, {"volterra": pred.tolist(), "mc": mc.tolist(),
                                    "stderr": se.tolist(), "r2": r2, "r2_stderr": r2_se}


def synthetic_kernel_sets(grid):
    F = VolterraKernels.from_functions(grid, [
        lambda t, S: np.exp(-(t - S[:, 0])),
        lambda t, S: 0.5 * np.exp(-(2 * t - S[:, 0] - S[:, 1]))])
    G = VolterraKernels.from_functions(grid, [
        lambda t, S: np.cos(t - S[:, 0]) * np.exp(-0.5 * (t - S[:, 0])),
        lambda t, S: 0.3 * np.exp(-(t - S[:, 0]) - (t - S[:, 1]))])
    return F, G


def check_composition(seed: int = 0):
    grid = np.linspace(0.0, 1.0, 64)
    F, G = synthetic_kernel_sets(grid)
    H = compose_kernels(F, G)
    g = make_path(grid, 0.1 * np.sin(2 * np.pi * grid) + 0.05 * np.cos(3 * np.pi * grid))
    inner = make_path(grid, volterra_eval_grid(G, g))
    rel = 0.0
    for i in (16, 32, 48, 63):
        nested = volterra_eval(F, inner, grid[i])
        composed = volterra_eval(H, g, grid[i])
        rel = max(rel, abs(composed - nested) / abs(nested))
    return rel <= 1e-3 and H.orders == 4, {"max_rel": rel, "orders": H.orders}


# --- 9: representer learning -----------------------------------------------------

LEARN_SIZES = (25, 50, 100, 200)


def check_representer_learning(seed: int = 0, K: int = 10_000):
    rng = np.random.default_rng(derive_seed(seed, "learn-paths"))
    teacher = SrnnParams.random_tanh(8, 2, 0.1, seed=derive_seed(seed, "teacher") % 2**32)
    paths = [random_smooth_path(rng) for _ in range(max(LEARN_SIZES) + 50)]
    y = np.array([output_functional(teacher, p, 1.0, 0.02, K,
                                    derive_seed(seed, f"target-{i}"))[0]
                  for i, p in enumerate(paths)])
    train, test = paths[:-50], paths[-50:]
    spec = KernelSpec.uniform(10, 1.0, basis=PolyBasis("monomial", 3))
    errs, resid = {}, {}
    for n in LEARN_SIZES:
        model = fit(train[:n], y[:n], spec, ridge=1e-10)
        errs[n] = rmse(model.predict_many(test), y[-50:])
        r = training_residual(model, y[:n])
        resid[n] = float(np.sqrt(np.mean(r ** 2)) / np.std(y[:n]))
    ok = errs[200] < errs[25] and max(resid.values()) <= 1e-6
    return ok, {"test_rmse": errs, "train_residual_rel": resid}


# --- 10: memoryless features --------------------------------------------------------

def monomial_nested_integral(powers, q: int, t: float) -> float:
    """Exact ``t^p0 int s1^(p1+q) int ... sn^(pn+q)`` over the ordered simplex."""
    total_coef = Fraction(1)
    deg = 0
    for p in reversed(powers[1:]):
        deg += p + q + 1
        total_coef /= deg
    return float(total_coef) * t ** (deg + powers[0])


def check_memoryless_features(seed: int = 0):
    worst = 0.0
    for q in (0, 1, 2):
        s = np.linspace(0.0, 1.0, 2 ** 14 + 1)
        u = make_path(s, s ** q)
        vals, labels = memoryless_features(u, 3, 2, 1.0)
        for v, (_, ps, _) in zip(vals, labels):
            worst = max(worst, abs(v - monomial_nested_integral(ps, q, 1.0)))
    return worst <= 1e-8, {"max_abs": worst}


# --- 11: determinism and discrete reduction -------------------------------------------

def _discrete_rnn_reference(params: SrnnParams, h0, inputs, noise):
    """Literal discrete update with every sum accumulated left to right."""
    n = params.n
    act = params.act
    h = [float(x) for x in h0]
    out = [list(h)]
    for u, xi in zip(inputs, noise):
        pre = []
        for i in range(n):
            acc = h[0] * params.W[i, 0]
            for j in range(1, n):
                acc = acc + h[j] * params.W[i, j]
            pre.append(acc + params.b[i])
        a = act(np.array(pre))
        new = []
        for i in range(n):
            cu = u[0] * params.C[i, 0]
            for j in range(1, params.m):
                cu = cu + u[j] * params.C[i, j]
            sx = xi[0] * params.sigma[i, 0]
            for j in range(1, params.r):
                sx = sx + xi[j] * params.sigma[i, j]
            new.append(float(a[i] + cu + sx))
        h = new
        out.append(list(h))
    return np.array(out)


def check_determinism(seed: int = 0):
    params = SrnnParams.random_tanh(4, 2, 0.3, seed=derive_seed(seed, "rnn") % 2**32)
    u = random_smooth_path(np.random.default_rng(derive_seed(seed, "rnn-input")),
                           horizon=50.0, knots=51)
    steps, K = 50, 64
    drive = input_drive(params, u, steps, 1.0)
    run = lambda: simulate_ensemble(params, drive, 0.1, K, seed, np.arange(0, steps + 1, 5))
    a, b = run(), run()
    reruns_equal = bool(np.array_equal(a, b))
    # step size one and unit decay: the Euler step is the discrete RNN update
    em = simulate_ensemble(params, drive, 1.0, 3, seed, np.arange(steps + 1))[0]
    rnn = discretize(params, 1.0)
    inputs = u(np.arange(steps, dtype=float))
    bitwise = True
    for k in range(3):
        h0, xi = trajectory_noise(params, steps, seed, k)
        ref = _discrete_rnn_reference(params, h0, inputs, xi)
        bitwise &= bool(np.array_equal(em[k], ref))
        bitwise &= bool(np.array_equal(rnn.rollout(h0, inputs, xi), ref))
    return reruns_equal and bitwise, {"reruns_identical": reruns_equal,
                                      "discrete_bitwise": bitwise}


CRITERIA: list[tuple[int, str, float, Callable]] = [
    (1, "signature closed forms", 1.0, check_signature_closed_forms),
    (2, "Chen identity and quadrature oracle", 30.0, check_chen_identity),
    (3, "exponential property", 5.0, check_exponential_property),
    (4, "Gram positivity", 30.0, check_gram_positivity),
    (5, "OU linear response", 120.0, check_ou_linear_response),
    (6, "fluctuation-dissipation", 120.0, check_fdt),
    (7, "Volterra first order", 120.0, check_volterra_first_order),
    (8, "kernel composition", 60.0, check_composition),
    (9, "representer learning", 600.0, check_representer_learning),
    (10, "memoryless features", 5.0, check_memoryless_features),
    (11, "determinism and discrete reduction", 10.0, check_determinism),
]


def run_one(number: int, seed: int = 0) -> CriterionResult:
    for num, name, budget, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            passed, details = fn(seed)
            return CriterionResult(num, name, bool(passed), time.perf_counter() - t0,
                                   budget, details)
    raise KeyError(f"no acceptance criterion {number}")


def run(seed: int = 0, only=None, echo: Callable[[str], None] | None = None):
    results = []
    for num, *_ in CRITERIA:
        if only is not None and num not in only:
            continue
        res = run_one(num, seed)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results

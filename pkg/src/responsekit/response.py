"""Response kernels of SRNNs: Monte-Carlo estimation, FDT, Volterra series.

Volterra kernels use the absolute-time convention

    F_t[g] = sum_n  int_{[0,t]^n} R^(n)(t, s_1..s_n) g(s_1) ... g(s_n) ds,

with ``R^(n)(t, .)`` symmetric and vanishing outside ``[0, t]^n``. Only the
ordered tuples ``s_1 <= ... <= s_n`` are stored.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .paths import Path, refine_grid
from .rng import derive_seed
from .srnn import (SrnnParams, input_drive, mean_and_stderr, simulate_ensemble,
                   time_grid)


class AmplitudeWarning(UserWarning):
    """Second-order contamination of a first-order impulse estimate."""


class NonStationaryInitError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


# --- impulse response by Monte Carlo ---------------------------------------

@dataclass(frozen=True)
class ImpulseSpec:
    """Bump used to probe the response: amplitude, width (None = 4 dt), shape."""

    eps: float = 0.05
    width: float | None = None
    shape: str = "box"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("impulse amplitude must be positive")
        if self.width is not None and not self.width > 0:
            raise ValueError("impulse width must be positive")
        if self.shape not in ("box", "triangle"):
            raise ValueError(f"unknown bump shape {self.shape!r}")


def bump_profile(spec: ImpulseSpec, s: float, dt: float, steps: int) -> np.ndarray:
    """Unit-height bump centred at ``s`` over the EM steps; shape ``(steps,)``.

    Step ``k`` acts on ``[k dt, (k+1) dt]``, so the bump is placed by the step
    midpoints.
    """
    width = 4 * dt if spec.width is None else spec.width
    mid = (np.arange(steps) + 0.5) * dt
    if spec.shape == "box":
        w = max(1, int(round(width / dt)))
        k0 = int(round(s / dt - w / 2))
        prof = np.zeros(steps)
        if k0 < 0 or k0 + w > steps:
            raise ValueError(f"bump at s={s} does not fit inside the simulated window")
        prof[k0:k0 + w] = 1.0
    else:
        prof = np.clip(1.0 - np.abs(mid - s) / (width / 2), 0.0, None)
        if not prof.any():
            raise ValueError("triangle bump narrower than one step")
    return prof


def _central_estimate(f_plus, f_minus, eps, area):
    return mean_and_stderr((f_plus - f_minus) / (2.0 * eps * area))


def _grid_indices(ts, dt) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    idx = np.round(ts / dt).astype(int)
    if np.any(np.abs(idx * dt - ts) > 1e-9 * np.maximum(1.0, ts)):
        raise ValueError("observation times must lie on the dt grid")
    return idx


def impulse_response_mc(params: SrnnParams, direction, t, s: float,
                        spec: ImpulseSpec = ImpulseSpec(), dt: float = 0.005,
                        K: int = 10_000, seed: int = 0, u: Path | None = None,
                        check_amplitude: bool = True):
    """First-order response ``R^(1)(t, s)`` along an input direction.

    Runs the SRNN with ``u +/- eps * bump_s * direction`` on common random
    numbers and returns the central difference divided by ``2 eps |bump|_1``.
    ``t`` may be an array of observation times (one simulation serves all).
    Returns ``(estimate, stderr)`` with the shape of ``t``.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= s):
        raise ValueError("need s < t for every observation time")
    if s <= 0:
        raise ValueError("need s > 0")
    d = np.asarray(direction, dtype=float).reshape(params.m)
    steps, _ = time_grid(float(ts.max()), dt)
    rec = _grid_indices(ts, dt)
    prof = bump_profile(spec, s, dt, steps)
    area = float(np.sum(prof) * dt)
    base = input_drive(params, u, steps, dt)
    kick = spec.eps * prof[:, None] * (params.C @ d)[None, :]
    drives = [base + kick, base - kick] + ([base] if check_amplitude else [])
    f = params.readout(simulate_ensemble(params, np.stack(drives), dt, K, seed, rec))
    est, se = _central_estimate(f[0], f[1], spec.eps, area)
    if check_amplitude:
        quad = np.mean(f[0] + f[1] - 2.0 * f[2], axis=0)
        lin = np.mean(f[0] - f[1], axis=0) / 2.0
        if np.any(np.abs(quad) > 0.1 * np.abs(lin)):
            warnings.warn("impulse amplitude too large: quadratic response exceeds 10% "
                          "of the linear one", AmplitudeWarning, stacklevel=2)
    if np.ndim(t) == 0:
        return float(np.ravel(est)[0]), float(np.ravel(se)[0])
    return est, se


def impulse_response2_mc(params: SrnnParams, direction, t: float, s1: float, s2: float,
                         spec: ImpulseSpec = ImpulseSpec(), dt: float = 0.005,
                         K: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Second-order response ``R^(2)(t, s1, s2)`` by finite differences on CRN.

    Distinct ``s1, s2``: the mixed difference over ``(+-eps, +-eps)`` divided by
    ``8 eps^2 A1 A2``. Equal times: the second difference ``F+ + F- - 2 F0``
    divided by ``2 eps^2 A^2``.
    """
    if not (0 < s1 < t and 0 < s2 < t):
        raise ValueError("need 0 < s1, s2 < t")
    d = np.asarray(direction, dtype=float).reshape(params.m)
    steps, _ = time_grid(t, dt)
    cd = (params.C @ d)[None, :]
    p1 = bump_profile(spec, s1, dt, steps)
    p2 = bump_profile(spec, s2, dt, steps)
    a1, a2 = p1.sum() * dt, p2.sum() * dt
    e = spec.eps
    if s1 == s2:
        drives = np.stack([e * p1[:, None] * cd, -e * p1[:, None] * cd, 0.0 * p1[:, None] * cd])
        f = params.readout(simulate_ensemble(params, drives, dt, K, seed, [steps]))[:, :, 0]
        return mean_and_stderr((f[0] + f[1] - 2.0 * f[2]) / (2.0 * e * e * a1 * a1))
    combos = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    drives = np.stack([(a * e * p1 + b * e * p2)[:, None] * cd for a, b in combos])
    f = params.readout(simulate_ensemble(params, drives, dt, K, seed, [steps]))[:, :, 0]
    mixed = f[0] - f[1] - f[2] + f[3]
    return mean_and_stderr(mixed / (8.0 * e * e * a1 * a2))


def output_deviation_mc(params: SrnnParams, u: Path, t, dt: float, K: int,
                        seed: int):
    """``F_t[u] - F_t[0]`` on common random numbers; ``(estimate, stderr)``."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    steps, _ = time_grid(float(ts.max()), dt)
    rec = _grid_indices(ts, dt)
    drive = input_drive(params, u, steps, dt)
    f = params.readout(simulate_ensemble(params, np.stack([drive, 0.0 * drive]), dt, K,
                                         seed, rec))
    est, se = mean_and_stderr(f[0] - f[1])
    if np.ndim(t) == 0:
        return float(np.ravel(est)[0]), float(np.ravel(se)[0])
    return est, se


def _check_stationary(params: SrnnParams):
    if not params.is_linear:
        raise NonStationaryInitError("FDT correlation requires a linear SRNN (activation 'zero')")
    evals = np.linalg.eigvalsh(params.noise_cov)
    if evals.min() <= 0:
        raise NonStationaryInitError("noise covariance sigma sigma^T must be positive definite")
    s_inf = params.stationary_cov()
    init = params.init
    if (init.kind != "gaussian" or not np.allclose(init.cov, s_inf, rtol=1e-6, atol=1e-12)
            or not np.allclose(init.mean_vector(params.n), 0.0)):
        raise NonStationaryInitError(
            "initial law must be the stationary Gaussian N(0, S) with Gamma S + S Gamma^T = sigma sigma^T")
    return s_inf


def fdt_correlation_ou(params: SrnnParams, direction, tau, dt: float = 0.005,
                       K: int = 10_000, seed: int = 0):
    """Equilibrium correlation ``E[f(h_tau) v(h_0)]`` with the conjugate observable.

    For the stationary Gaussian law ``-grad log rho = S^-1 h``, so
    ``v(h) = (S^-1 h) . (C direction)``. At ``tau = 0`` and an identity readout
    the estimate is the normalised autocovariance, close to 1.
    """
    s_inf = _check_stationary(params)
    d = np.asarray(direction, dtype=float).reshape(params.m)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < 0):
        raise ValueError("lags must be nonnegative")
    T = float(taus.max())
    if T > 0:
        steps, _ = time_grid(T, dt)
    else:
        steps = 1
    rec = _grid_indices(taus, dt)
    states = simulate_ensemble(params, np.zeros((steps, params.n)), dt, K, seed,
                               np.concatenate([[0], rec]))[0]
    conj = states[:, 0] @ np.linalg.solve(s_inf, params.C @ d)
    f = params.readout(states[:, 1:])
    est, se = mean_and_stderr(f * conj[:, None])
    if np.ndim(tau) == 0:
        return float(est[0]), float(se[0])
    return est, se


def fdt_report(params: SrnnParams, direction, taus: Sequence[float], s: float,
               spec: ImpulseSpec = ImpulseSpec(), dt: float = 0.005, K: int = 10_000,
               seed: int = 0) -> list[dict]:
    """Impulse response vs equilibrium correlation at each lag.

    ``params`` must carry the stationary initial law. The two estimators use
    independent substreams derived from ``seed``.
    """
    taus = np.asarray(taus, dtype=float)
    imp, imp_se = impulse_response_mc(params, direction, s + taus, s, spec, dt, K,
                                      derive_seed(seed, "impulse"))
    cor, cor_se = fdt_correlation_ou(params, direction, taus, dt, K,
                                     derive_seed(seed, "fdt"))
    return [{"tau": float(t), "impulse": float(i), "correlation": float(c),
             "stderr_i": float(si), "stderr_c": float(sc)}
            for t, i, c, si, sc in zip(taus, imp, cor, imp_se, cor_se)]


def write_fdt_csv(rows: list[dict], filename) -> None:
    cols = ["tau", "impulse", "correlation", "stderr_i", "stderr_c"]
    cols += [k for k in (rows[0] if rows else {}) if k not in cols]
    with open(filename, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(r[c])) for c in cols) + "\n")


# --- Volterra kernels on the ordered simplex --------------------------------

@lru_cache(maxsize=512)
def sorted_tuples(i: int, n: int) -> np.ndarray:
    """All nondecreasing ``n``-tuples with entries in ``0..i``, lexicographic."""
    dtype = np.int16 if i < 32000 else np.int32
    out = np.zeros((1, 0), dtype=dtype)
    for _ in range(n):
        last = out[:, -1] if out.shape[1] else np.zeros(len(out), dtype=dtype)
        counts = i + 1 - last.astype(np.int64)
        rows = np.repeat(np.arange(len(out)), counts)
        start = np.repeat(last.astype(np.int64), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        out = np.column_stack([out[rows], (start + offs).astype(dtype)])
    out.setflags(write=False)
    return out


def multiplicity(tuples: np.ndarray) -> np.ndarray:
    """Number of distinct orderings of each sorted tuple: ``n! / prod(c_j!)``."""
    n = tuples.shape[1]
    mult = np.full(len(tuples), float(math.factorial(n)))
    run = np.ones(len(tuples))
    for j in range(1, n):
        run = np.where(tuples[:, j] == tuples[:, j - 1], run + 1, 1.0)
        mult /= run
    return mult


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.zeros(len(x))
    if len(x) > 1:
        h = np.diff(x)
        w[:-1] += h / 2
        w[1:] += h / 2
    return w


@dataclass(frozen=True, eq=False)
class VolterraKernels:
    """Kernels ``R^(1..N)`` tabulated on a time grid.

    ``kernels[n - 1][i]`` holds ``R^(n)(grid[i], .)`` at the tuples
    ``sorted_tuples(i, n)`` (grid indices).
    """

    grid: np.ndarray
    kernels: tuple

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise GridMismatchError("kernel grid must be strictly increasing")
        ks = []
        for n, per_t in enumerate(self.kernels, start=1):
            if len(per_t) != len(grid):
                raise ValueError(f"order {n}: expected {len(grid)} time slices")
            row = []
            for i, a in enumerate(per_t):
                a = np.asarray(a, dtype=float).ravel()
                if a.size != len(sorted_tuples(i, n)):
                    raise ValueError(f"order {n}, slice {i}: wrong number of entries")
                if not np.all(np.isfinite(a)):
                    raise ValueError(f"order {n}, slice {i}: non-finite kernel values")
                row.append(a)
            ks.append(tuple(row))
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "kernels", tuple(ks))

    @property
    def orders(self) -> int:
        return len(self.kernels)

    @classmethod
    def from_functions(cls, grid, funcs: Sequence[Callable]) -> "VolterraKernels":
        """Tabulate ``funcs[n-1](t, S)`` where ``S`` is an ``(P, n)`` array of times."""
        grid = np.asarray(grid, dtype=float)
        ks = []
        for n, fn in enumerate(funcs, start=1):
            ks.append([np.asarray(fn(grid[i], grid[sorted_tuples(i, n)]), dtype=float)
                       * np.ones(len(sorted_tuples(i, n)))
                       for i in range(len(grid))])
        return cls(grid, tuple(ks))

    def dense(self, n: int, i: int) -> np.ndarray:
        """``R^(n)(grid[i], .)`` as a full symmetric array of shape ``(i+1,) * n``."""
        tup = sorted_tuples(i, n)
        vals = self.kernels[n - 1][i]
        out = np.zeros((i + 1,) * n)
        for perm in set(itertools.permutations(range(n))):
            out[tuple(tup[:, p] for p in perm)] = vals
        return out

    def value(self, n: int, i: int, idx: Sequence[int]) -> float:
        """Kernel value at grid-index tuple ``idx`` (any order)."""
        idx = sorted(int(j) for j in idx)
        if idx and idx[-1] > i:
            return 0.0
        tup = sorted_tuples(i, n)
        pos = np.flatnonzero(np.all(tup == np.array(idx), axis=1))
        return float(self.kernels[n - 1][i][pos[0]])

    def to_dict(self) -> dict:
        return {"orders": self.orders, "grid": self.grid.tolist(),
                "kernels": {str(n): [a.tolist() for a in per_t]
                            for n, per_t in enumerate(self.kernels, start=1)}}

    @classmethod
    def from_dict(cls, d: dict) -> "VolterraKernels":
        orders = int(d["orders"])
        ks = tuple(d["kernels"][str(n)] for n in range(1, orders + 1))
        return cls(np.asarray(d["grid"], dtype=float), ks)

    def save(self, filename) -> None:
        with open(filename, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, filename) -> "VolterraKernels":
        with open(filename) as fh:
            return cls.from_dict(json.load(fh))


def _grid_index(grid: np.ndarray, t: float) -> int:
    i = int(np.argmin(np.abs(grid - t)))
    if abs(grid[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise GridMismatchError(f"t={t} is not a grid point")
    return i


def _sample_input(grid: np.ndarray, gamma: Path, i: int) -> np.ndarray:
    if gamma.dim != 1:
        raise GridMismatchError("Volterra input must be a scalar path")
    if gamma.t0 > grid[0] + 1e-12 or gamma.t1 < grid[i] - 1e-12:
        raise GridMismatchError("input path does not cover [grid[0], t]")
    return gamma(grid[: i + 1])[:, 0]


def volterra_eval(k: VolterraKernels, gamma: Path, t: float) -> float:
    """Truncated Volterra series at grid time ``t`` by tensor trapezoid quadrature.

    The cube integral of a symmetric integrand is summed over ordered tuples
    with their permutation multiplicity.
    """
    i = _grid_index(k.grid, t)
    g = _sample_input(k.grid, gamma, i)
    wg = trapezoid_weights(k.grid[: i + 1]) * g
    total = 0.0
    for n in range(1, k.orders + 1):
        tup = sorted_tuples(i, n)
        prod = multiplicity(tup) * k.kernels[n - 1][i]
        for j in range(n):
            prod = prod * wg[tup[:, j]]
        total += float(prod.sum())
    return total


def volterra_eval_grid(k: VolterraKernels, gamma: Path) -> np.ndarray:
    """``volterra_eval`` at every grid time."""
    return np.array([volterra_eval(k, gamma, t) for t in k.grid])


def compositions(r: int, k: int, max_part: int):
    """Ordered ``k``-part compositions of ``r`` with parts in ``1..max_part``."""
    if k == 1:
        if 1 <= r <= max_part:
            yield (r,)
        return
    for first in range(1, min(max_part, r - k + 1) + 1):
        for rest in compositions(r - first, k - 1, max_part):
            yield (first,) + rest


def _interval_weights(grid: np.ndarray, i: int) -> np.ndarray:
    """``W[s, lo]``: trapezoid weight at node ``s`` for the interval ``[grid[lo], grid[i]]``."""
    W = np.zeros((i + 1, i + 1))
    for lo in range(i):
        W[lo:, lo] = trapezoid_weights(grid[lo: i + 1])
    return W


def compose_kernels(F: VolterraKernels, G: VolterraKernels) -> VolterraKernels:
    """Kernels of ``F_t[G_.[g]]`` up to order ``N + M``.

    ``R^(r)(t, t_1..t_r) = sum_k sum_{i_1+..+i_k=r} int R_F^(k)(t, s_1..s_k)
    prod_j R_G^(i_j)(s_j, block_j) ds``, then symmetrised over ``t_1..t_r``.
    The inner kernel vanishes unless every argument of its block is below
    ``s_j``, so each ``s_j`` integral runs over ``[max(block_j), t]``.
    """
    if F.grid.shape != G.grid.shape or not np.allclose(F.grid, G.grid, rtol=0, atol=1e-12):
        raise GridMismatchError("composition needs a shared grid")
    grid = F.grid
    npts = len(grid)
    N, M = F.orders, G.orders
    # inner kernels as full arrays over (s, args...), zero where an argument exceeds s
    inner = {}
    maxarg = {}
    for j in range(1, M + 1):
        full = np.zeros((npts,) * (j + 1))
        for s in range(npts):
            full[(s,) + (slice(0, s + 1),) * j] = G.dense(j, s)
        inner[j] = full
        maxarg[j] = np.maximum.reduce(np.indices((npts,) * j)) if j > 1 else np.arange(npts)
    letters_s = "ABCDEFGHIJKLMNOP"
    letters_t = "abcdefghijklmnop"
    out = [[] for _ in range(N + M)]
    for i in range(npts):
        W = _interval_weights(grid, i)
        sl = slice(0, i + 1)
        B = {}
        for j in range(1, M + 1):
            lo = maxarg[j][(sl,) * j]
            B[j] = W[:, lo] * inner[j][(sl,) * (j + 1)]
        Fd = {k: F.dense(k, i) for k in range(1, N + 1)}
        for r in range(1, N + M + 1):
            total = np.zeros((i + 1,) * r)
            for k in range(1, min(N, r) + 1):
                for comp in compositions(r, k, M):
                    subs = [letters_s[:k]]
                    ops = [Fd[k]]
                    pos = 0
                    for q, part in enumerate(comp):
                        subs.append(letters_s[q] + letters_t[pos:pos + part])
                        ops.append(B[part])
                        pos += part
                    expr = ",".join(subs) + "->" + letters_t[:r]
                    total += np.einsum(expr, *ops, optimize=True)
            tup = sorted_tuples(i, r)
            sym = np.zeros(len(tup))
            perms = list(itertools.permutations(range(r)))
            for p in perms:
                sym += total[tuple(tup[:, q] for q in p)]
            out[r - 1].append(sym / len(perms))
    return VolterraKernels(grid, tuple(out))


# --- memoryless iterated-integral features ---------------------------------

def memoryless_features(u: Path, max_order: int, max_power: int, t: float,
                        refine: int = 1) -> tuple[np.ndarray, list]:
    """Nested integrals ``t^p0 int_0^t s1^p1 u^k1(s1) ... int_0^s_{n-1} sn^pn u^kn(sn)``.

    All orders ``1..max_order``, powers ``0..max_power`` and channels. Ordered
    by order, then the power multi-index ``(p0..pn)``, then the channel
    multi-index, both lexicographic. Inner integrals are tabulated once by
    cumulative trapezoid on ``u``'s knots (refined ``refine`` times) and
    reused by every outer level. Returns ``(values, labels)`` with labels
    ``(n, powers, channels)``; channels are 1-based.
    """
    if max_order < 1 or max_power < 0:
        raise ValueError("need max_order >= 1 and max_power >= 0")
    if t < u.t0 or t > u.t1 + 1e-12:
        raise ValueError("t outside the input path's span")
    knots = np.union1d(u.times[u.times < t], [t])
    s = refine_grid(knots, refine) if len(knots) > 1 else knots
    uv = u(s)
    memo: dict[tuple, np.ndarray] = {(): np.ones(len(s))}

    def nested(seq: tuple) -> np.ndarray:
        # seq = ((p1, k1), (p2, k2), ...): outermost first
        if seq not in memo:
            (p, k), rest = seq[0], seq[1:]
            integrand = s ** p * uv[:, k] * nested(rest)
            memo[seq] = cumulative_trapezoid(integrand, s, initial=0.0)
        return memo[seq]

    values, labels = [], []
    powers = range(max_power + 1)
    chans = range(u.dim)
    for n in range(1, max_order + 1):
        for ps in itertools.product(powers, repeat=n + 1):
            for ks in itertools.product(chans, repeat=n):
                seq = tuple(zip(ps[1:], ks))
                values.append(t ** ps[0] * nested(seq)[-1])
                labels.append((n, ps, tuple(k + 1 for k in ks)))
    return np.array(values), labels

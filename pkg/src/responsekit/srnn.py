"""Euler-Maruyama simulation of input-driven stochastic RNNs.

The hidden state obeys ``dh = (-Gamma h + a(W h + b) + C u_t) dt + sigma dW``
and the scalar readout is ``f(h)``. One step of the scheme is the affine map

    h' = A h + dt * (a(W h + b) + C u_t) + theta xi,   A = I - dt Gamma,
    theta = sqrt(dt) sigma,

evaluated with a fixed summation order so that a trajectory is bit-identical
whether it is simulated alone or inside a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from .paths import Path, refine_grid
from .rng import substream

DIVERGENCE_BOUND = 1e8
_CHUNK_FLOATS = 4_000_000


class DivergenceError(RuntimeError):
    def __init__(self, step: int, trajectory: int | None = None):
        where = f" (trajectory {trajectory})" if trajectory is not None else ""
        super().__init__(f"hidden state left |h| <= {DIVERGENCE_BOUND:g} at step {step}{where}")
        self.step = step
        self.trajectory = trajectory


class ParamsError(ValueError):
    pass


def _zero(x):
    return np.zeros_like(x)


ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "zero": _zero,
    "identity": lambda x: x,
}


def register_activation(name: str, fn: Callable[[np.ndarray], np.ndarray]) -> None:
    ACTIVATIONS[name] = fn


def _matvec(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``x @ m.T`` over the last axis, accumulated column by column."""
    out = x[..., 0:1] * m[:, 0]
    for j in range(1, m.shape[1]):
        out = out + x[..., j:j + 1] * m[:, j]
    return out


@dataclass(frozen=True)
class Readout:
    """Scalar observable: ``identity`` (h[index]), ``linear`` (w.h) or ``tanh`` (tanh(w.h))."""

    kind: str = "identity"
    index: int = 0
    weights: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "linear", "tanh"):
            raise ParamsError(f"unknown readout {self.kind!r}")
        if self.kind != "identity" and self.weights is None:
            raise ParamsError(f"readout {self.kind!r} needs weights")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def vector(self, n: int) -> np.ndarray:
        if self.kind == "identity":
            w = np.zeros(n)
            w[self.index] = 1.0
            return w
        return np.asarray(self.weights, dtype=float)

    def __call__(self, h: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return h[..., self.index]
        z = _matvec(h, self.vector(h.shape[-1])[None, :])[..., 0]
        return np.tanh(z) if self.kind == "tanh" else z

    def to_dict(self) -> dict:
        return {"kind": self.kind, "index": self.index,
                "weights": list(self.weights) if self.weights is not None else None}


@dataclass(frozen=True, eq=False)
class InitialState:
    """Law of ``h_0``: a point mass or a Gaussian."""

    kind: str = "point"
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("point", "gaussian"):
            raise ParamsError(f"unknown initial law {self.kind!r}")
        if self.mean is not None:
            object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if self.kind == "gaussian":
            if self.cov is None:
                raise ParamsError("gaussian initial law needs a covariance")
            cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            object.__setattr__(self, "cov", cov)
            evals = np.linalg.eigvalsh((cov + cov.T) / 2)
            if evals.min() < -1e-12 * max(1.0, evals.max()):
                raise ParamsError("initial covariance is not positive semidefinite")
            # factor once; eigen-based so singular covariances are allowed
            w, v = np.linalg.eigh((cov + cov.T) / 2)
            object.__setattr__(self, "_factor", v * np.sqrt(np.clip(w, 0, None)))

    @classmethod
    def point(cls, h0) -> "InitialState":
        return cls("point", mean=h0)

    @classmethod
    def gaussian(cls, mean, cov) -> "InitialState":
        return cls("gaussian", mean=mean, cov=cov)

    def mean_vector(self, n: int) -> np.ndarray:
        return np.zeros(n) if self.mean is None else self.mean

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        mean = self.mean_vector(n)
        if self.kind == "point":
            return mean.copy()
        return mean + _matvec(rng.standard_normal(n), self._factor)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "mean": None if self.mean is None else self.mean.tolist()}
        if self.kind == "gaussian":
            d["cov"] = self.cov.tolist()
        return d


def _as_matrix(x, shape, name):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 and shape[0] == shape[1]:
        a = float(a) * np.eye(shape[0])
    a = np.atleast_2d(a) if len(shape) == 2 else np.atleast_1d(a)
    if a.shape != shape:
        raise ParamsError(f"{name}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParamsError(f"{name}: non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class SrnnParams:
    gamma: np.ndarray
    W: np.ndarray
    b: np.ndarray
    C: np.ndarray
    sigma: np.ndarray
    activation: str = "tanh"
    readout: Readout = field(default_factory=Readout)
    init: InitialState = field(default_factory=InitialState)

    def __post_init__(self):
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        n = gamma.shape[0]
        C = np.asarray(self.C, dtype=float)
        C = C.reshape(n, -1) if C.ndim < 2 else C
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = float(sigma) * np.eye(n)
        sigma = sigma.reshape(n, -1) if sigma.ndim < 2 else sigma
        object.__setattr__(self, "gamma", _as_matrix(gamma, (n, n), "gamma"))
        object.__setattr__(self, "W", _as_matrix(self.W, (n, n), "W"))
        object.__setattr__(self, "b", _as_matrix(self.b, (n,), "b"))
        object.__setattr__(self, "C", _as_matrix(C, (n, C.shape[1]), "C"))
        object.__setattr__(self, "sigma", _as_matrix(sigma, (n, sigma.shape[1]), "sigma"))
        if np.linalg.eigvals(self.gamma).real.min() <= 0:
            raise ParamsError("gamma must be positive stable (eigenvalues with positive real part)")
        if self.activation not in ACTIVATIONS:
            raise ParamsError(f"unknown activation {self.activation!r}")
        if self.init.mean is not None and self.init.mean.shape != (n,):
            raise ParamsError(f"init mean must have shape ({n},)")
        if self.init.cov is not None and self.init.cov.shape != (n, n):
            raise ParamsError(f"init covariance must have shape ({n}, {n})")
        if self.readout.kind != "identity" and len(self.readout.weights) != n:
            raise ParamsError(f"readout weights must have length {n}")
        if self.readout.kind == "identity" and not 0 <= self.readout.index < n:
            raise ParamsError("readout index out of range")

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[1]

    @property
    def r(self) -> int:
        return self.sigma.shape[1]

    @property
    def noise_cov(self) -> np.ndarray:
        return self.sigma @ self.sigma.T

    @property
    def is_linear(self) -> bool:
        return self.activation == "zero"

    def act(self, x: np.ndarray) -> np.ndarray:
        return ACTIVATIONS[self.activation](x)

    def replace(self, **kw) -> "SrnnParams":
        d = dict(gamma=self.gamma, W=self.W, b=self.b, C=self.C, sigma=self.sigma,
                 activation=self.activation, readout=self.readout, init=self.init)
        d.update(kw)
        return SrnnParams(**d)

    def stationary_cov(self) -> np.ndarray:
        """Solution of ``Gamma S + S Gamma^T = sigma sigma^T`` (linear drift only)."""
        s = linalg.solve_continuous_lyapunov(self.gamma, self.noise_cov)
        return (s + s.T) / 2

    def stationary(self) -> "SrnnParams":
        """Linear SRNN started from its stationary Gaussian law."""
        return self.replace(init=InitialState.gaussian(np.zeros(self.n), self.stationary_cov()))

    @classmethod
    def scalar_ou(cls, gamma: float = 1.0, sigma: float = 0.5, c: float = 1.0,
                  init: InitialState | None = None) -> "SrnnParams":
        return cls(gamma=[[gamma]], W=[[0.0]], b=[0.0], C=[[c]], sigma=[[sigma]],
                   activation="zero", readout=Readout("identity", 0),
                   init=init or InitialState.point([0.0]))

    @classmethod
    def random_tanh(cls, n: int, m: int, sigma: float, seed: int = 0,
                    w_scale: float = 1.0, c_scale: float = 1.0) -> "SrnnParams":
        """Fixed random tanh network with ``Gamma = I`` and a linear readout."""
        rng = np.random.default_rng(seed)
        return cls(gamma=np.eye(n),
                   W=w_scale * rng.standard_normal((n, n)) / np.sqrt(n),
                   b=0.1 * rng.standard_normal(n),
                   C=c_scale * rng.standard_normal((n, m)),
                   sigma=sigma * np.eye(n), activation="tanh",
                   readout=Readout("linear", weights=rng.standard_normal(n) / np.sqrt(n)),
                   init=InitialState.point(np.zeros(n)))

    def to_dict(self) -> dict:
        return {"gamma": self.gamma.tolist(), "W": self.W.tolist(), "b": self.b.tolist(),
                "C": self.C.tolist(), "sigma": self.sigma.tolist(),
                "activation": self.activation, "readout": self.readout.to_dict(),
                "init": self.init.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SrnnParams":
        d = dict(d)
        ro = d.pop("readout", None) or {}
        init = d.pop("init", None) or {}
        n = np.atleast_2d(np.asarray(d["gamma"], dtype=float)).shape[0]
        if np.ndim(d["gamma"]) == 0:
            n = np.atleast_1d(np.asarray(d.get("b", [0.0]))).shape[0]
            d["gamma"] = float(d["gamma"]) * np.eye(n)
        d.setdefault("W", np.zeros((n, n)))
        d.setdefault("b", np.zeros(n))
        return cls(readout=Readout(ro.get("kind", "identity"), int(ro.get("index", 0)),
                                   ro.get("weights")),
                   init=InitialState(init.get("kind", "point"), init.get("mean"), init.get("cov")),
                   **d)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    seed: int
    index: int = 0

    def to_csv(self, filename) -> None:
        n = self.states.shape[1]
        header = ",".join(["t"] + [f"h{i + 1}" for i in range(n)])
        np.savetxt(filename, np.column_stack([self.times, self.states]), delimiter=",",
                   header=header, comments="", fmt="%.17g")


def time_grid(T: float, dt: float) -> tuple[int, np.ndarray]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return steps, np.arange(steps + 1) * dt


def input_drive(params: SrnnParams, u: Path | None, steps: int, dt: float) -> np.ndarray:
    """``C u(t_k)`` at the left endpoints ``t_k = k dt``; shape ``(steps, n)``."""
    if u is None:
        return np.zeros((steps, params.n))
    if u.dim != params.m:
        raise ParamsError(f"input has {u.dim} channels, SRNN expects {params.m}")
    t = np.arange(steps) * dt
    if u.t0 > 1e-12 or u.t1 < t[-1] - 1e-12:
        raise ValueError(f"input path [{u.t0}, {u.t1}] does not cover [0, {t[-1]}]")
    return _matvec(u(t), params.C)


def simulate_ensemble(params: SrnnParams, drives: np.ndarray, dt: float, K: int, seed: int,
                      record, first: int = 0) -> np.ndarray:
    """Simulate ``K`` trajectories under each drive with shared noise.

    ``drives`` has shape ``(D, steps, n)``; every drive reuses the same
    initial draw and noise for trajectory ``k`` (common random numbers).
    Returns states at the step indices ``record``: shape ``(D, K, len(record), n)``.
    """
    drives = np.asarray(drives, dtype=float)
    if drives.ndim == 2:
        drives = drives[None]
    D, steps, n = drives.shape
    record = np.atleast_1d(np.asarray(record, dtype=int))
    if record.min() < 0 or record.max() > steps:
        raise ValueError("record index outside the simulated grid")
    A = np.eye(n) - dt * params.gamma
    theta = math.sqrt(dt) * params.sigma
    r = params.r
    out = np.empty((D, K, len(record), n))
    # a step may be requested more than once
    slots = {int(s): np.flatnonzero(record == s) for s in np.unique(record)}
    chunk = max(1, min(K, _CHUNK_FLOATS // max(1, steps * max(r, n * D))))
    for c0 in range(0, K, chunk):
        idx = range(first + c0, first + min(K, c0 + chunk))
        kc = len(idx)
        h = np.empty((kc, n))
        xi = np.empty((kc, steps, r))
        for j, k in enumerate(idx):
            g = substream(seed, k)
            h[j] = params.init.sample(g, n)
            xi[j] = g.standard_normal((steps, r))
        H = np.broadcast_to(h, (D, kc, n)).copy()
        if 0 in slots:
            out[:, c0:c0 + kc, slots[0]] = H[:, :, None]
        for k in range(steps):
            pre = _matvec(H, params.W) + params.b
            H = (_matvec(H, A) + dt * (params.act(pre) + drives[:, k][:, None, :])
                 + _matvec(xi[:, k], theta))
            bad = ~np.isfinite(H) | (np.abs(H) > DIVERGENCE_BOUND)
            if bad.any():
                traj = int(np.argwhere(bad.any(axis=-1))[0][1])
                raise DivergenceError(k + 1, first + c0 + traj)
            if k + 1 in slots:
                out[:, c0:c0 + kc, slots[k + 1]] = H[:, :, None]
    return out


def euler_maruyama(params: SrnnParams, u: Path | None, T: float, dt: float, seed: int,
                   index: int = 0) -> Trajectory:
    """Single trajectory drawn from substream ``(seed, index)``."""
    steps, times = time_grid(T, dt)
    drive = input_drive(params, u, steps, dt)
    states = simulate_ensemble(params, drive, dt, 1, seed, np.arange(steps + 1), first=index)
    return Trajectory(times, states[0, 0], seed, index)


def mean_and_stderr(x: np.ndarray, axis: int = 0) -> tuple:
    x = np.asarray(x, dtype=float)
    K = x.shape[axis]
    first = np.take(x, [0], axis=axis)
    const = np.all(x == first, axis=axis)
    mean = np.where(const, np.squeeze(first, axis=axis), x.mean(axis=axis))
    se = np.where(const, 0.0, x.std(axis=axis, ddof=1) / np.sqrt(K))
    if mean.ndim == 0:
        return float(mean), float(se)
    return mean, se


def readout_samples(params: SrnnParams, u: Path | None, T: float, dt: float, K: int,
                    seed: int) -> np.ndarray:
    steps, _ = time_grid(T, dt)
    drive = input_drive(params, u, steps, dt)
    h_T = simulate_ensemble(params, drive, dt, K, seed, [steps])[0, :, 0]
    return params.readout(h_T)


def output_functional(params: SrnnParams, u: Path | None, T: float, dt: float, K: int,
                      seed: int) -> tuple[float, float]:
    """Monte-Carlo ``E f(h_T)``: sample mean and standard error over ``K`` trajectories."""
    if K < 2:
        raise ValueError("need K >= 2 samples for a standard error")
    return mean_and_stderr(readout_samples(params, u, T, dt, K, seed))


def ou_mean_analytic(gamma, C, u: Path | None, mean0, t: float, refine: int = 16) -> np.ndarray:
    """Mean of the linear SRNN at time ``t``.

    ``exp(-Gamma t) m0 + int_0^t exp(-Gamma (t - s)) C u(s) ds``, the integral by
    composite Simpson on ``u``'s knots (clipped to ``[0, t]``) refined ``refine`` times.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    mean0 = np.atleast_1d(np.asarray(mean0, dtype=float))
    out = linalg.expm(-gamma * t) @ mean0
    if u is None or t <= 0:
        return out
    if u.t1 < t - 1e-12:
        raise ValueError("input path does not reach t")
    C = np.asarray(C, dtype=float).reshape(gamma.shape[0], -1)
    knots = np.union1d([0.0, t], u.times[(u.times > 0) & (u.times < t)])
    s = refine_grid(knots, refine)
    vals = np.stack([linalg.expm(-gamma * (t - si)) @ (C @ u(si)) for si in s])
    return out + integrate.simpson(vals, x=s, axis=0)


@dataclass(frozen=True, eq=False)
class DiscreteRnn:
    """One Euler-Maruyama step written as a discrete-time noisy RNN.

    ``h' = alpha h + beta (a(W h + b) + C u) + theta xi``; ``alpha`` is a scalar
    when ``Gamma = gamma I`` and a matrix otherwise.
    """

    alpha: float | np.ndarray
    beta: float
    theta: np.ndarray
    activation: str
    W: np.ndarray
    b: np.ndarray
    C: np.ndarray

    def step(self, h: np.ndarray, u: np.ndarray, xi: np.ndarray) -> np.ndarray:
        a = ACTIVATIONS[self.activation]
        lin = self.alpha * h if np.ndim(self.alpha) == 0 else _matvec(h, self.alpha)
        return lin + self.beta * (a(_matvec(h, self.W) + self.b) + _matvec(u, self.C)) \
            + _matvec(xi, self.theta)

    def rollout(self, h0, inputs: np.ndarray, noise: np.ndarray) -> np.ndarray:
        h = np.asarray(h0, dtype=float)
        states = [h]
        for u, xi in zip(inputs, noise):
            h = self.step(h, u, xi)
            states.append(h)
        return np.array(states)


def discretize(params: SrnnParams, dt: float) -> DiscreteRnn:
    g = params.gamma
    gamma0 = g[0, 0]
    if np.array_equal(g, gamma0 * np.eye(params.n)):
        alpha = 1.0 - gamma0 * dt
    else:
        alpha = np.eye(params.n) - dt * g
    return DiscreteRnn(alpha=alpha, beta=dt, theta=math.sqrt(dt) * params.sigma,
                       activation=params.activation, W=params.W, b=params.b, C=params.C)


def trajectory_noise(params: SrnnParams, steps: int, seed: int, index: int = 0):
    """Initial state and noise that trajectory ``index`` consumes, in draw order."""
    g = substream(seed, index)
    h0 = params.init.sample(g, params.n)
    return h0, g.standard_normal((steps, params.r))

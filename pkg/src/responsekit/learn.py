"""Kernel ridge regression over signature kernels (representer form)."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .kernels import (KernelSpec, cross_from_features, features, gram_from_features,
                      prepare)
from .paths import Path, PolyBasis

FORMAT_VERSION = 1
JITTER_START = 1e-12
JITTER_STOP = 1e-6


class IllConditionedGramError(np.linalg.LinAlgError):
    def __init__(self, cond: float):
        super().__init__(f"Gram matrix could not be factorised after jitter "
                         f"escalation (condition estimate {cond:.3e})")
        self.cond = cond


class ModelFileError(ValueError):
    pass


class ModelVersionError(ModelFileError):
    pass


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Fitted predictor ``target_mean + sum_n coeffs[n] K(train_paths[n], .)``.

    ``train_paths`` are stored already lifted (and resampled) per ``spec``.
    """

    spec: KernelSpec
    train_paths: tuple
    coeffs: np.ndarray
    ridge: float
    target_mean: float
    jitter: float = 0.0

    def __post_init__(self):
        if len(self.coeffs) != len(self.train_paths):
            raise ValueError("one coefficient per training path required")

    def _features(self) -> np.ndarray:
        z = self.__dict__.get("_z")
        if z is None:
            z = features(self.train_paths, self.spec)
            object.__setattr__(self, "_z", z)
        return z

    def kernel_column(self, xs: Sequence[Path]) -> np.ndarray:
        """``K(train_n, x_j)`` for raw query paths; shape ``(N, len(xs))``."""
        zq = features([prepare(x, self.spec) for x in xs], self.spec)
        return cross_from_features(self._features(), zq, self.spec)

    def predict_many(self, xs: Sequence[Path]) -> np.ndarray:
        return self.target_mean + self.coeffs @ self.kernel_column(xs)

    def __call__(self, x: Path) -> float:
        return predict(self, x)


def default_spec(inputs: Sequence[Path]) -> KernelSpec:
    x = inputs[0]
    return KernelSpec.uniform(10, horizon=x.t1, start=x.t0, kind="piecewise_exp",
                              basis=PolyBasis("monomial", 3))


def solve_spd(G: np.ndarray, y: np.ndarray, ridge: float) -> tuple[np.ndarray, float]:
    """Solve ``(G + ridge I) c = y`` by Cholesky, escalating diagonal jitter on failure.

    Jitter runs ``1e-12 * tr/N`` up to ``1e-6 * tr/N`` by factors of ten.
    Returns ``(c, jitter_used)``.
    """
    n = len(G)
    A = G + ridge * np.eye(n)
    scale = np.trace(G) / n
    jitter = 0.0
    rel = JITTER_START
    while True:
        try:
            factor = linalg.cho_factor(A + jitter * np.eye(n), lower=True, check_finite=True)
            c = linalg.cho_solve(factor, y)
            if np.all(np.isfinite(c)):
                return c, jitter
        except linalg.LinAlgError:
            pass
        if rel > JITTER_STOP * (1 + 1e-9):
            raise IllConditionedGramError(float(np.linalg.cond(A)))
        jitter = rel * scale
        rel *= 10.0


def fit(inputs: Sequence[Path], targets: Sequence[float], spec: KernelSpec | None = None,
        ridge: float = 0.0) -> KernelModel:
    """Ridge solution ``(G + ridge I) c = y - mean(y)`` over the training inputs."""
    targets = np.asarray(targets, dtype=float).ravel()
    if len(inputs) != len(targets):
        raise ValueError(f"{len(inputs)} inputs but {len(targets)} targets")
    if len(inputs) < 1:
        raise ValueError("need at least one training example")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    spec = spec or default_spec(inputs)
    ready = tuple(prepare(x, spec) for x in inputs)
    z = features(ready, spec)
    G = gram_from_features(z, spec)
    mean = float(targets.mean())
    c, jitter = solve_spd(G, targets - mean, ridge)
    model = KernelModel(spec, ready, c, float(ridge), mean, jitter)
    object.__setattr__(model, "_z", z)
    return model


def predict(model: KernelModel, x: Path) -> float:
    return float(model.predict_many([x])[0])


def training_residual(model: KernelModel, targets: Sequence[float]) -> np.ndarray:
    G = gram_from_features(model._features(), model.spec)
    return model.target_mean + G @ model.coeffs - np.asarray(targets, dtype=float)


def rmse(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def ridge_grid(inputs: Sequence[Path], targets: Sequence[float], spec: KernelSpec,
               ridges: Sequence[float]) -> list[tuple[float, float]]:
    """Training residual norm for each ridge value (Gram built once)."""
    targets = np.asarray(targets, dtype=float)
    z = features([prepare(x, spec) for x in inputs], spec)
    G = gram_from_features(z, spec)
    y = targets - targets.mean()
    out = []
    for lam in ridges:
        c, _ = solve_spd(G, y, lam)
        out.append((float(lam), float(np.linalg.norm(G @ c - y))))
    return out


# --- persistence ------------------------------------------------------------

def model_to_dict(model: KernelModel) -> dict:
    return {
        "format": "responsekit-model",
        "version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "train_paths": [{"times": p.times.tolist(), "values": p.values.tolist()}
                        for p in model.train_paths],
        "coeffs": model.coeffs.tolist(),
        "lambda": model.ridge,
        "target_mean": model.target_mean,
        "jitter": model.jitter,
    }


def model_from_dict(d: dict) -> KernelModel:
    if not isinstance(d, dict) or d.get("format") != "responsekit-model":
        raise ModelFileError("not a responsekit model file")
    if d.get("version") != FORMAT_VERSION:
        raise ModelVersionError(f"model format version {d.get('version')} != {FORMAT_VERSION}")
    try:
        paths = tuple(Path(np.array(p["times"]), np.array(p["values"]))
                      for p in d["train_paths"])
        return KernelModel(KernelSpec.from_dict(d["spec"]), paths,
                           np.array(d["coeffs"], dtype=float), float(d["lambda"]),
                           float(d["target_mean"]), float(d.get("jitter", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc


def save_model(model: KernelModel, filename) -> None:
    filename = os.fspath(filename)
    d = os.path.dirname(os.path.abspath(filename))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(model_to_dict(model), fh)
    os.replace(tmp, filename)


def load_model(filename) -> KernelModel:
    try:
        with open(filename) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"corrupt model file {filename}: {exc}") from exc
    return model_from_dict(d)

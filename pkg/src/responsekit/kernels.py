"""Signature kernels on time-augmented paths and Gram assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .paths import Path, PolyBasis, augment_time, one_variation, resample_linear
from .signature import TruncatedSignature, fock_weights, signature

KINDS = ("piecewise_exp", "fock_truncated")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Which signature kernel to use and how raw inputs are lifted.

    ``piecewise_exp`` interpolates the lifted path on ``segment_grid`` and
    multiplies ``exp(<dx_l, dy_l>)`` over its segments. ``fock_truncated``
    pairs whole-path signatures truncated at ``level`` with factorial weights.
    The two differ in general and are never substituted for each other.
    """

    kind: str = "piecewise_exp"
    level: int = 4
    basis: PolyBasis = field(default_factory=PolyBasis)
    segment_grid: tuple = tuple(np.linspace(0.0, 1.0, 11))
    refine: int = 4
    normalize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        grid = tuple(float(t) for t in self.segment_grid)
        if len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("segment_grid needs >= 2 strictly increasing timestamps")
        object.__setattr__(self, "segment_grid", grid)
        if self.level < 0:
            raise ValueError("level must be >= 0")

    @classmethod
    def uniform(cls, segments: int = 10, horizon: float = 1.0, start: float = 0.0,
                **kw) -> "KernelSpec":
        return cls(segment_grid=tuple(np.linspace(start, horizon, segments + 1)), **kw)

    @property
    def segments(self) -> int:
        return len(self.segment_grid) - 1

    @property
    def domain(self) -> tuple[float, float]:
        return self.segment_grid[0], self.segment_grid[-1]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "level": self.level, "basis": self.basis.to_dict(),
                "segment_grid": list(self.segment_grid), "refine": self.refine,
                "normalize": self.normalize}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        d = dict(d)
        if "segment_grid" not in d and "segments" in d:
            d["segment_grid"] = tuple(np.linspace(d.pop("start", 0.0),
                                                  d.pop("horizon", 1.0),
                                                  int(d.pop("segments")) + 1))
        basis = PolyBasis.from_dict(d.pop("basis", {}))
        allowed = {"kind", "level", "segment_grid", "refine", "normalize"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown kernel spec fields: {sorted(extra)}")
        return cls(basis=basis, **d)


def prepare(x: Path, spec: KernelSpec) -> Path:
    """Lift a raw input path the way ``spec`` requires before evaluation."""
    basis = spec.basis
    if basis.domain is None:
        basis = PolyBasis(basis.kind, basis.degree, spec.domain)
    lifted = augment_time(x, basis, spec.refine)
    if spec.kind == "piecewise_exp":
        lifted = resample_linear(lifted, spec.segment_grid)
    if spec.normalize:
        var = one_variation(lifted)
        if var > 0:
            lifted = Path(lifted.times, lifted.values / var)
    return lifted


def fock_inner(a: TruncatedSignature, b: TruncatedSignature) -> float:
    """Factorial-weighted (symmetric Fock) inner product of two truncated series."""
    if a.dim != b.dim or a.level != b.level:
        raise ValueError(f"shape mismatch: (d={a.dim}, M={a.level}) vs (d={b.dim}, M={b.level})")
    w = fock_weights(a.level)
    return float(sum(w[n] * np.dot(a.levels[n], b.levels[n]) for n in range(a.level + 1)))


def _check_grid(x: Path, spec: KernelSpec | None):
    if spec is not None and (len(x.times) != len(spec.segment_grid)
                             or not np.allclose(x.times, spec.segment_grid, rtol=0, atol=1e-12)):
        raise GridMismatchError("path is not sampled on the kernel's segment grid")


def sig_kernel_pl(x: Path, y: Path, spec: KernelSpec | None = None) -> float:
    """``prod_l exp(<dx_l, dy_l>)`` for paths sampled on a shared segment grid."""
    _check_grid(x, spec)
    _check_grid(y, spec)
    if x.times.shape != y.times.shape or not np.array_equal(x.times, y.times):
        raise GridMismatchError("paths are sampled on different grids")
    if x.dim != y.dim:
        raise GridMismatchError(f"channel dims differ: {x.dim} vs {y.dim}")
    # elementwise product then a fixed-order sum keeps K(x, y) == K(y, x) exactly
    return float(np.exp(np.sum(x.increments * y.increments)))


def sig_kernel_fock(x: Path, y: Path, level: int) -> float:
    return fock_inner(signature(x, level), signature(y, level))


def features(prepared: Sequence[Path], spec: KernelSpec) -> np.ndarray:
    """Rows whose Euclidean inner products give the kernel (or its exponent).

    For ``piecewise_exp`` a row is the flattened increment sequence and the
    kernel is ``exp`` of the row inner product. For ``fock_truncated`` a row is
    the signature with level ``n`` scaled by ``sqrt(n!)``.
    """
    if spec.kind == "piecewise_exp":
        for x in prepared:
            _check_grid(x, spec)
        return np.stack([x.increments.ravel() for x in prepared])
    scale = np.sqrt(fock_weights(spec.level))
    rows = []
    for x in prepared:
        s = signature(x, spec.level)
        rows.append(np.concatenate([scale[n] * s.levels[n] for n in range(spec.level + 1)]))
    return np.stack(rows)


def _symmetric_inner(z: np.ndarray) -> np.ndarray:
    a = z @ z.T
    return np.triu(a) + np.triu(a, 1).T


def gram_from_features(z: np.ndarray, spec: KernelSpec) -> np.ndarray:
    a = _symmetric_inner(z)
    return np.exp(a) if spec.kind == "piecewise_exp" else a


def cross_from_features(za: np.ndarray, zb: np.ndarray, spec: KernelSpec) -> np.ndarray:
    a = za @ zb.T
    return np.exp(a) if spec.kind == "piecewise_exp" else a


def gram(paths: Sequence[Path], spec: KernelSpec, prepared: bool = False) -> np.ndarray:
    """Symmetric Gram matrix ``G_ij = K(path_i, path_j)``.

    Raw inputs are lifted with :func:`prepare` unless ``prepared`` is set.
    """
    if len(paths) < 1:
        raise ValueError("need at least one path")
    ready = list(paths) if prepared else [prepare(x, spec) for x in paths]
    return gram_from_features(features(ready, spec), spec)


def kernel(x: Path, y: Path, spec: KernelSpec) -> float:
    """Kernel between two raw inputs under ``spec``."""
    px, py = prepare(x, spec), prepare(y, spec)
    if spec.kind == "piecewise_exp":
        return sig_kernel_pl(px, py, spec)
    return sig_kernel_fock(px, py, spec.level)


def truncated_exp_series(inner: float, level: int) -> float:
    return float(sum(inner ** n / np.prod(np.arange(1, n + 1, dtype=float))
                     for n in range(level + 1)))


def write_gram_csv(g: np.ndarray, filename) -> None:
    np.savetxt(filename, g, delimiter=",", fmt="%.17g")

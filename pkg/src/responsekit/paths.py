"""Piecewise-linear multi-channel paths and their time augmentation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre


class PathError(ValueError):
    """Base class for path validation failures."""


class NonMonotoneTimesError(PathError):
    pass


class LengthMismatchError(PathError):
    pass


class NonFiniteValueError(PathError):
    pass


class DimensionMismatchError(PathError):
    pass


class GridRangeError(PathError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Path:
    """A sampled path, linear between consecutive samples.

    ``times`` has shape ``(N,)`` and ``values`` shape ``(N, d)``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1:
            raise PathError("times must be one-dimensional")
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise PathError("values must be a sequence of vectors")
        if len(times) != len(values):
            raise LengthMismatchError(
                f"{len(times)} timestamps but {len(values)} samples")
        if len(times) < 2:
            raise LengthMismatchError("a path needs at least two samples")
        if values.shape[1] < 1:
            raise DimensionMismatchError("channel dimension must be >= 1")
        if not np.all(np.isfinite(times)):
            raise NonFiniteValueError("non-finite timestamp")
        if np.any(np.diff(times) <= 0):
            raise NonMonotoneTimesError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError("non-finite path value")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def segments(self) -> int:
        return len(self.times) - 1

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def __call__(self, t) -> np.ndarray:
        """Linear interpolation at ``t`` (scalar or array); shape ``(..., d)``."""
        t = np.asarray(t, dtype=float)
        out = np.stack([np.interp(t, self.times, self.values[:, k])
                        for k in range(self.dim)], axis=-1)
        return out

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return (self.times.shape == other.times.shape
                and self.values.shape == other.values.shape
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None


def make_path(times: Sequence[float], values) -> Path:
    return Path(np.asarray(times, dtype=float), np.asarray(values, dtype=float))


def concat(a: Path, b: Path) -> Path:
    """Concatenate ``b`` after ``a``, shifting it so the result is continuous."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"cannot concatenate dims {a.dim} and {b.dim}")
    times = np.concatenate([a.times, b.times[1:] - b.times[0] + a.times[-1]])
    values = np.concatenate([a.values, b.values[1:] - b.values[0] + a.values[-1]])
    return Path(times, values)


def reverse(p: Path) -> Path:
    """Time reversal on the same interval."""
    return Path(p.t0 + p.t1 - p.times[::-1], p.values[::-1])


def one_variation(p: Path) -> float:
    # exact for piecewise-linear paths: the sample partition attains the supremum
    return float(np.sum(np.linalg.norm(p.increments, axis=1)))


def resample_linear(p: Path, grid: Sequence[float]) -> Path:
    grid = np.asarray(grid, dtype=float)
    slack = 1e-12 * max(1.0, abs(p.t1 - p.t0))
    if grid.size and (grid[0] < p.t0 - slack or grid[-1] > p.t1 + slack):
        raise GridRangeError(
            f"grid [{grid[0]}, {grid[-1]}] outside path span [{p.t0}, {p.t1}]")
    return Path(grid, p(np.clip(grid, p.t0, p.t1)))


def refine_grid(times: np.ndarray, factor: int) -> np.ndarray:
    """Split every interval of ``times`` into ``factor`` equal pieces."""
    if factor < 1:
        raise ValueError("refinement factor must be >= 1")
    if factor == 1:
        return np.asarray(times, dtype=float)
    times = np.asarray(times, dtype=float)
    frac = np.arange(factor) / factor
    inner = (times[:-1, None] + np.diff(times)[:, None] * frac[None, :]).ravel()
    return np.append(inner, times[-1])


@dataclass(frozen=True)
class PolyBasis:
    """Polynomial functions of time used to lift a path.

    ``monomial`` gives ``(1, t, ..., t^(p-1))`` with ``t`` mapped to [0, 1]
    first; ``legendre`` gives the first ``p`` Legendre polynomials shifted to
    the domain. ``domain=None`` means "the span of the path being lifted".
    """

    kind: str = "monomial"
    degree: int = 3
    domain: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("monomial", "legendre"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if int(self.degree) < 1:
            raise ValueError("basis degree must be >= 1")
        if self.domain is not None:
            lo, hi = map(float, self.domain)
            if not hi > lo:
                raise ValueError("basis domain must have positive length")
            object.__setattr__(self, "domain", (lo, hi))

    def __call__(self, t, domain: tuple[float, float] | None = None) -> np.ndarray:
        lo, hi = self.domain or domain or (0.0, 1.0)
        x = (np.asarray(t, dtype=float) - lo) / (hi - lo)
        if self.kind == "monomial":
            return x[..., None] ** np.arange(self.degree)
        eye = np.eye(self.degree)
        return np.stack([legendre.legval(2.0 * x - 1.0, eye[j])
                         for j in range(self.degree)], axis=-1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree,
                "domain": list(self.domain) if self.domain else None}

    @classmethod
    def from_dict(cls, d: dict) -> "PolyBasis":
        dom = d.get("domain")
        return cls(kind=d.get("kind", "monomial"), degree=int(d.get("degree", 3)),
                   domain=tuple(dom) if dom else None)


def augment_time(u: Path, basis: PolyBasis, refine: int = 4) -> Path:
    """Lift ``u`` to the ``m * p`` channel path ``u (x) psi``.

    Channel ``k * p + j`` carries ``u^k(t) psi_j(t)``. The product is sampled
    on ``u``'s grid split ``refine`` times; a degree-1 basis is already
    piecewise linear and is returned unrefined.
    """
    if basis.degree < 1:
        raise ValueError("basis degree must be >= 1")
    grid = u.times if basis.degree == 1 else refine_grid(u.times, refine)
    uv = u(grid)
    psi = basis(grid, (u.t0, u.t1))
    lifted = (uv[:, :, None] * psi[:, None, :]).reshape(len(grid), -1)
    return Path(grid, lifted)


def read_path_csv(filename) -> Path:
    with open(filename, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "t":
        raise PathError(f"{filename}: expected header 't,x1,...'")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise PathError(f"{filename}: need a time column and at least one channel")
    return Path(data[:, 0], data[:, 1:])


def write_path_csv(p: Path, filename) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k + 1}" for k in range(p.dim)])
        for t, row in zip(p.times, p.values):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])

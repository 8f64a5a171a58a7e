"""Truncated signatures in the tensor algebra over R^d.

Level ``n`` of a truncated series is stored densely as a flat array of length
``d**n``; the word ``(i1, ..., in)`` (letters 1-based) sits at offset
``sum((i_k - 1) * d**(n - k))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial
from typing import Sequence

import numpy as np

from .paths import Path

MAX_LEVEL = 12
MAX_ENTRIES = 1 << 26


class SignatureSizeError(ValueError):
    """Requested truncation would exceed the level cap or memory guard."""


class WordError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TruncatedSignature:
    dim: int
    level: int
    levels: tuple

    def __post_init__(self):
        levels = []
        for n, a in enumerate(self.levels):
            a = np.array(a, dtype=float).ravel()
            if a.size != self.dim ** n:
                raise ValueError(f"level {n} has {a.size} entries, expected {self.dim ** n}")
            a.setflags(write=False)
            levels.append(a)
        if len(levels) != self.level + 1:
            raise ValueError("number of stored levels must be level + 1")
        object.__setattr__(self, "levels", tuple(levels))

    def __getitem__(self, n: int) -> np.ndarray:
        return self.levels[n]

    def tensor(self, n: int) -> np.ndarray:
        """Level ``n`` reshaped to ``(d,) * n``."""
        return self.levels[n].reshape((self.dim,) * n)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "level": self.level,
                           "levels": [a.tolist() for a in self.levels]})

    @classmethod
    def from_json(cls, text: str) -> "TruncatedSignature":
        d = json.loads(text)
        return cls(int(d["dim"]), int(d["level"]), tuple(d["levels"]))


def _check_size(dim: int, level: int, max_level: int = MAX_LEVEL):
    if level < 0:
        raise SignatureSizeError("truncation level must be >= 0")
    if level > max_level:
        raise SignatureSizeError(f"truncation level {level} exceeds cap {max_level}")
    total = sum(dim ** n for n in range(level + 1))
    if total > MAX_ENTRIES:
        raise SignatureSizeError(
            f"signature with d={dim}, M={level} needs {total} entries (guard {MAX_ENTRIES})")


def unit(dim: int, level: int) -> TruncatedSignature:
    levels = [np.ones(1)] + [np.zeros(dim ** n) for n in range(1, level + 1)]
    return TruncatedSignature(dim, level, tuple(levels))


def tensor_exp(v, level: int) -> TruncatedSignature:
    """``exp(v)`` truncated at ``level``: level ``n`` is ``v^{(x)n} / n!``."""
    v = np.asarray(v, dtype=float).ravel()
    # only the memory guard applies here; the level cap belongs to path signatures
    _check_size(v.size, level, max_level=max(level, MAX_LEVEL))
    levels = [np.ones(1)]
    for n in range(1, level + 1):
        levels.append(np.outer(levels[-1], v).ravel() / n)
    return TruncatedSignature(v.size, level, tuple(levels))


def tensor_mul(a: TruncatedSignature, b: TruncatedSignature,
               level: int | None = None) -> TruncatedSignature:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if level is None:
        level = min(a.level, b.level)
    if level > min(a.level, b.level):
        raise ValueError("product level exceeds the operands' truncation")
    levels = []
    for n in range(level + 1):
        acc = np.zeros(a.dim ** n)
        for k in range(n + 1):
            acc += np.outer(a.levels[k], b.levels[n - k]).ravel()
        levels.append(acc)
    return TruncatedSignature(a.dim, level, tuple(levels))


def tensor_inverse(a: TruncatedSignature) -> TruncatedSignature:
    """Inverse in the truncated algebra; requires a nonzero scalar part."""
    a0 = float(a.levels[0][0])
    if a0 == 0.0:
        raise ValueError("element with zero scalar part is not invertible")
    levels = [np.array([1.0 / a0])]
    for n in range(1, a.level + 1):
        acc = np.zeros(a.dim ** n)
        for k in range(1, n + 1):
            acc += np.outer(a.levels[k], levels[n - k]).ravel()
        levels.append(-acc / a0)
    return TruncatedSignature(a.dim, a.level, tuple(levels))


def signature(p: Path, level: int, max_level: int = MAX_LEVEL) -> TruncatedSignature:
    """Signature of a piecewise-linear path, as a Chen product of segment exponentials."""
    _check_size(p.dim, level, max_level)
    s = unit(p.dim, level)
    for inc in p.increments:
        s = tensor_mul(s, tensor_exp(inc, level), level)
    return s


def _word_offset(word: Sequence[int], dim: int) -> int:
    off = 0
    for letter in word:
        if not 1 <= letter <= dim:
            raise WordError(f"letter {letter} outside alphabet 1..{dim}")
        off = off * dim + (letter - 1)
    return off


def coeff(s: TruncatedSignature, word: Sequence[int]) -> float:
    """Coefficient of ``e_{i1} (x) ... (x) e_{in}``; letters are 1-based."""
    word = tuple(int(i) for i in word)
    if len(word) > s.level:
        raise WordError(f"word of length {len(word)} exceeds truncation {s.level}")
    return float(s.levels[len(word)][_word_offset(word, s.dim)])


def words(dim: int, n: int):
    """All words of length ``n`` in storage order."""
    idx = np.indices((dim,) * n).reshape(n, -1).T + 1
    return [tuple(int(i) for i in w) for w in idx]


# --- independent quadrature oracle -----------------------------------------

def _oracle_grid(p: Path, subdiv: int) -> np.ndarray:
    return np.union1d(np.linspace(p.t0, p.t1, subdiv + 1), p.times)


def sig_oracle(p: Path, word: Sequence[int], subdiv: int) -> float:
    """Iterated integral of ``word`` by nested left-endpoint Stieltjes sums.

    The grid is ``subdiv`` uniform intervals on the path's span merged with
    its sample times; the sum runs over strictly ordered increment indices.
    """
    if subdiv < 1:
        raise ValueError("subdiv must be >= 1")
    word = tuple(int(i) for i in word)
    if not word:
        return 1.0
    for letter in word:
        if not 1 <= letter <= p.dim:
            raise WordError(f"letter {letter} outside alphabet 1..{p.dim}")
    dx = np.diff(p(_oracle_grid(p, subdiv)), axis=0)
    acc = dx[:, word[0] - 1].copy()
    for letter in word[1:]:
        before = np.concatenate([[0.0], np.cumsum(acc)[:-1]])
        acc = before * dx[:, letter - 1]
    return float(acc.sum())


def sig_oracle_converged(p: Path, word: Sequence[int], tol: float = 1e-7,
                         subdiv: int = 8, max_doublings: int = 14) -> tuple[float, int]:
    """Oracle with subdiv doubling and Richardson extrapolation.

    Stops when successive extrapolated values differ by less than ``tol``.
    Returns ``(value, final_subdiv)``.
    """
    word = tuple(word)
    if len(word) <= 1:
        return sig_oracle(p, word, subdiv), subdiv
    table: list[list[float]] = []
    prev = None
    for j in range(max_doublings + 1):
        row = [sig_oracle(p, word, subdiv * 2 ** j)]
        for m in range(1, j + 1):
            f = 2.0 ** m
            row.append((f * row[m - 1] - table[j - 1][m - 1]) / (f - 1.0))
        table.append(row)
        if prev is not None and abs(row[-1] - prev) < tol:
            return row[-1], subdiv * 2 ** j
        prev = row[-1]
    raise RuntimeError(f"oracle for word {word} did not stabilise to {tol}")


def fock_weights(level: int) -> np.ndarray:
    return np.array([factorial(n) for n in range(level + 1)], dtype=float)

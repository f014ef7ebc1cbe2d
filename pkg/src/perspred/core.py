"""Shared domain types and the vector geometry used by the learners.

Vectors are plain 1-D ``numpy`` float64 arrays. Samples keep their features
as an ``(n, d)`` matrix and labels as an ``(n,)`` int array in ``{0, 1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when an operation is called outside its mathematical domain."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} has non-finite coordinates")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Geometry
# --------------------------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(np.dot(v, v)))
    if not n > 0.0 or not math.isfinite(n):
        raise DomainError("cannot normalize a zero-norm vector")
    return v / n


def normalize(x) -> np.ndarray:
    """Unit vector in the direction of ``x``.

    A norm that underflows to zero (e.g. ``(1e-300, 0)``) is treated as the
    zero vector and rejected.
    """
    return _unit(as_vector(x))


def angle(u, v) -> float:
    """Angle in ``[0, pi]`` between two nonzero vectors.

    Uses ``2 atan2(|u - v|, |u + v|)`` on the unit vectors, which stays
    accurate near 0 and pi where ``arccos`` of the inner product does not.
    """
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise DomainError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    u, v = _unit(u), _unit(v)
    a, b = u - v, u + v
    return 2.0 * math.atan2(math.sqrt(float(np.dot(a, a))), math.sqrt(float(np.dot(b, b))))


def project_orthogonal(x, w) -> np.ndarray:
    """Component of ``x`` orthogonal to ``w``: ``x - <x, w_hat> w_hat``."""
    x = as_vector(x, "x")
    w_hat = normalize(w)
    if x.shape != w_hat.shape:
        raise DomainError(f"dimension mismatch: {x.shape[0]} vs {w_hat.shape[0]}")
    return x - np.dot(x, w_hat) * w_hat


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledSample:
    """A finite sample of ``(x, y)`` pairs with ``y`` in ``{0, 1}``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise DomainError(f"features must be a 2-D matrix, got shape {X.shape}")
        if X.shape[1] < 1:
            raise DomainError("dimension must be at least 1")
        if y.shape != (X.shape[0],):
            raise DomainError(f"labels shape {y.shape} does not match {X.shape[0]} points")
        if not np.all(np.isfinite(X)):
            raise DomainError("features contain non-finite values")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise DomainError("labels must be exactly 0 or 1")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y.astype(np.int8)))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[float], int]], dim: int | None = None):
        pairs = list(pairs)
        if not pairs:
            if dim is None:
                raise DomainError("dimension required for an empty sample")
            return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.int8))
        X = np.array([p[0] for p in pairs], dtype=np.float64)
        y = np.array([p[1] for p in pairs])
        return cls(X, y)

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def subset(self, idx) -> "LabeledSample":
        idx = np.asarray(idx)
        return LabeledSample(self.X[idx], self.y[idx])

    def with_labels(self, y) -> "LabeledSample":
        return LabeledSample(self.X, y)

    def signed_labels(self) -> np.ndarray:
        """Labels remapped from ``{0, 1}`` to ``{-1, +1}``."""
        return to_signed(self.y)


def to_signed(y) -> np.ndarray:
    return 2 * np.asarray(y, dtype=np.int64) - 1


def to_binary(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if not np.all((y == -1) | (y == 1)):
        raise DomainError("signed labels must be -1 or +1")
    return (y + 1) // 2


@dataclass(frozen=True)
class Halfspace:
    """Homogeneous halfspace ``{x : <x, normal> >= threshold}``; normal stored unit."""

    normal: np.ndarray
    threshold: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(normalize(self.normal)))
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def dim(self) -> int:
        return int(self.normal.shape[0])

    def contains(self, X) -> np.ndarray | bool:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DomainError(f"dimension mismatch: {X.shape[-1]} vs {self.dim}")
        inside = X @ self.normal >= self.threshold
        return bool(inside) if X.ndim == 1 else inside

    def __eq__(self, other) -> bool:
        if not isinstance(other, Halfspace):
            return NotImplemented
        return self.threshold == other.threshold and np.array_equal(self.normal, other.normal)

    def __hash__(self) -> int:
        return hash((self.normal.tobytes(), self.threshold))

    def to_dict(self) -> dict:
        return {"normal": [float(v) for v in self.normal], "threshold": self.threshold}

    @classmethod
    def from_dict(cls, d: dict) -> "Halfspace":
        return cls(np.asarray(d["normal"], dtype=np.float64), d.get("threshold", 0.0))


@dataclass(frozen=True)
class SparseLinearClassifier:
    """Predicts 1 iff ``sum(weight * x[index]) >= 1``.

    ``terms`` is a tuple of ``(index, weight)`` pairs with distinct indices.
    An empty classifier never reaches the threshold and predicts 0 everywhere.
    """

    terms: tuple[tuple[int, float], ...] = ()
    sparsity: int | None = None

    def __post_init__(self):
        terms = tuple((int(i), float(w)) for i, w in self.terms)
        idx = [i for i, _ in terms]
        if len(set(idx)) != len(idx):
            raise DomainError(f"duplicate coordinate indices in {idx}")
        if any(i < 0 for i in idx):
            raise DomainError("coordinate indices must be non-negative")
        if any(not np.isfinite(w) for _, w in terms):
            raise DomainError("weights must be finite")
        s = len(terms) if self.sparsity is None else int(self.sparsity)
        if len(terms) > s:
            raise DomainError(f"{len(terms)} terms exceed sparsity {s}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "sparsity", s)

    threshold = 1.0

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.terms], dtype=np.float64)

    def score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.terms and max(self.indices) >= X.shape[-1]:
            raise DomainError(f"index {max(self.indices)} out of range for dimension {X.shape[-1]}")
        if not self.terms:
            return np.zeros(X.shape[:-1])
        return X[..., list(self.indices)] @ self.weights

    def predict(self, X):
        """0/1 predictions for a single point or a matrix of points."""
        out = (self.score(X) >= self.threshold).astype(np.int8)
        return int(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {
            "terms": [[i, w] for i, w in self.terms],
            "sparsity": self.sparsity,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SparseLinearClassifier":
        return cls(tuple((int(i), float(w)) for i, w in d["terms"]), d.get("sparsity"))


@dataclass(frozen=True)
class ConstantClassifier:
    """Predicts ``label`` everywhere; used for the majority-label fallback."""

    label: int

    def predict(self, X):
        X = np.asarray(X)
        if X.ndim == 1:
            return int(self.label)
        return np.full(X.shape[0], int(self.label), dtype=np.int8)


@dataclass(frozen=True)
class WellBehavedParams:
    """Distribution constants K (boundedness), U (concentration),
    L (anti-anti-concentration) and R (roundedness)."""

    K: float
    U: float
    L: float
    R: float

    def __post_init__(self):
        for name in ("K", "U", "L"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 0 < self.R <= 1:
            raise DomainError("R must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {"K": self.K, "U": self.U, "L": self.L, "R": self.R}


# --------------------------------------------------------------------------
# Empirical estimates
# --------------------------------------------------------------------------


def empirical_conditional_error(sample: LabeledSample, c, h: Halfspace) -> float | None:
    """Fraction of the points in ``h`` that ``c`` misclassifies.

    Returns ``None`` when no sample point lies in ``h``; callers minimizing
    this quantity must treat ``None`` as worse than any defined value.
    """
    if len(sample) == 0:
        raise DomainError("sample must be nonempty")
    if sample.dim != h.dim:
        raise DomainError(f"dimension mismatch: sample {sample.dim} vs halfspace {h.dim}")
    inside = h.contains(sample.X)
    n_in = int(inside.sum())
    if n_in == 0:
        return None
    wrong = c.predict(sample.X[inside]) != sample.y[inside]
    return float(wrong.sum()) / n_in


def conditional_positive_rate(sample: LabeledSample, h: Halfspace) -> float | None:
    """Empirical ``P[y = 1 | x in h]``, or ``None`` on an empty subset."""
    err = empirical_conditional_error(sample, ConstantClassifier(1), h)
    return None if err is None else 1.0 - err

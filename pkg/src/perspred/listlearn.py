"""Robust list learning of s-sparse linear classifiers.

Every s-subset of coordinates is paired with every s-subset of examples; each
pair induces an s-by-s system ``<w, y_j x_j> = y_j - nu`` whose solution is a
candidate classifier (threshold 1). Ordered tuples only permute the rows and
columns of these systems, so unordered subsets give the same candidate set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import DomainError, LabeledSample, SparseLinearClassifier


@dataclass(frozen=True)
class ListLearnConfig:
    sparsity: int = 2
    bit_budget: int = 8
    subsample_size: int = 64
    dedup_tolerance: float = 1e-9

    def __post_init__(self):
        if int(self.sparsity) < 1:
            raise DomainError("sparsity must be >= 1")
        if int(self.bit_budget) < 1:
            raise DomainError("bit_budget must be >= 1")
        if int(self.subsample_size) < int(self.sparsity):
            raise DomainError("subsample_size must be >= sparsity")
        if self.dedup_tolerance < 0:
            raise DomainError("dedup_tolerance must be non-negative")


def margin(cfg: ListLearnConfig) -> float:
    """``2^-(b s + s log2 s)``."""
    s, b = int(cfg.sparsity), int(cfg.bit_budget)
    return 2.0 ** -(b * s + s * math.log2(s))


SINGULAR = None


def _singular_mask(M: np.ndarray) -> np.ndarray:
    # M: (..., s, s); scale-aware cutoff on |det|
    s = M.shape[-1]
    det = np.linalg.det(M)
    scale = np.abs(M).sum(axis=-1).max(axis=-1)
    return np.abs(det) < 1e-12 * np.maximum(1.0, scale**s)


def solve_tuple(examples, coords, nu: float):
    """Solve one tuple system; returns a classifier or ``None`` if singular.

    ``examples`` is a sequence of ``(x, y)`` with ``y`` in ``{-1, +1}``.
    """
    coords = [int(i) for i in coords]
    s = len(coords)
    if len(examples) != s:
        raise DomainError(f"need {s} examples for {s} coordinates, got {len(examples)}")
    ys = np.array([y for _, y in examples], dtype=np.float64)
    if not np.all(np.abs(ys) == 1):
        raise DomainError("labels must be remapped to {-1, +1}")
    X = np.array([np.asarray(x, dtype=np.float64)[coords] for x, _ in examples])
    M = ys[:, None] * X
    if _singular_mask(M[None])[0]:
        return SINGULAR
    w = np.linalg.solve(M, ys - nu)
    return SparseLinearClassifier(tuple(zip(coords, w)), s)


@dataclass
class ListResult:
    classifiers: list[SparseLinearClassifier]
    tuples_attempted: int
    solved: int
    subsample_indices: np.ndarray
    clamped: bool
    nu: float
    coord_tuples: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.classifiers)

    def __iter__(self):
        return iter(self.classifiers)

    def max_raw_size(self, d: int) -> int:
        s = len(self.coord_tuples[0]) if self.coord_tuples else 0
        m = len(self.subsample_indices)
        return math.comb(d, s) * math.comb(m, s) * math.factorial(s) ** 2


def _dedup(W: np.ndarray, tol: float) -> np.ndarray:
    """Indices of rows kept by a first-come pass: a row is dropped when an
    earlier kept row is within ``tol`` in every coordinate."""
    if len(W) == 0:
        return np.zeros(0, dtype=np.int64)
    if tol == 0:
        _, first = np.unique(W, axis=0, return_index=True)
        return np.sort(first)
    cells = np.floor(W / tol)
    s = W.shape[1]
    offsets = np.array(np.meshgrid(*([[-1, 0, 1]] * s), indexing="ij")).reshape(s, -1).T
    offsets = [tuple(o) for o in offsets]
    grid: dict[tuple, list[int]] = {}
    kept: list[int] = []
    for r in range(len(W)):
        cell = tuple(cells[r])
        row = W[r]
        dup = False
        for off in offsets:
            for k in grid.get(tuple(c + o for c, o in zip(cell, off)), ()):
                if np.max(np.abs(W[k] - row)) <= tol:
                    dup = True
                    break
            if dup:
                break
        if not dup:
            kept.append(r)
            grid.setdefault(cell, []).append(r)
    return np.asarray(kept, dtype=np.int64)


def sparse_list(sample: LabeledSample, cfg: ListLearnConfig, seed=0) -> ListResult:
    """Enumerate tuple systems over a uniform sub-sample and collect the solutions.

    Output order is lexicographic in (coordinate tuple, example tuple); the
    sub-sample is clamped to the sample size (``clamped`` flags it).
    """
    s = int(cfg.sparsity)
    d = sample.dim
    if d < s:
        raise DomainError(f"dimension {d} smaller than sparsity {s}")
    n = len(sample)
    m = int(cfg.subsample_size)
    clamped = m > n
    m = min(m, n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if m == n:
        idx = np.arange(n)
    else:
        idx = np.sort(rng.choice(n, size=m, replace=False))
    nu = margin(cfg)
    X = sample.X[idx]
    y = sample.signed_labels()[idx].astype(np.float64)
    coord_tuples = list(combinations(range(d), s))
    ex = np.array(list(combinations(range(m), s)), dtype=np.int64).reshape(-1, s)
    attempted = len(coord_tuples) * len(ex)

    weights, coords_of = [], []
    if len(ex):
        Y = y[ex]  # (E, s)
        R = Y - nu
        for ci, ct in enumerate(coord_tuples):
            M = Y[:, :, None] * X[ex][:, :, list(ct)]  # (E, s, s)
            ok = ~_singular_mask(M)
            if not ok.any():
                continue
            w = np.linalg.solve(M[ok], R[ok][..., None])[..., 0]
            good = np.all(np.isfinite(w), axis=1)
            weights.append(w[good])
            coords_of.append(np.full(int(good.sum()), ci))
    if weights:
        Wall = np.concatenate(weights)
        Call = np.concatenate(coords_of)
    else:
        Wall = np.zeros((0, s))
        Call = np.zeros(0, dtype=np.int64)
    solved = len(Wall)

    classifiers = []
    for ci, ct in enumerate(coord_tuples):
        rows = np.flatnonzero(Call == ci)
        if len(rows) == 0:
            continue
        keep = rows[_dedup(Wall[rows], cfg.dedup_tolerance)]
        for r in keep:
            classifiers.append(SparseLinearClassifier(tuple(zip(ct, Wall[r])), s))
    return ListResult(classifiers, attempted, solved, idx, clamped, nu, coord_tuples)


def classifier_matrix(classifiers, d: int) -> np.ndarray:
    """Dense ``(k, d)`` weight matrix for vectorized scoring."""
    Wd = np.zeros((len(classifiers), d))
    for r, c in enumerate(classifiers):
        for i, w in c.terms:
            Wd[r, i] = w
    return Wd


def predict_all(classifiers, X: np.ndarray) -> np.ndarray:
    """``(k, n)`` 0/1 predictions of every classifier on every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    return (classifier_matrix(classifiers, X.shape[1]) @ X.T >= 1.0).astype(np.int8)

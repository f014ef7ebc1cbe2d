"""Projected gradient descent over halfspace normals with contractive projection.

Each step moves the normal against the surrogate gradient
``y * x_perp * 1[<x, w> >= 0]`` and, if the query falls out of the new
halfspace, projects the step onto the query's orthogonal complement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, LabeledSample, as_vector


@dataclass(frozen=True)
class PgdConfig:
    iterations: int
    step: float
    query: np.ndarray

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise DomainError("iterations must be >= 1")
        if not self.step > 0:
            raise DomainError("step must be positive")
        q = as_vector(self.query, "query")
        if not np.any(q != 0):
            raise DomainError("query must be nonzero")
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "query", q)


def projected_gradient(sample: LabeledSample, w) -> np.ndarray:
    """Empirical mean of ``y * proj_{w_perp}(x) * 1[<x, w> >= 0]``."""
    w = as_vector(w, "w")
    if len(sample) == 0:
        raise DomainError("sample must be nonempty")
    if sample.dim != w.shape[0]:
        raise DomainError(f"dimension mismatch: sample {sample.dim} vs w {w.shape[0]}")
    nw = np.sqrt(np.dot(w, w))
    if not nw > 0:
        raise DomainError("w must be nonzero")
    w = w / nw
    X = sample.X
    p = X @ w
    a = sample.y.astype(np.float64) * (p >= 0)
    g = (a @ X - np.dot(a, p) * w) / len(sample)
    # re-project to wash out roundoff
    return g - np.dot(g, w) * w


def _step(w_prev: np.ndarray, g: np.ndarray, step: float, q_hat: np.ndarray) -> np.ndarray:
    u = w_prev - step * g
    if np.dot(u, q_hat) < 0:
        u = u - np.dot(u, q_hat) * q_hat
    n = np.sqrt(np.dot(u, u))
    if not n > 0:
        return w_prev
    return u / n


def run_pgd(sample: LabeledSample, cfg: PgdConfig) -> np.ndarray:
    """Run the descent and return all ``iterations + 1`` unit normals.

    The sample's labels must already mark the points to be pushed out of the
    halfspace with 1 (reference-class learning negates labels before calling).
    The result is a ``(T + 1, d)`` array whose first row is the unit query.
    """
    if sample.dim != cfg.query.shape[0]:
        raise DomainError(f"dimension mismatch: sample {sample.dim} vs query {cfg.query.shape[0]}")
    q_hat = cfg.query / np.linalg.norm(cfg.query)
    W = np.empty((cfg.iterations + 1, sample.dim))
    W[0] = q_hat
    for i in range(1, cfg.iterations + 1):
        g = projected_gradient(sample, W[i - 1])
        W[i] = _step(W[i - 1], g, cfg.step, q_hat)
    return W


def run_pgd_batch(X: np.ndarray, labels: np.ndarray, query, iterations: int, step: float, callback=None):
    """Run independent descents that share features but not labels.

    ``labels`` is a ``(k, n)`` 0/1 matrix, one labeling per run. Every run
    starts at the unit query. ``callback(i, W)`` is invoked with the ``(k, d)``
    iterate matrix for ``i = 0 .. iterations`` so callers can score iterates
    without storing them all. Returns the final ``(k, d)`` iterate matrix.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    k, n = labels.shape
    binary = labels.dtype == bool or bool(np.all((labels == 0) | (labels == 1)))
    # (n, k) layout keeps the per-step masking contiguous
    lab_t = np.ascontiguousarray(labels.T.astype(bool if binary else np.float64))
    q = as_vector(query, "query")
    q_hat = q / np.linalg.norm(q)
    W = np.tile(q_hat, (k, 1))
    if callback is not None:
        callback(0, W)
    for i in range(1, int(iterations) + 1):
        P = X @ W.T  # (n, k)
        A = (lab_t & (P >= 0)).astype(np.float64) if binary else lab_t * (P >= 0)
        G = (A.T @ X - np.einsum("nk,nk->k", A, P)[:, None] * W) / n
        G -= np.einsum("kd,kd->k", G, W)[:, None] * W
        U = W - step * G
        t = U @ q_hat
        out = t < 0
        if out.any():
            U[out] -= t[out, None] * q_hat
        norms = np.sqrt(np.einsum("kd,kd->k", U, U))
        ok = norms > 0
        W = np.where(ok[:, None], U / np.where(ok, norms, 1.0)[:, None], W)
        if callback is not None:
            callback(i, W)
    return W

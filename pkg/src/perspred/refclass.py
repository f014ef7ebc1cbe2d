"""Reference-class learning: find a halfspace through the query where y = 1 is likely.

Runs projected gradient descent on label-negated training data, then picks
the iterate with the highest empirical ``P[y = 1 | x in H(w)]`` on a separate
validation sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DomainError,
    Halfspace,
    LabeledSample,
    WellBehavedParams,
    as_vector,
    conditional_positive_rate,
)
from .pgd import PgdConfig, run_pgd, run_pgd_batch


class NoValidCandidateError(RuntimeError):
    """Every iterate's halfspace was empty on the validation sample."""


def negate_labels(sample: LabeledSample) -> LabeledSample:
    return sample.with_labels(1 - sample.y)


def _rate_scale(params: WellBehavedParams) -> float:
    return math.sqrt(2.0 * (2.0 * params.K + 1.0) / params.L)


def default_T_lambda(epsilon: float, params: WellBehavedParams) -> tuple[int, float]:
    """Iteration count and step size from the well-behaved constants.

    ``T = ceil(32 pi eps^{-5/4} / r)`` and ``lambda = r eps^{3/4} / 4`` with
    ``r = sqrt(2 (2K + 1) / L)``.
    """
    if not 0 < epsilon <= 1:
        raise DomainError("epsilon must lie in (0, 1]")
    r = _rate_scale(params)
    T = math.ceil(32.0 * math.pi * epsilon ** (-1.25) / r - 1e-9)
    lam = r * epsilon**0.75 / 4.0
    return max(1, T), lam


def refclass_error_bound(epsilon: float, params: WellBehavedParams) -> float:
    """Upper bound on ``P[y = 0 | x in H(w*)]`` for the returned halfspace:
    ``(U sqrt(2 (2K + 1) / (R^2 L)) + 1/R + 1) eps^{1/4}``."""
    r = math.sqrt(2.0 * (2.0 * params.K + 1.0) / (params.R**2 * params.L))
    return (params.U * r + 1.0 / params.R + 1.0) * epsilon**0.25


@dataclass(frozen=True)
class RefClassConfig:
    """Parameters for one reference-class run.

    ``iterations`` / ``step`` override the closed-form defaults; ``max_iterations``
    caps the default ``T`` (tiny epsilons otherwise demand millions of steps).
    ``train_size`` / ``validation_size`` default to the sample-size formulas and
    are only consulted by callers that draw samples themselves.
    """

    epsilon: float
    delta: float = 0.1
    params: WellBehavedParams = WellBehavedParams(1.0, math.sqrt(3.0), math.exp(-0.5) / math.sqrt(2 * math.pi), 0.5)
    train_size: int | None = None
    validation_size: int | None = None
    sample_multiplier: float = 1.0
    iterations: int | None = None
    step: float | None = None
    max_iterations: int | None = None

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise DomainError("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if not self.sample_multiplier > 0:
            raise DomainError("sample_multiplier must be positive")
        for name in ("train_size", "validation_size", "iterations", "max_iterations"):
            v = getattr(self, name)
            if v is not None and int(v) < 1:
                raise DomainError(f"{name} must be >= 1")
        if self.step is not None and not self.step > 0:
            raise DomainError("step must be positive")

    def schedule(self) -> tuple[int, float]:
        T, lam = default_T_lambda(self.epsilon, self.params)
        if self.max_iterations is not None:
            T = min(T, int(self.max_iterations))
        if self.iterations is not None:
            T = int(self.iterations)
        if self.step is not None:
            lam = float(self.step)
        return T, lam

    def sample_sizes(self) -> tuple[int, int]:
        """``(m1, m2)``: ``m1 = c K^2 ln(2T/delta) / eps`` and
        ``m2 = c 32 ln(4T/delta) / (R^2 sqrt(eps))`` with the multiplier ``c``."""
        T, _ = self.schedule()
        K, R = self.params.K, self.params.R
        c = self.sample_multiplier
        m1 = math.ceil(c * K**2 * math.log(2 * T / self.delta) / self.epsilon)
        m2 = math.ceil(c * 32.0 * math.log(4 * T / self.delta) / (R**2 * math.sqrt(self.epsilon)))
        if self.train_size is not None:
            m1 = int(self.train_size)
        if self.validation_size is not None:
            m2 = int(self.validation_size)
        return max(1, m1), max(1, m2)


def select_iterate(validation: LabeledSample, normals: np.ndarray) -> tuple[int, float]:
    """Index and rate of the iterate maximizing ``P[y = 1 | H(w)]`` on ``validation``.

    Empty-subset iterates are skipped; ties go to the earliest index.
    """
    best_i, best_rate = -1, -math.inf
    for i, w in enumerate(normals):
        rate = conditional_positive_rate(validation, Halfspace(w))
        if rate is not None and rate > best_rate:
            best_i, best_rate = i, rate
    if best_i < 0:
        raise NoValidCandidateError(
            "no iterate's halfspace contains a validation point; validation sample too small"
        )
    return best_i, best_rate


def learn_reference_class(
    train: LabeledSample,
    validation: LabeledSample,
    query,
    cfg: RefClassConfig,
    return_details: bool = False,
):
    """Halfspace containing ``query`` that approximately maximizes ``P[y = 1 | H]``."""
    query = as_vector(query, "query")
    if len(train) == 0 or len(validation) == 0:
        raise DomainError("train and validation samples must be nonempty")
    if train.dim != query.shape[0] or validation.dim != query.shape[0]:
        raise DomainError("train, validation and query must share a dimension")
    T, lam = cfg.schedule()
    normals = run_pgd(negate_labels(train), PgdConfig(T, lam, query))
    i, rate = select_iterate(validation, normals)
    h = Halfspace(normals[i])
    if return_details:
        return h, {"iterate": i, "validation_rate": rate, "iterates": normals, "T": T, "step": lam}
    return h


def learn_reference_classes(
    X_train: np.ndarray,
    train_labels: np.ndarray,
    X_val: np.ndarray,
    val_labels: np.ndarray,
    query,
    iterations: int,
    step: float,
):
    """Batched :func:`learn_reference_class` for many labelings of the same points.

    ``train_labels`` is ``(k, n_train)`` and ``val_labels`` is ``(k, n_val)``, 0/1,
    both un-negated. Returns ``(normals, rates, iterate_index)``; a run whose
    iterates were all empty on validation gets ``rate = nan`` and index -1.
    """
    train_labels = np.asarray(train_labels)
    val_pos = np.ascontiguousarray(np.asarray(val_labels).T != 0)  # (n_val, k)
    X_val = np.asarray(X_val, dtype=np.float64)
    k = train_labels.shape[0]
    d = X_val.shape[1]
    best_rate = np.full(k, -np.inf)
    best_idx = np.full(k, -1)
    best_W = np.zeros((k, d))

    def score(i, W):
        M = X_val @ W.T >= 0  # (n_val, k)
        cnt = np.count_nonzero(M, axis=0).astype(np.float64)
        pos = np.count_nonzero(M & val_pos, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            rate = np.where(cnt > 0, pos / np.where(cnt > 0, cnt, 1.0), -np.inf)
        better = rate > best_rate
        if better.any():
            best_rate[better] = rate[better]
            best_idx[better] = i
            best_W[better] = W[better]

    run_pgd_batch(X_train, 1 - train_labels, query, iterations, step, callback=score)
    rates = np.where(best_idx >= 0, best_rate, np.nan)
    return best_W, rates, best_idx

"""Personalized prediction: pick a sparse classifier and a query-containing halfspace.

For every candidate ``c`` from the list learner the data is relabeled by
agreement ``1[c(x) = y]``, a reference class through the query is learned for
that labeling, and the pair with the smallest conditional error on a held-out
selection sample wins.

Candidates that agree with the labels on exactly the same points of every
sample produce identical reference classes and scores, so they are solved
once per distinct agreement pattern; ties still go to the earliest candidate
in list order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DomainError,
    Halfspace,
    LabeledSample,
    SparseLinearClassifier,
    as_vector,
)
from .listlearn import ListLearnConfig, ListResult, predict_all, sparse_list
from .refclass import RefClassConfig, learn_reference_classes


class ListLearningError(RuntimeError):
    pass


class NoSupportedCandidateError(RuntimeError):
    pass


@dataclass(frozen=True)
class CandidatePair:
    classifier: SparseLinearClassifier
    halfspace: Halfspace
    empirical_error: float | None
    support_count: int

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier.to_dict(),
            "halfspace": self.halfspace.to_dict(),
            "empirical_error": self.empirical_error,
            "support_count": self.support_count,
        }


@dataclass(frozen=True)
class PredictionResult:
    label: int
    pair: CandidatePair
    candidates_evaluated: int
    list_size: int
    distinct_candidates: int = 0
    opt: float | None = None
    fallback_label: int | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "pair": self.pair.to_dict(),
            "candidates_evaluated": self.candidates_evaluated,
            "list_size": self.list_size,
            "distinct_candidates": self.distinct_candidates,
            "opt": self.opt,
            "fallback_label": self.fallback_label,
        }


def agreement_relabel(sample: LabeledSample, c) -> LabeledSample:
    """Replace each label ``y`` with ``1[c(x) = y]``."""
    if len(sample) == 0:
        return sample
    return sample.with_labels((c.predict(sample.X) == sample.y).astype(np.int8))


@dataclass(frozen=True)
class PerPredictConfig:
    """``opt`` may be a single value or a grid; with a grid every value is run
    and the selection sample arbitrates.

    The provided data is split (seeded) into a selection sample
    (``selection_size`` points, or ``selection_fraction`` of it), a
    reference-class validation sample (``validation_fraction`` of the rest)
    and the reference-class training sample.
    """

    listlearn: ListLearnConfig = ListLearnConfig()
    refclass: RefClassConfig = RefClassConfig(epsilon=0.1)
    opt: float | tuple[float, ...] = 0.05
    selection_size: int | None = None
    selection_fraction: float = 0.2
    validation_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        opts = self.opt_grid
        if not opts or any(not 0 <= o < 1 for o in opts):
            raise DomainError("opt values must lie in [0, 1)")
        if not 0 < self.selection_fraction < 1:
            raise DomainError("selection_fraction must lie in (0, 1)")
        if not 0 < self.validation_fraction < 1:
            raise DomainError("validation_fraction must lie in (0, 1)")
        if self.selection_size is not None and int(self.selection_size) < 1:
            raise DomainError("selection_size must be >= 1")

    @property
    def opt_grid(self) -> tuple[float, ...]:
        if isinstance(self.opt, (int, float)):
            return (float(self.opt),)
        return tuple(float(o) for o in self.opt)

    def list_accuracy(self) -> float:
        """Requested list accuracy ``eps^4``, floored at ``10 / subsample_size``."""
        return max(self.refclass.epsilon**4, 10.0 / self.listlearn.subsample_size)

    def refclass_epsilon(self, opt: float) -> float:
        return min(opt + self.list_accuracy(), 0.999)


@dataclass
class SplitPlan:
    train: LabeledSample  # reference-class training
    validation: LabeledSample  # reference-class validation
    selection: LabeledSample  # pair selection

    @property
    def fit(self) -> LabeledSample:
        return LabeledSample(
            np.concatenate([self.train.X, self.validation.X]),
            np.concatenate([self.train.y, self.validation.y]),
        )


def make_plan(data: LabeledSample, cfg: PerPredictConfig, selection: LabeledSample | None = None) -> SplitPlan:
    n = len(data)
    if n == 0:
        raise DomainError("training sample must be nonempty")
    perm = np.random.default_rng(cfg.seed).permutation(n)
    if selection is None:
        n_sel = int(cfg.selection_size) if cfg.selection_size is not None else math.ceil(cfg.selection_fraction * n)
        if n_sel >= n:
            raise DomainError(f"selection sample of {n_sel} leaves no training data out of {n}")
        selection = data.subset(perm[:n_sel])
        perm = perm[n_sel:]
    n_fit = len(perm)
    n_val = math.ceil(cfg.validation_fraction * n_fit)
    if n_val >= n_fit:
        raise DomainError(f"{n_fit} points are too few to carve a validation sample")
    return SplitPlan(
        train=data.subset(np.sort(perm[n_val:])),
        validation=data.subset(np.sort(perm[:n_val])),
        selection=selection,
    )


class CandidatePool:
    """A split plus a candidate list, with the query-independent work done once."""

    def __init__(self, plan: SplitPlan, candidates: ListResult | list, cfg: PerPredictConfig):
        self.plan = plan
        self.cfg = cfg
        self.list_result = candidates if isinstance(candidates, ListResult) else None
        self.classifiers = list(candidates)
        if not self.classifiers:
            raise ListLearningError("list learning produced no candidates")
        agree = []
        for s in (plan.train, plan.validation, plan.selection):
            agree.append((predict_all(self.classifiers, s.X) == s.y[None, :]).astype(np.int8))
        self.agree_train, self.agree_val, self.agree_sel = agree
        sig = np.packbits(np.concatenate(agree, axis=1).astype(bool), axis=1)
        _, first = np.unique(sig, axis=0, return_index=True)
        self.representatives = np.sort(first)

    @property
    def distinct(self) -> int:
        return len(self.representatives)

    def _run_opt(self, query: np.ndarray, opt: float):
        cfg = self.cfg
        rc = replace(
            cfg.refclass,
            epsilon=cfg.refclass_epsilon(opt),
            delta=cfg.refclass.delta / (2 * len(self.classifiers)),
        )
        T, lam = rc.schedule()
        reps = self.representatives
        W, rates, _ = learn_reference_classes(
            self.plan.train.X,
            self.agree_train[reps],
            self.plan.validation.X,
            self.agree_val[reps],
            query,
            T,
            lam,
        )
        inside = self.plan.selection.X @ W.T >= 0  # (n_sel, r)
        cnt = inside.sum(axis=0)
        wrong = ((1 - self.agree_sel[reps]).T * inside).sum(axis=0)
        err = np.full(len(reps), np.inf)
        ok = (cnt > 0) & ~np.isnan(rates)
        err[ok] = wrong[ok] / cnt[ok]
        return W, err, cnt

    def predict(self, query) -> PredictionResult:
        query = as_vector(query, "query")
        if not np.any(query != 0):
            raise DomainError("query must be nonzero")
        best = None
        for opt in self.cfg.opt_grid:
            W, err, cnt = self._run_opt(query, opt)
            j = int(np.argmin(err))  # reps are in list order, so ties go to the earliest
            if np.isfinite(err[j]) and (best is None or err[j] < best[0]):
                best = (float(err[j]), j, W[j], int(cnt[j]), opt)
        if best is None:
            raise NoSupportedCandidateError("no supported candidate: every pair is empty on the selection sample")
        err, j, w, support, opt = best
        c = self.classifiers[self.representatives[j]]
        h = Halfspace(w)
        pair = CandidatePair(c, h, err, support)
        sel = self.plan.selection
        in_h = sel.X @ h.normal >= 0
        fallback = int(sel.y[in_h].mean() >= 0.5) if in_h.any() else None
        return PredictionResult(
            label=int(c.predict(query)),
            pair=pair,
            candidates_evaluated=len(self.classifiers),
            list_size=len(self.classifiers),
            distinct_candidates=self.distinct,
            opt=opt,
            fallback_label=fallback,
        )

    def best_global(self, data: LabeledSample) -> tuple[SparseLinearClassifier, float]:
        """Candidate with the highest accuracy on ``data`` (earliest on ties)."""
        acc = (predict_all(self.classifiers, data.X) == data.y[None, :]).mean(axis=1)
        j = int(np.argmax(acc))
        return self.classifiers[j], float(acc[j])


def build_pool(
    data: LabeledSample,
    cfg: PerPredictConfig,
    selection: LabeledSample | None = None,
    candidates=None,
) -> CandidatePool:
    plan = make_plan(data, cfg, selection)
    if candidates is None:
        candidates = sparse_list(plan.fit, cfg.listlearn, seed=np.random.default_rng([cfg.seed, 1]))
    return CandidatePool(plan, candidates, cfg)


def personalized_predict(
    train: LabeledSample,
    query,
    cfg: PerPredictConfig,
    selection: LabeledSample | None = None,
    candidates=None,
) -> PredictionResult:
    """Learn a (sparse classifier, halfspace) pair for ``query`` and predict with it."""
    query = as_vector(query, "query")
    if query.shape[0] != train.dim:
        raise DomainError("query dimension does not match the sample")
    return build_pool(train, cfg, selection, candidates).predict(query)


def conditional_classify(
    train: LabeledSample,
    cfg: PerPredictConfig,
    probe_count: int,
    selection: LabeledSample | None = None,
    candidates=None,
    seed: int = 0,
    return_probes: bool = False,
):
    """Run personalized prediction at ``probe_count`` training points and keep
    the pair with the smallest selection error (earliest probe on ties)."""
    if probe_count < 1:
        raise DomainError("probe_count must be >= 1")
    pool = build_pool(train, cfg, selection, candidates)
    rng = np.random.default_rng(seed)
    probes = train.X[rng.integers(0, len(train), size=probe_count)]
    best, results = None, []
    for q in probes:
        try:
            r = pool.predict(q)
        except (NoSupportedCandidateError, DomainError):
            results.append(None)
            continue
        results.append(r)
        if best is None or r.pair.empirical_error < best.pair.empirical_error:
            best = r
    if best is None:
        raise NoSupportedCandidateError("no supported candidate at any probe")
    if return_probes:
        return best.pair, probes, results
    return best.pair

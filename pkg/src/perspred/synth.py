"""Synthetic well-behaved distributions, planted instances and exact 2-D oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DomainError,
    Halfspace,
    LabeledSample,
    SparseLinearClassifier,
    WellBehavedParams,
    as_vector,
    normalize,
)

MARGINALS = ("gaussian", "uniform_ball")
LABELINGS = ("classifier", "halfspace")


def gaussian_params(sigma: float = 1.0) -> WellBehavedParams:
    """Constants for an isotropic centered Gaussian with per-coordinate std ``sigma``.

    ``K = sigma``, ``U = max((sigma sqrt(2 pi))^{-3/2}, sqrt(3) sigma)``,
    ``L = exp(-1 / (2 sigma^2)) / (sigma sqrt(2 pi))``, ``R = 1/2``.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    s2pi = sigma * math.sqrt(2.0 * math.pi)
    U = max(s2pi**-1.5, math.sqrt(3.0) * sigma)
    L = math.exp(-0.5 / sigma**2) / s2pi
    return WellBehavedParams(K=sigma, U=U, L=L, R=0.5)


def _ball_volume(k: int, r: float) -> float:
    return math.pi ** (k / 2) * r**k / math.gamma(k / 2 + 1)


def ball_params(radius: float, dim: int) -> WellBehavedParams:
    """Exact constants for the uniform distribution on a centered ``dim``-ball.

    Needs ``radius > 1`` so the 1-D marginal density is positive on ``[-1, 1]``.
    """
    if not radius > 1:
        raise DomainError("radius must exceed 1")
    if dim < 2:
        raise DomainError("dimension must be at least 2")
    vol = _ball_volume(dim, radius)
    peak2 = _ball_volume(dim - 2, radius) / vol  # 2-D marginal density at the origin
    L = _ball_volume(dim - 1, math.sqrt(radius**2 - 1.0)) / vol
    return WellBehavedParams(K=radius, U=max(peak2, radius), L=L, R=0.5)


@dataclass(frozen=True)
class Marginal:
    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in MARGINALS:
            raise DomainError(f"unknown marginal {self.kind!r}; expected one of {MARGINALS}")
        if not self.scale > 0:
            raise DomainError("marginal scale must be positive")

    def sample(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        Z = rng.standard_normal((n, d))
        if self.kind == "gaussian":
            return self.scale * Z
        # direction uniform on the sphere, radius ~ r U^{1/d}
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        return Z * (self.scale * rng.random(n) ** (1.0 / d))[:, None]

    def params(self, d: int) -> WellBehavedParams:
        if self.kind == "gaussian":
            return gaussian_params(self.scale)
        return ball_params(self.scale, d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale}


@dataclass(frozen=True)
class SyntheticSpec:
    """A planted instance.

    ``labeling="classifier"`` labels points by ``planted_classifier``;
    ``labeling="halfspace"`` labels them ``1[x in H(v)]`` (a reference-class
    instance). Then ``noise_rate`` of the points in ``noise_region`` (inside or
    outside ``H(v)``) get flipped; ``adversarial`` placement flips the points
    nearest the labeling rule's decision boundary, ``random`` flips uniformly.
    ``min_margin`` rejects classifier-labeled points whose score is within that
    distance of the threshold.
    """

    dim: int
    planted_normal: np.ndarray
    planted_classifier: SparseLinearClassifier | None = None
    marginal: Marginal = Marginal()
    labeling: str = "classifier"
    noise_rate: float = 0.0
    noise_region: str = "inside"
    noise_placement: str = "adversarial"
    min_margin: float = 0.0
    seed: int = 0

    def __post_init__(self):
        v = as_vector(self.planted_normal, "planted_normal")
        if v.shape[0] != self.dim:
            raise DomainError("planted_normal dimension does not match dim")
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise DomainError("planted_normal must be a unit vector")
        object.__setattr__(self, "planted_normal", v)
        if self.labeling not in LABELINGS:
            raise DomainError(f"unknown labeling {self.labeling!r}")
        if self.labeling == "classifier" and self.planted_classifier is None:
            raise DomainError("classifier labeling needs a planted_classifier")
        if not 0 <= self.noise_rate < 0.5:
            raise DomainError("noise_rate must lie in [0, 0.5)")
        if self.noise_region not in ("inside", "outside"):
            raise DomainError("noise_region must be 'inside' or 'outside'")
        if self.noise_placement not in ("adversarial", "random"):
            raise DomainError("noise_placement must be 'adversarial' or 'random'")
        if self.min_margin < 0:
            raise DomainError("min_margin must be non-negative")

    @property
    def halfspace(self) -> Halfspace:
        return Halfspace(self.planted_normal)

    def clean_labels(self, X: np.ndarray) -> np.ndarray:
        if self.labeling == "classifier":
            return self.planted_classifier.predict(X)
        return (X @ self.planted_normal >= 0).astype(np.int8)

    def boundary_distance(self, X: np.ndarray) -> np.ndarray:
        if self.labeling == "classifier":
            c = self.planted_classifier
            norm = np.linalg.norm(c.weights) if c.terms else 1.0
            return np.abs(c.score(X) - c.threshold) / norm
        return np.abs(X @ self.planted_normal)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "planted_normal": [float(v) for v in self.planted_normal],
            "planted_classifier": None if self.planted_classifier is None else self.planted_classifier.to_dict(),
            "marginal": self.marginal.to_dict(),
            "labeling": self.labeling,
            "noise_rate": self.noise_rate,
            "noise_region": self.noise_region,
            "noise_placement": self.noise_placement,
            "min_margin": self.min_margin,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        pc = d.get("planted_classifier")
        d["planted_classifier"] = None if pc is None else SparseLinearClassifier.from_dict(pc)
        m = d.get("marginal", {})
        d["marginal"] = Marginal(m.get("kind", "gaussian"), float(m.get("scale", 1.0)))
        d["planted_normal"] = normalize(d["planted_normal"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown synthetic spec fields: {sorted(unknown)}")
        return cls(**d)

    def with_seed(self, seed: int) -> "SyntheticSpec":
        return replace(self, seed=int(seed))


def _draw_features(spec: SyntheticSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.min_margin == 0 or spec.labeling != "classifier":
        return spec.marginal.sample(rng, n, spec.dim)
    chunks, have = [], 0
    for _ in range(1000):
        X = spec.marginal.sample(rng, max(2 * (n - have), 64), spec.dim)
        c = spec.planted_classifier
        X = X[np.abs(c.score(X) - c.threshold) >= spec.min_margin]
        chunks.append(X)
        have += len(X)
        if have >= n:
            return np.concatenate(chunks)[:n]
    raise DomainError("min_margin rejects nearly every point")


def draw(spec: SyntheticSpec, n: int, seed: int | None = None) -> LabeledSample:
    """``n`` i.i.d. labeled points; reproducible given ``seed`` (defaults to ``spec.seed``)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    ss = np.random.SeedSequence(spec.seed if seed is None else int(seed))
    feat_ss, noise_ss = ss.spawn(2)
    X = _draw_features(spec, np.random.default_rng(feat_ss), n)
    y = spec.clean_labels(X).astype(np.int8)
    if spec.noise_rate > 0:
        inside = X @ spec.planted_normal >= 0
        region = np.flatnonzero(inside if spec.noise_region == "inside" else ~inside)
        if spec.noise_placement == "adversarial":
            k = int(round(spec.noise_rate * len(region)))
            order = np.argsort(spec.boundary_distance(X[region]), kind="stable")
            flip = region[order[:k]]
        else:
            rng = np.random.default_rng(noise_ss)
            flip = region[rng.random(len(region)) < spec.noise_rate]
        y[flip] = 1 - y[flip]
    return LabeledSample(X, y)


def wedge_probability_mc(w, v, marginal: Marginal, n: int, seed: int = 0) -> float:
    """Monte Carlo estimate of ``P[x in H(w) \\ H(v)]``."""
    w, v = normalize(w), normalize(v)
    if w.shape != v.shape:
        raise DomainError("dimension mismatch")
    if n < 1:
        raise DomainError("n must be >= 1")
    X = marginal.sample(np.random.default_rng(seed), n, w.shape[0])
    return float(np.mean((X @ w >= 0) & (X @ v < 0)))


# --------------------------------------------------------------------------
# Exact 2-D oracles
# --------------------------------------------------------------------------

_ON_BOUNDARY = 1e-12


def _candidate_angles_2d(X: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Normal angles covering every distinct query-containing halfspace.

    Breakpoints are the angles where a sample point (or the query) sits on
    the boundary; midpoints between consecutive breakpoints cover the open
    pieces where no point is on the boundary.
    """
    tq = math.atan2(query[1], query[0])
    nz = np.any(X != 0, axis=1)
    tx = np.arctan2(X[nz, 1], X[nz, 0])
    brk = np.concatenate([tx + np.pi / 2, tx - np.pi / 2, [tq + np.pi / 2, tq - np.pi / 2]])
    brk = np.sort(np.mod(brk, 2 * np.pi))
    gaps = np.diff(np.concatenate([brk, [brk[0] + 2 * np.pi]]))
    mids = brk + gaps / 2
    cand = np.concatenate([brk, mids, [tq]])
    # keep normals whose halfspace contains the query
    keep = np.cos(cand - tq) >= -_ON_BOUNDARY
    return cand[keep]


def _best_halfspace_2d(X: np.ndarray, bad: np.ndarray, query: np.ndarray):
    cand = _candidate_angles_2d(X, query)
    N = np.stack([np.cos(cand), np.sin(cand)], axis=1)
    P = X @ N.T  # (m, C)
    scale = np.linalg.norm(X, axis=1, keepdims=True)
    inside = P >= -_ON_BOUNDARY * np.maximum(scale, 1.0)
    cnt = inside.sum(axis=0)
    nbad = (inside & bad[:, None]).sum(axis=0)
    err = np.where(cnt > 0, nbad / np.maximum(cnt, 1), np.inf)
    j = int(np.argmin(err))
    if not np.isfinite(err[j]):
        raise AssertionError("no query-containing candidate covers a sample point")
    normal = N[j]
    if np.dot(normal, query) < 0:  # boundary roundoff: the query sits on the boundary
        normal = normal - np.dot(normal, query) / np.dot(query, query) * query
    return Halfspace(normal), float(err[j])


def brute_force_refclass_2d(sample: LabeledSample, query) -> tuple[Halfspace, float]:
    """Exact minimizer of empirical ``P[y = 0 | x in H(w)]`` over homogeneous
    halfspaces containing ``query``, in two dimensions.

    Points within a relative 1e-12 of a candidate boundary count as inside.
    """
    query = as_vector(query, "query")
    if sample.dim != 2 or query.shape[0] != 2:
        raise DomainError("brute-force oracle is two-dimensional only")
    if len(sample) == 0:
        raise DomainError("sample must be nonempty")
    if not np.any(query != 0):
        raise DomainError("query must be nonzero")
    return _best_halfspace_2d(sample.X, sample.y == 0, query)


def brute_force_pair_2d(sample: LabeledSample, query, classifiers):
    """Exact minimum of empirical conditional error over ``classifiers`` times
    all query-containing halfspaces (2-D). Ties go to the earliest classifier."""
    from .perpredict import CandidatePair, agreement_relabel

    classifiers = list(classifiers)
    if not classifiers:
        raise DomainError("classifier list is empty")
    best = None
    for c in classifiers:
        relabeled = agreement_relabel(sample, c)
        h, err = brute_force_refclass_2d(relabeled, query)
        if best is None or err < best[2]:
            support = int(np.sum(sample.X @ h.normal >= 0))
            best = (c, h, err, support)
    c, h, err, support = best
    return CandidatePair(c, h, err, support)

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perspred.core import (
    ConstantClassifier,
    DomainError,
    Halfspace,
    LabeledSample,
    WellBehavedParams,
    conditional_positive_rate,
    empirical_conditional_error,
)
from perspred.refclass import (
    NoValidCandidateError,
    RefClassConfig,
    default_T_lambda,
    learn_reference_class,
    learn_reference_classes,
    negate_labels,
    refclass_error_bound,
    select_iterate,
)
from perspred.synth import SyntheticSpec, brute_force_refclass_2d, draw, gaussian_params

ONE = ConstantClassifier(1)


def test_negate_labels():
    s = LabeledSample(np.array([[1.0, 0], [0, 1.0]]), [1, 0])
    np.testing.assert_array_equal(negate_labels(s).y, [0, 1])
    np.testing.assert_array_equal(negate_labels(s).X, s.X)
    np.testing.assert_array_equal(negate_labels(negate_labels(s)).y, s.y)
    empty = LabeledSample(np.zeros((0, 2)), [])
    assert len(negate_labels(empty)) == 0


def test_default_schedule_closed_forms():
    p = WellBehavedParams(K=1.0, U=1.0, L=6.0, R=0.5)
    assert default_T_lambda(1.0, p) == (101, 0.25)
    _, lam = default_T_lambda(0.0625, p)
    assert lam == pytest.approx(0.03125, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.9))
def test_schedule_scaling_law(eps):
    p = gaussian_params(1.0)
    r = math.sqrt(2 * 3 / p.L)
    T1, l1 = default_T_lambda(eps, p)
    T2, l2 = default_T_lambda(eps / 2, p)
    assert l1 / l2 == pytest.approx(2**0.75, rel=1e-12)
    raw = lambda e: 32 * math.pi * e**-1.25 / r
    assert T1 == math.ceil(raw(eps) - 1e-9) and T2 == math.ceil(raw(eps / 2) - 1e-9)
    assert raw(eps / 2) / raw(eps) == pytest.approx(2**1.25, rel=1e-12)


def test_config_validation_and_overrides():
    with pytest.raises(DomainError):
        RefClassConfig(epsilon=1.0)
    with pytest.raises(DomainError):
        RefClassConfig(epsilon=0.1, delta=0.0)
    with pytest.raises(DomainError):
        RefClassConfig(epsilon=0.1, train_size=0)
    cfg = RefClassConfig(epsilon=0.1, max_iterations=7)
    assert cfg.schedule()[0] == 7
    assert RefClassConfig(epsilon=0.1, iterations=3, step=0.5).schedule() == (3, 0.5)
    m1, m2 = RefClassConfig(epsilon=0.1).sample_sizes()
    T, _ = RefClassConfig(epsilon=0.1).schedule()
    assert m1 == math.ceil(math.log(2 * T / 0.1) / 0.1)
    assert m2 == math.ceil(32 * math.log(4 * T / 0.1) / (0.25 * math.sqrt(0.1)))
    assert RefClassConfig(epsilon=0.1, train_size=5, validation_size=6).sample_sizes() == (5, 6)


def test_error_bound_formula():
    p = gaussian_params(1.0)
    expected = (p.U * math.sqrt(2 * 3 / (0.25 * p.L)) + 2 + 1) * 0.02**0.25
    assert refclass_error_bound(0.02, p) == pytest.approx(expected, rel=1e-12)


def test_select_iterate_perfect_candidate_and_ties():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    val = LabeledSample(X, [1, 0, 1])
    normals = np.array([[0.0, -1.0], [1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    i, rate = select_iterate(val, normals)
    assert (i, rate) == (1, 1.0)  # earliest of the two perfect iterates


def test_select_iterate_skips_empty_and_raises_when_all_empty():
    val = LabeledSample(np.array([[1.0, 0.0]]), [0])
    normals = np.array([[-1.0, 0.0], [0.0, 1.0]])
    assert select_iterate(val, normals) == (1, 0.0)
    with pytest.raises(NoValidCandidateError):
        select_iterate(val, np.array([[-1.0, 0.0]]))


def test_learn_reference_class_no_valid_candidate():
    train = LabeledSample(np.array([[1.0, 0.0]]), [1])  # negated label 0: zero gradient
    val = LabeledSample(np.array([[-1.0, 0.0]]), [1])
    with pytest.raises(NoValidCandidateError):
        learn_reference_class(train, val, [1.0, 0.0], RefClassConfig(epsilon=0.5, iterations=3))


def test_learn_reference_class_errors():
    s = LabeledSample(np.ones((2, 2)), [1, 0])
    with pytest.raises(DomainError):
        learn_reference_class(s, s, [1.0, 0.0, 0.0], RefClassConfig(epsilon=0.5))
    with pytest.raises(DomainError):
        learn_reference_class(s, s, [0.0, 0.0], RefClassConfig(epsilon=0.5))


def test_selection_is_argmax_over_iterates():
    spec = SyntheticSpec(3, np.array([0.0, 0.0, 1.0]), labeling="halfspace", noise_rate=0.1, seed=4)
    train, val = draw(spec, 800, seed=1), draw(spec, 400, seed=2)
    h, info = learn_reference_class(train, val, [1.0, 0.5, 0.2], RefClassConfig(epsilon=0.2), return_details=True)
    rates = [conditional_positive_rate(val, Halfspace(w)) for w in info["iterates"]]
    best = max(r for r in rates if r is not None)
    assert info["validation_rate"] == best
    assert info["iterate"] == next(i for i, r in enumerate(rates) if r == best)
    assert np.dot(h.normal, [1.0, 0.5, 0.2]) >= -1e-10


def test_batched_matches_single():
    spec = SyntheticSpec(3, np.array([0.0, 1.0, 0.0]), labeling="halfspace", noise_rate=0.05, seed=8)
    train, val = draw(spec, 300, seed=3), draw(spec, 150, seed=4)
    rng = np.random.default_rng(0)
    flips_t = rng.random((4, len(train))) < 0.2
    flips_v = rng.random((4, len(val))) < 0.2
    Lt = np.where(flips_t, 1 - train.y, train.y)
    Lv = np.where(flips_v, 1 - val.y, val.y)
    q = np.array([0.3, 1.0, -0.2])
    cfg = RefClassConfig(epsilon=0.3)
    T, lam = cfg.schedule()
    W, rates, idx = learn_reference_classes(train.X, Lt, val.X, Lv, q, T, lam)
    for j in range(4):
        h, info = learn_reference_class(train.with_labels(Lt[j]), val.with_labels(Lv[j]), q, cfg, return_details=True)
        assert idx[j] == info["iterate"]
        assert rates[j] == pytest.approx(info["validation_rate"], abs=1e-15)
        np.testing.assert_allclose(W[j], h.normal, atol=1e-12)


def test_planted_gaussian_within_bound():
    d, eps = 5, 0.02
    v = np.zeros(d)
    v[2] = 1.0
    spec = SyntheticSpec(d, v, labeling="halfspace", noise_rate=eps, seed=21)
    cfg = RefClassConfig(epsilon=eps, params=gaussian_params(1.0), max_iterations=3000)
    train, val = draw(spec, 4000, seed=1), draw(spec, 1500, seed=2)
    q = v + 0.5 * np.eye(d)[0]
    h = learn_reference_class(train, val, q, cfg)
    fresh = draw(spec, 100_000, seed=3)
    err = empirical_conditional_error(fresh, ONE, h)
    assert err <= refclass_error_bound(eps, cfg.params)
    assert err <= 0.1


def test_zero_noise_monotone_sanity():
    d = 6
    v = np.zeros(d)
    v[0] = 1.0
    spec = SyntheticSpec(d, v, labeling="halfspace", seed=5)
    train, val = draw(spec, 5000, seed=1), draw(spec, 1000, seed=2)
    q = np.array([0.2, 1.0, 0.0, 0.3, 0.0, 0.0])
    h = learn_reference_class(train, val, q, RefClassConfig(epsilon=0.05))
    assert empirical_conditional_error(draw(spec, 50_000, seed=3), ONE, h) <= 0.05


def test_two_dimensional_oracle_gap():
    rng = np.random.default_rng(99)
    for k in range(5):
        theta = rng.uniform(0, 2 * np.pi)
        v = np.array([math.cos(theta), math.sin(theta)])
        spec = SyntheticSpec(2, v, labeling="halfspace", noise_rate=0.05, seed=k)
        train, val = draw(spec, 200, seed=10 + k), draw(spec, 200, seed=20 + k)
        q = v + rng.normal(scale=0.5, size=2)
        h = learn_reference_class(train, val, q, RefClassConfig(epsilon=0.05))
        _, opt = brute_force_refclass_2d(train, q)
        assert empirical_conditional_error(train, ONE, h) <= opt + 0.1

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from perspred.core import (
    ConstantClassifier,
    DomainError,
    Halfspace,
    LabeledSample,
    SparseLinearClassifier,
    WellBehavedParams,
    angle,
    conditional_positive_rate,
    empirical_conditional_error,
    normalize,
    project_orthogonal,
    to_binary,
    to_signed,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def nonzero_vec(d):
    return arrays(np.float64, d, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


@pytest.mark.parametrize(
    "u, v, expected",
    [((1, 0), (0, 1), math.pi / 2), ((1, 0), (1, 0), 0.0), ((1, 0), (1, 1), math.pi / 4)],
)
def test_angle_examples(u, v, expected):
    assert angle(u, v) == pytest.approx(expected, abs=1e-12)


def test_angle_errors():
    with pytest.raises(DomainError):
        angle((0, 0), (1, 0))
    with pytest.raises(DomainError):
        angle((1, 0), (1, 0, 0))


def test_angle_clamps_roundoff():
    u = np.array([1.0, 1e-9])
    assert angle(u, 3 * u) == pytest.approx(0.0, abs=1e-7)
    assert angle(u, -u) == pytest.approx(math.pi, abs=1e-7)


@pytest.mark.parametrize(
    "x, w, expected",
    [((1, 1), (1, 0), (0, 1)), ((2, 0), (1, 0), (0, 0)), ((3, 4), (0, 2), (3, 0))],
)
def test_project_orthogonal_examples(x, w, expected):
    np.testing.assert_allclose(project_orthogonal(x, w), expected, atol=1e-12)


def test_project_orthogonal_zero_w():
    with pytest.raises(DomainError):
        project_orthogonal((1, 1), (0, 0))


def test_normalize_examples():
    np.testing.assert_allclose(normalize((3, 4)), (0.6, 0.8))
    np.testing.assert_allclose(normalize((0, -2)), (0, -1))
    with pytest.raises(DomainError):
        normalize((1e-300, 0))
    with pytest.raises(DomainError):
        normalize((0, 0))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6).flatmap(lambda d: st.tuples(nonzero_vec(d), nonzero_vec(d))))
def test_angle_symmetric_and_scale_invariant(uv):
    u, v = uv
    assert angle(u, v) == pytest.approx(angle(v, u), abs=1e-12)
    assert angle(2.5 * u, 0.3 * v) == pytest.approx(angle(u, v), abs=1e-7)
    assert 0.0 <= angle(u, v) <= math.pi


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6).flatmap(lambda d: st.tuples(nonzero_vec(d), nonzero_vec(d))))
def test_pythagoras_and_orthogonality(xw):
    x, w = xw
    p = project_orthogonal(x, w)
    wh = w / np.linalg.norm(w)
    assert abs(np.dot(p, wh)) <= 1e-10 * max(1.0, np.linalg.norm(x))
    lhs = np.dot(x, x)
    rhs = np.dot(x, wh) ** 2 + np.dot(p, p)
    assert rhs == pytest.approx(lhs, rel=1e-9, abs=1e-12)


def test_labeled_sample_validation():
    with pytest.raises(DomainError):
        LabeledSample(np.zeros((2, 2)), [0, 2])
    with pytest.raises(DomainError):
        LabeledSample(np.array([[np.nan, 0.0]]), [1])
    with pytest.raises(DomainError):
        LabeledSample(np.zeros((2, 2)), [0])
    s = LabeledSample.from_pairs([((1, 2), 1), ((3, 4), 0)])
    assert s.dim == 2 and len(s) == 2
    np.testing.assert_array_equal(s.signed_labels(), [1, -1])
    with pytest.raises(ValueError):
        s.X[0, 0] = 5.0  # read-only


def test_label_remaps_roundtrip():
    y = np.array([0, 1, 1, 0])
    np.testing.assert_array_equal(to_binary(to_signed(y)), y)


def test_halfspace_unit_and_membership():
    h = Halfspace((3.0, 4.0))
    assert np.linalg.norm(h.normal) == pytest.approx(1.0, abs=1e-12)
    assert h.contains((1.0, 0.0)) and not h.contains((-1.0, 0.0))
    assert Halfspace((2.0, 0.0)).contains((0.0, 5.0))  # boundary counts
    assert Halfspace.from_dict(h.to_dict()) == h


def test_sparse_classifier_invariants():
    c = SparseLinearClassifier(((0, 0.5), (2, 1.0)), 2)
    assert c.predict(np.array([2.0, 9.0, 0.0])) == 1  # 0.5 * 2 >= 1
    assert c.predict(np.array([1.0, 9.0, 0.0])) == 0
    np.testing.assert_array_equal(c.predict(np.array([[2.0, 0, 0], [0, 0, 0.5]])), [1, 0])
    assert SparseLinearClassifier.from_dict(c.to_dict()) == c
    with pytest.raises(DomainError):
        SparseLinearClassifier(((0, 1.0), (0, 2.0)), 2)
    with pytest.raises(DomainError):
        SparseLinearClassifier(((0, 1.0), (1, 1.0), (2, 1.0)), 2)
    with pytest.raises(DomainError):
        SparseLinearClassifier(((-1, 1.0),), 1)


def test_constant_classifier_empty_terms():
    empty = SparseLinearClassifier((), 2)
    np.testing.assert_array_equal(empty.predict(np.ones((3, 2))), [0, 0, 0])
    np.testing.assert_array_equal(ConstantClassifier(1).predict(np.ones((3, 2))), [1, 1, 1])


def test_well_behaved_params_validation():
    WellBehavedParams(1, 1, 1, 1)
    for bad in [(0, 1, 1, 0.5), (1, -1, 1, 0.5), (1, 1, 0, 0.5), (1, 1, 1, 0), (1, 1, 1, 1.5)]:
        with pytest.raises(DomainError):
            WellBehavedParams(*bad)


def test_conditional_error_examples():
    X = np.array([[1.0, 0], [2, 1], [3, -1], [1, 1]])
    h = Halfspace((1.0, 0.0))
    c = ConstantClassifier(1)
    assert empirical_conditional_error(LabeledSample(X, [1, 1, 1, 1]), c, h) == 0.0
    assert empirical_conditional_error(LabeledSample(X, [1, 0, 1, 1]), c, h) == 0.25
    assert empirical_conditional_error(LabeledSample(X, [1, 1, 1, 1]), c, Halfspace((-1.0, 0.0))) is None
    assert conditional_positive_rate(LabeledSample(X, [1, 0, 0, 1]), h) == 0.5
    with pytest.raises(DomainError):
        empirical_conditional_error(LabeledSample(X, [1, 1, 1, 1]), c, Halfspace((1.0, 0.0, 0.0)))


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, (12, 3), elements=st.floats(-5, 5)),
    arrays(np.int8, 12, elements=st.integers(0, 1)),
    nonzero_vec(3),
)
def test_conditional_error_in_unit_interval(X, y, w):
    e = empirical_conditional_error(LabeledSample(X, y), SparseLinearClassifier(((0, 1.0),), 1), Halfspace(w))
    assert e is None or 0.0 <= e <= 1.0

import math

import numpy as np
import pytest
from conftest import random_masks
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitedge.core import Grid
from gaitedge.exceptions import DimensionMismatch, NonBinaryInput, NonFiniteInput, OverlappingMasks
from gaitedge.gradcheck import check_gradient
from gaitedge.morphology import preprocess
from gaitedge.synthesis import (
    BCE_EPS,
    LossWeights,
    bce_loss,
    joint_loss,
    synthesize,
    synthesize_backward,
)


def _instance(seed, shape=(12, 10)):
    rng = np.random.default_rng(seed)
    m = random_masks(1, shape, seed=seed)[0]
    edge, interior = preprocess(m)
    return rng, m, edge, interior, rng.random(shape)


def test_single_pixel():
    r = synthesize([[1]], [[0]], [[0.3]])
    assert r.composite.values[0, 0] == 0.3
    assert not r.composite.is_binary


def test_no_edge_returns_interior():
    m = random_masks(1, seed=1)[0]
    out = synthesize(np.zeros_like(m), m, np.random.default_rng(0).random(m.shape))
    assert np.array_equal(out.composite.values, m)


@pytest.mark.parametrize("seed", range(5))
def test_identity_with_mask_as_probability(seed):
    _, m, edge, interior, _ = _instance(seed)
    assert np.array_equal(synthesize(edge, interior, m).composite.values, m)


def test_errors():
    with pytest.raises(DimensionMismatch):
        synthesize(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(OverlappingMasks):
        synthesize([[1]], [[1]], [[0.5]])
    with pytest.raises(NonBinaryInput):
        synthesize([[0.5]], [[0]], [[0.5]])


def test_blocking_property():
    rng, _, edge, interior, p1 = _instance(3)
    p2 = np.where(edge.values > 0, p1, rng.random(p1.shape))
    a = synthesize(edge, interior, p1).composite
    b = synthesize(edge, interior, p2).composite
    assert a == b


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1))
def test_linearity_and_range(seed, alpha):
    rng, _, edge, interior, p1 = _instance(seed)
    p2 = rng.random(p1.shape)
    mix = synthesize(edge, interior, alpha * p1 + (1 - alpha) * p2).composite.values
    lin = alpha * synthesize(edge, interior, p1).composite.values + (1 - alpha) * synthesize(
        edge, interior, p2
    ).composite.values
    assert np.allclose(mix, lin, atol=1e-15)
    assert mix.min() >= 0 and mix.max() <= 1


def test_backward_blocked_and_identity():
    g = np.random.default_rng(0).standard_normal((4, 4))
    r0 = synthesize(np.zeros((4, 4)), np.zeros((4, 4)), np.full((4, 4), 0.5))
    assert not synthesize_backward(r0, g).any()
    r1 = synthesize(np.ones((4, 4)), np.zeros((4, 4)), np.full((4, 4), 0.5))
    assert np.array_equal(synthesize_backward(r1, g), g)
    with pytest.raises(DimensionMismatch):
        synthesize_backward(r1, np.zeros((3, 4)))


@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_finite_differences(seed):
    rng, _, edge, interior, prob = _instance(seed)
    prob = np.clip(prob, 0.01, 0.99)
    w = rng.standard_normal(prob.shape)
    analytic = synthesize_backward(synthesize(edge, interior, prob), w)
    report = check_gradient(
        lambda x: float(np.sum(w * synthesize(edge, interior, x).composite.values)), analytic, prob
    )
    assert report.max_abs_error < 1e-8


def test_bce_closed_form():
    loss, grad = bce_loss([[0.5]], [[1.0]])
    assert loss == pytest.approx(math.log(2), abs=1e-12)
    assert grad[0, 0] == pytest.approx(-2.0)


def test_bce_perfect_prediction():
    t = random_masks(1, (8, 8), seed=2)[0]
    loss, _ = bce_loss(t, t)
    assert 0 <= loss <= 1.2e-7
    assert loss == pytest.approx(-math.log1p(-BCE_EPS), rel=1e-9)


def test_bce_accepts_grids_and_checks_shape():
    loss, _ = bce_loss(Grid([[0.25]]), Grid([[0]]))
    assert loss == pytest.approx(-math.log(0.75))
    with pytest.raises(DimensionMismatch):
        bce_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_bce_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    p = rng.uniform(0.2, 0.8, (8, 8))
    t = (rng.random((8, 8)) < 0.5).astype(float)
    _, grad = bce_loss(p, t)
    report = check_gradient(lambda x: bce_loss(x, t)[0], grad, p)
    assert report.max_rel_error < 1e-6


def test_joint_loss():
    assert joint_loss(0.1, 0.5) == pytest.approx(1.5)
    assert joint_loss(0.3, 0.5, LossWeights(0.0)) == 0.5
    assert joint_loss(0.0, 0.0) == 0.0
    with pytest.raises(NonFiniteInput):
        joint_loss(float("nan"), 0.0)
    with pytest.raises(ValueError):
        LossWeights(-1.0)
    assert LossWeights().lambda_seg == 10.0

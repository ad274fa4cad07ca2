import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glntsp.gln.loss import LossConfig, hed_loss, iou_loss, total_loss
from glntsp.graph import tour_to_adjacency

CYCLE4 = tour_to_adjacency([0, 1, 2, 3]).astype(float)


def full(n, value):
    P = np.full((n, n), value)
    np.fill_diagonal(P, 0)
    return P


def test_hed_perfect_prediction():
    eps = 1e-7
    assert hed_loss(CYCLE4, CYCLE4, eps) <= -np.log(1 - eps)


def test_hed_half_probability():
    # 6 pairs, 4 positive: beta = 1/3
    beta = 1 / 3
    assert hed_loss(full(4, 0.5), CYCLE4) == pytest.approx(2 * beta * (1 - beta) * np.log(2))


def test_hed_decreases_toward_target():
    P = full(5, 0.4)
    T = tour_to_adjacency([0, 1, 2, 3, 4]).astype(float)
    base = hed_loss(P, T)
    for (i, j), toward in (((0, 1), 0.6), ((0, 2), 0.2)):
        Q = P.copy()
        Q[i, j] = Q[j, i] = toward
        assert hed_loss(Q, T) < base


def test_iou_examples():
    assert iou_loss(CYCLE4, CYCLE4) == 0.0
    assert iou_loss(full(4, 1.0) - CYCLE4, CYCLE4) == pytest.approx(1.0)
    assert iou_loss(full(4, 0.5), CYCLE4) == pytest.approx(1 - 2 / (3 + 4 - 2))
    assert iou_loss(np.zeros((4, 4)), np.zeros((4, 4))) == 0.0


def test_total_loss_weights():
    P = full(4, 0.5)
    assert total_loss(P, CYCLE4, LossConfig(1.0, 0.0)) == hed_loss(P, CYCLE4)
    assert total_loss(P, CYCLE4, LossConfig(0.0, 1.0)) == iou_loss(P, CYCLE4)
    assert total_loss(P, CYCLE4) == pytest.approx(hed_loss(P, CYCLE4) + 0.6)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(0.0, 0.0)
    with pytest.raises(ValueError):
        LossConfig(1.0, -1.0)
    with pytest.raises(ValueError):
        LossConfig(eps=0.5)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        hed_loss(np.zeros((4, 4)), np.zeros((5, 5)))


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_total_loss_non_negative(n, seed):
    rng = np.random.default_rng(seed)
    P = rng.random((n, n))
    P = np.triu(P, 1) + np.triu(P, 1).T
    T = tour_to_adjacency(rng.permutation(n)).astype(float)
    assert total_loss(P, T) >= 0

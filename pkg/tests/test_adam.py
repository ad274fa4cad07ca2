import numpy as np
import pytest

from glntsp.gln.adam import AdamState, adam_step
from glntsp.gln.model import GlnConfig, ModelError, init_params


def params():
    return init_params(GlnConfig(n=4, h=2, k=1, L=1), np.random.default_rng(0))


def test_zero_gradient_leaves_params():
    p = params()
    new, state = adam_step(p, p.zeros_like(), AdamState.zeros(p))
    assert state.t == 1
    for (_, a), (_, b) in zip(p.arrays(), new.arrays()):
        assert np.array_equal(a, b)


def test_first_step_moves_by_lr():
    p = params()
    g = p.map(lambda a: np.full_like(a, 0.37))
    new, _ = adam_step(p, g, AdamState.zeros(p), lr=1e-3)
    for (_, a), (_, b) in zip(p.arrays(), new.arrays()):
        # m_hat = g, v_hat = g^2 after bias correction
        assert np.allclose(b - a, -1e-3 * 0.37 / (0.37 + 1e-8))


def test_closed_form_two_steps():
    p = params()
    g1, g2 = 0.5, -0.2
    s = AdamState.zeros(p)
    p1, s = adam_step(p, p.map(lambda a: np.full_like(a, g1)), s, lr=0.01)
    p2, s = adam_step(p1, p.map(lambda a: np.full_like(a, g2)), s, lr=0.01)
    m = 0.1 * (0.9 * g1) + 0.1 * g2 * 1.0
    m = 0.9 * (0.1 * g1) + 0.1 * g2
    v = 0.999 * (0.001 * g1**2) + 0.001 * g2**2
    step2 = 0.01 * (m / (1 - 0.9**2)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
    assert s.t == 2
    assert np.allclose(p2.layers[0].U - p1.layers[0].U, -step2)


def test_deterministic_and_pure():
    p = params()
    g = p.map(lambda a: np.sin(np.arange(a.size)).reshape(a.shape))
    s = AdamState.zeros(p)
    a1, s1 = adam_step(p, g, s)
    a2, s2 = adam_step(p, g, s)
    assert s.t == 0
    for (_, x), (_, y) in zip(a1.arrays(), a2.arrays()):
        assert np.array_equal(x, y)


def test_shape_mismatch():
    p = params()
    other = init_params(GlnConfig(n=4, h=3, k=1, L=1), np.random.default_rng(0))
    with pytest.raises(ModelError):
        adam_step(p, other, AdamState.zeros(p))

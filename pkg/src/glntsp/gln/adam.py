"""Adam with bias correction over :class:`GlnParams` pytrees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from glntsp.gln.model import GlnParams, LayerParams, ModelError


@dataclass
class AdamState:
    m: GlnParams
    v: GlnParams
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: GlnParams, **kw) -> "AdamState":
        return cls(params.zeros_like(), params.zeros_like(), **kw)


def adam_step(params: GlnParams, grads: GlnParams, state: AdamState, lr: float = 1e-3) -> tuple[GlnParams, AdamState]:
    """One Adam update. Inputs are left untouched; new params and state are returned."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_layers, m_layers, v_layers = [], [], []
    for lp, gp, mp, vp in zip(params.layers, grads.layers, state.m.layers, state.v.layers):
        new, ms, vs = {}, {}, {}
        for name, p in lp.items():
            g = getattr(gp, name)
            if g.shape != p.shape:
                raise ModelError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
            m = b1 * getattr(mp, name) + (1.0 - b1) * g
            v = b2 * getattr(vp, name) + (1.0 - b2) * (g * g)
            new[name] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
            ms[name], vs[name] = m, v
        new_layers.append(LayerParams(**new))
        m_layers.append(LayerParams(**ms))
        v_layers.append(LayerParams(**vs))
    cfg = params.config
    new_state = AdamState(GlnParams(cfg, m_layers), GlnParams(cfg, v_layers), t, b1, b2, state.eps)
    return GlnParams(cfg, new_layers), new_state

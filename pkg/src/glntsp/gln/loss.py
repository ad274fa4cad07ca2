"""Class-balanced cross-entropy plus soft IoU on predicted edge probabilities.

Both losses read only the unordered off-diagonal pairs (the strict upper
triangle). Inputs may carry leading batch axes; the ``*_grad`` functions
return gradients with the full ``(..., n, n)`` shape, zero below the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossConfig:
    psi_hed: float = 1.0
    psi_iou: float = 1.0
    eps: float = 1e-7

    def __post_init__(self) -> None:
        if self.psi_hed < 0 or self.psi_iou < 0 or self.psi_hed + self.psi_iou <= 0:
            raise ValueError("loss weights must be non-negative with a positive sum")
        if not 0.0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")


def _pairs(P: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
    P = np.asarray(P, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if P.shape != T.shape or P.shape[-1] != P.shape[-2]:
        raise ValueError(f"shape mismatch: P {P.shape}, T {T.shape}")
    iu = np.triu_indices(P.shape[-1], 1)
    return P[..., iu[0], iu[1]], T[..., iu[0], iu[1]], iu


def _scatter(g: np.ndarray, n: int, iu: tuple) -> np.ndarray:
    out = np.zeros(g.shape[:-1] + (n, n))
    out[..., iu[0], iu[1]] = g
    return out


def hed_loss(P: np.ndarray, T: np.ndarray, eps: float = 1e-7) -> np.ndarray:
    p, t, _ = _pairs(P, T)
    beta = 1.0 - t.mean(axis=-1, keepdims=True)
    pc = np.clip(p, eps, 1.0 - eps)
    terms = -beta * t * np.log(pc) - (1.0 - beta) * (1.0 - t) * np.log(1.0 - pc)
    return terms.mean(axis=-1)


def hed_loss_grad(P: np.ndarray, T: np.ndarray, eps: float = 1e-7) -> np.ndarray:
    p, t, iu = _pairs(P, T)
    beta = 1.0 - t.mean(axis=-1, keepdims=True)
    inside = (p > eps) & (p < 1.0 - eps)
    g = np.zeros_like(p)
    np.divide(-beta * t, p, out=g, where=inside & (t > 0))
    g2 = np.zeros_like(p)
    np.divide((1.0 - beta) * (1.0 - t), 1.0 - p, out=g2, where=inside & (t < 1))
    return _scatter((g + g2) / p.shape[-1], P.shape[-1], iu)


def iou_loss(P: np.ndarray, T: np.ndarray) -> np.ndarray:
    p, t, _ = _pairs(P, T)
    inter = (p * t).sum(axis=-1)
    union = p.sum(axis=-1) + t.sum(axis=-1) - inter
    ratio = np.divide(inter, union, out=np.ones_like(inter), where=union > 0)
    return 1.0 - ratio


def iou_loss_grad(P: np.ndarray, T: np.ndarray) -> np.ndarray:
    p, t, iu = _pairs(P, T)
    inter = (p * t).sum(axis=-1, keepdims=True)
    union = p.sum(axis=-1, keepdims=True) + t.sum(axis=-1, keepdims=True) - inter
    safe = np.where(union > 0, union, 1.0)
    g = -(t * union - inter * (1.0 - t)) / safe**2
    g = np.where(union > 0, g, 0.0)
    return _scatter(g, P.shape[-1], iu)


def total_loss(P: np.ndarray, T: np.ndarray, cfg: LossConfig = LossConfig()) -> np.ndarray:
    return cfg.psi_hed * hed_loss(P, T, cfg.eps) + cfg.psi_iou * iou_loss(P, T)


def total_loss_grad(P: np.ndarray, T: np.ndarray, cfg: LossConfig = LossConfig()) -> np.ndarray:
    return cfg.psi_hed * hed_loss_grad(P, T, cfg.eps) + cfg.psi_iou * iou_loss_grad(P, T)

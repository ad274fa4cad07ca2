"""Mini-batch training with Adam and early stopping on validation loss."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from glntsp.gln.adam import AdamState, adam_step
from glntsp.gln.loss import LossConfig, total_loss
from glntsp.gln.model import GlnConfig, GlnParams, backward, forward, init_adjacency, init_params, node_features

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "val_f1", "best_val_loss")
EVAL_CHUNK = 256


class TrainError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 50
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise TrainError("lr must be positive")
        if self.batch_size < 1:
            raise TrainError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise TrainError("max_epochs must be >= 1")
        if self.patience < 1:
            raise TrainError("patience must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float
    best_val_loss: float


def stack(samples: Sequence, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates (N, n, 2) and float targets (N, n, n) of same-size samples."""
    if len(samples) == 0:
        raise TrainError("empty split")
    bad = sorted({s.n for s in samples} - {n})
    if bad:
        raise TrainError(f"model handles n={n}, dataset contains sizes {bad}")
    X = np.stack([s.instance.coords for s in samples])
    T = np.stack([s.target_adjacency for s in samples]).astype(np.float64)
    return X, T


def draw_adjacency(cfg: GlnConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    return np.stack([init_adjacency(cfg, rng) for _ in range(count)])


def fixed_adjacency(cfg: GlnConfig, count: int, seed: int) -> np.ndarray:
    """Deterministic starting adjacencies for evaluation: entry i depends only on (seed, i)."""
    return np.stack([init_adjacency(cfg, np.random.default_rng([seed, i])) for i in range(count)])


def _predict_arrays(params: GlnParams, X: np.ndarray, A0: np.ndarray) -> np.ndarray:
    out = [forward(params, X[i : i + EVAL_CHUNK], A0[i : i + EVAL_CHUNK]).P for i in range(0, len(X), EVAL_CHUNK)]
    return np.concatenate(out)


def predict(params: GlnParams, samples: Sequence, seed: int = 0) -> np.ndarray:
    X, _ = stack(samples, params.config.n)
    X = node_features(X, params.config)
    return _predict_arrays(params, X, fixed_adjacency(params.config, len(X), seed))


def _loss_and_f1(params: GlnParams, X, T, A0, loss_cfg: LossConfig) -> tuple[float, float]:
    P = _predict_arrays(params, X, A0)
    loss = float(np.mean(total_loss(P, T, loss_cfg)))
    iu = np.triu_indices(params.config.n, 1)
    pred = P[:, iu[0], iu[1]] > 0.5
    truth = T[:, iu[0], iu[1]] > 0.5
    tp = np.sum(pred & truth)
    denom = 2 * tp + np.sum(pred & ~truth) + np.sum(~pred & truth)
    return loss, float(2 * tp / denom) if tp else 0.0


def train(
    train_samples: Sequence,
    val_samples: Sequence,
    gln_cfg: GlnConfig,
    loss_cfg: LossConfig = LossConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    init: GlnParams | None = None,
) -> tuple[GlnParams, list[EpochRecord]]:
    """Train and return the best-validation parameters with the epoch history."""
    X, T = stack(train_samples, gln_cfg.n)
    Xv, Tv = stack(val_samples, gln_cfg.n)
    X, Xv = node_features(X, gln_cfg), node_features(Xv, gln_cfg)
    rng = np.random.default_rng(train_cfg.seed)
    params = init if init is not None else init_params(gln_cfg, rng)
    state = AdamState.zeros(params)
    A0v = fixed_adjacency(gln_cfg, len(Xv), train_cfg.seed)

    best, best_loss, wait = params.copy(), np.inf, 0
    history: list[EpochRecord] = []
    for epoch in range(1, train_cfg.max_epochs + 1):
        perm = rng.permutation(len(X))
        seen = 0.0
        for start in range(0, len(X), train_cfg.batch_size):
            idx = perm[start : start + train_cfg.batch_size]
            A0 = draw_adjacency(gln_cfg, len(idx), rng)
            trace = forward(params, X[idx], A0)
            seen += float(total_loss(trace.P, T[idx], loss_cfg).sum())
            grads = backward(params, trace, T[idx], loss_cfg)
            params, state = adam_step(params, grads, state, train_cfg.lr)

        val_loss, val_f1 = _loss_and_f1(params, Xv, Tv, A0v, loss_cfg)
        if val_loss < best_loss:
            best, best_loss, wait = params.copy(), val_loss, 0
        else:
            wait += 1
        rec = EpochRecord(epoch, seen / len(X), val_loss, val_f1, best_loss)
        history.append(rec)
        log.info("epoch %d train %.5f val %.5f f1 %.4f", epoch, rec.train_loss, val_loss, val_f1)
        if wait >= train_cfg.patience:
            log.info("early stop after %d epochs without improvement", wait)
            break
    return best, history


def write_history(history: Sequence[EpochRecord], path: str | os.PathLike) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.val_f1), repr(r.best_val_loss)])

"""Decode edge probabilities into tours and score them."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from glntsp.graph import Tour, canonicalize, distance_matrix, tour_length


@dataclass(frozen=True)
class EdgeClassificationMetrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        # 2tp / (2tp + fp + fn), equal to the harmonic mean of precision and recall
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if self.tp else 0.0

    def __add__(self, other: "EdgeClassificationMetrics") -> "EdgeClassificationMetrics":
        return EdgeClassificationMetrics(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class TourMetrics:
    mean_tour_len: float
    opt_gap: float
    m: int


def binarize(P: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    P = np.asarray(P)
    a = (P > threshold).astype(np.uint8)
    a = np.triu(a, 1)
    return a | a.T


def greedy_decode(P: np.ndarray, D: np.ndarray, threshold: float = 0.5) -> Tour:
    """Walk from node 0 to the nearest unvisited node reachable by a predicted edge.

    When no predicted edge leads to an unvisited node, the walk falls back to
    the nearest unvisited node overall, so the result is always a valid tour.
    """
    P = np.asarray(P)
    D = np.asarray(D)
    n = D.shape[0]
    if P.shape != (n, n):
        raise ValueError(f"probabilities {P.shape} and distances {D.shape} disagree")
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    order = [0]
    cur = 0
    for _ in range(n - 1):
        dist = np.where(visited, np.inf, D[cur])
        linked = np.where(P[cur] > threshold, dist, np.inf)
        cur = int(np.argmin(linked)) if np.isfinite(linked).any() else int(np.argmin(dist))
        visited[cur] = True
        order.append(cur)
    return canonicalize(order)


def edge_metrics(pred: np.ndarray, truth: np.ndarray) -> EdgeClassificationMetrics:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"size mismatch: {pred.shape} vs {truth.shape}")
    iu = np.triu_indices(pred.shape[-1], 1)
    p = pred[..., iu[0], iu[1]].astype(bool)
    t = truth[..., iu[0], iu[1]].astype(bool)
    return EdgeClassificationMetrics(
        tp=int(np.sum(p & t)), fp=int(np.sum(p & ~t)), fn=int(np.sum(~p & t)), tn=int(np.sum(~p & ~t))
    )


def mean_tour_len(lengths: Sequence[float]) -> float:
    if len(lengths) == 0:
        raise ValueError("no tour lengths given")
    return float(np.mean(lengths))


def opt_gap(pred_lengths: Sequence[float], ref_lengths: Sequence[float]) -> float:
    """Mean of pred/ref - 1 over instances, as a ratio."""
    pred = np.asarray(pred_lengths, dtype=np.float64)
    ref = np.asarray(ref_lengths, dtype=np.float64)
    if pred.shape != ref.shape or pred.ndim != 1 or len(pred) == 0:
        raise ValueError("need equal-length, nonempty lists of lengths")
    if np.any(ref <= 0):
        raise ValueError("reference lengths must be positive")
    return float(np.mean(pred / ref - 1.0))


@dataclass
class InstanceResult:
    idx: int
    pred_len: float
    ref_len: float
    gap: float
    f1: float


@dataclass
class EvalReport:
    n: int
    m: int
    f1: float
    precision: float
    recall: float
    macro_f1: float
    mean_tour_len: float
    opt_gap: float
    threshold: float
    instances: list[InstanceResult] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("instances")
        return d

    def write(self, out_dir: str | os.PathLike) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")
        with open(out / "eval_instances.csv", "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["idx", "pred_len", "ref_len", "gap", "f1"])
            for r in self.instances:
                w.writerow([r.idx, repr(r.pred_len), repr(r.ref_len), repr(r.gap), repr(r.f1)])


def evaluate_predictions(
    probs: Sequence[np.ndarray], samples: Sequence, threshold: float = 0.5
) -> EvalReport:
    """Score precomputed edge probabilities against labelled samples."""
    if len(samples) == 0:
        raise ValueError("empty test set")
    pooled = EdgeClassificationMetrics(0, 0, 0, 0)
    rows = []
    for i, (P, s) in enumerate(zip(probs, samples)):
        em = edge_metrics(binarize(P, threshold), s.target_adjacency)
        pooled = pooled + em
        D = distance_matrix(s.instance)
        length = tour_length(greedy_decode(P, D, threshold), D)
        rows.append(InstanceResult(i, length, s.ref_length, length / s.ref_length - 1.0, em.f1))
    pred = [r.pred_len for r in rows]
    return EvalReport(
        n=samples[0].n,
        m=len(rows),
        f1=pooled.f1,
        precision=pooled.precision,
        recall=pooled.recall,
        macro_f1=float(np.mean([r.f1 for r in rows])),
        mean_tour_len=mean_tour_len(pred),
        opt_gap=opt_gap(pred, [r.ref_len for r in rows]),
        threshold=threshold,
        instances=rows,
    )


def evaluate(params, samples: Sequence, threshold: float = 0.5, seed: int = 0) -> EvalReport:
    """Run the model on every sample, then binarize/decode and score."""
    from glntsp.gln.train import predict

    return evaluate_predictions(predict(params, samples, seed=seed), samples, threshold)

"""Point-adjusted precision / recall / F1 with an oracle threshold."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvaluationResult:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    best_f1: float
    best_threshold: float
    best_precision: float
    best_recall: float
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "precision": self.best_precision,
            "recall": self.best_recall,
            "f1": self.best_f1,
            "best_threshold": self.best_threshold,
            "runtime": self.runtime,
            **self.extra,
        }


def window_to_point_scores(scores, window_starts, window_length: int, n_points: int) -> np.ndarray:
    """Each point takes the max score of the windows covering it (-inf if none)."""
    out = np.full(n_points, -np.inf)
    scores = np.asarray(scores, dtype=float)
    starts = np.asarray(window_starts, dtype=np.int64)
    for offset in range(window_length):
        idx = starts + offset
        ok = idx < n_points
        np.maximum.at(out, idx[ok], scores[ok])
    return out


def segments(labels) -> list[tuple[int, int]]:
    """Half-open ``(start, end)`` runs of ones."""
    lab = np.asarray(labels).astype(bool).astype(np.int8)
    d = np.diff(np.r_[0, lab, 0])
    return list(zip(np.flatnonzero(d == 1).tolist(), np.flatnonzero(d == -1).tolist()))


def point_adjust(predicted, labels) -> np.ndarray:
    pred = np.asarray(predicted, dtype=bool).copy()
    for a, b in segments(labels):
        if pred[a:b].any():
            pred[a:b] = True
    return pred


def prf(predicted, labels) -> tuple[float, float, float]:
    pred = np.asarray(predicted, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    tp = np.count_nonzero(pred & lab)
    fp = np.count_nonzero(pred & ~lab)
    fn = np.count_nonzero(~pred & lab)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def evaluate_point_adjust(point_scores, labels) -> EvaluationResult:
    """Sweep every distinct score as threshold (flag ``score >= threshold``)."""
    t0 = time.perf_counter()
    scores = np.asarray(point_scores, dtype=float)
    lab = np.asarray(labels).astype(bool)
    if scores.shape != lab.shape:
        raise ValueError("scores and labels must have the same length")
    if not lab.any():
        raise ValueError("no anomalies labelled")
    segs = segments(lab)
    seg_max = np.array([scores[a:b].max() for a, b in segs])
    seg_len = np.array([b - a for a, b in segs])
    normal = np.sort(scores[~lab])
    order = np.argsort(seg_max)
    seg_max_sorted, seg_len_sorted = seg_max[order], seg_len[order]
    seg_cum = np.r_[np.cumsum(seg_len_sorted[::-1])[::-1], 0]

    thresholds = np.unique(scores[np.isfinite(scores)])
    # Counts of items >= threshold via sorted arrays.
    fp = normal.size - np.searchsorted(normal, thresholds, side="left")
    tp = seg_cum[np.searchsorted(seg_max_sorted, thresholds, side="left")]
    total = int(lab.sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = tp / total
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    best = int(np.argmax(f1)) if f1.size else 0
    return EvaluationResult(
        thresholds=thresholds,
        precision=precision,
        recall=recall,
        f1=f1,
        best_f1=float(f1[best]) if f1.size else 0.0,
        best_threshold=float(thresholds[best]) if f1.size else float("nan"),
        best_precision=float(precision[best]) if f1.size else 0.0,
        best_recall=float(recall[best]) if f1.size else 0.0,
        runtime=time.perf_counter() - t0,
    )


def evaluate_windows(scores, window_starts, window_length: int, labels) -> EvaluationResult:
    """Map window scores to points, then evaluate with point adjustment."""
    lab = np.asarray(labels)
    pts = window_to_point_scores(scores, window_starts, window_length, lab.size)
    return evaluate_point_adjust(pts, lab)

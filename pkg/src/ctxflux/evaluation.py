"""Tolerance matching, PR curves and F-measure for thin structures."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dt import euclidean_dt
from .raster import GridDims, as_binary, check_same_dims

DEFAULT_RHO = 0.0075
DEFAULT_NUM_THRESHOLDS = 99


def f_measure(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def tolerance_pixels(dims: GridDims, rho: float = DEFAULT_RHO) -> float:
    """Match distance ``rho * diagonal`` in pixels."""
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    return rho * dims.diagonal


class MatchCounts(NamedTuple):
    tp: int
    fp: int
    fn: int
    recalled: int
    n_gt: int

    @property
    def precision(self) -> float:
        # no predictions means no false positives
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return self.recalled / self.n_gt

    @property
    def f(self) -> float:
        return f_measure(self.precision, self.recall)


def _check_gt(gt) -> np.ndarray:
    gt = as_binary(gt)
    if not gt.any():
        raise ValueError("empty ground truth")
    return gt


def _match(pred: np.ndarray, gt: np.ndarray, gt_dist: np.ndarray, d: float) -> MatchCounts:
    tp = int(np.count_nonzero(pred & (gt_dist <= d)))
    n_pred = int(np.count_nonzero(pred))
    n_gt = int(np.count_nonzero(gt))
    recalled = 0
    if n_pred:
        recalled = int(np.count_nonzero(gt & (euclidean_dt(pred) <= d)))
    return MatchCounts(tp, n_pred - tp, n_gt - recalled, recalled, n_gt)


def match_with_tolerance(pred, gt, rho: float = DEFAULT_RHO) -> MatchCounts:
    """Count matches between ``pred`` and ``gt`` within ``rho * diagonal`` pixels.

    A predicted pixel is a true positive if some ground-truth pixel lies within
    the tolerance; a ground-truth pixel is recalled if some predicted pixel
    does. Matching is many-to-one, not a bipartite assignment.
    """
    pred = as_binary(pred)
    gt = _check_gt(gt)
    dims = check_same_dims(pred, gt)
    d = tolerance_pixels(dims, rho)
    return _match(pred, gt, euclidean_dt(gt), d)


@dataclass
class EvalReport:
    pr_points: list[tuple[float, float, float]]  # (threshold, precision, recall)
    best_threshold: float
    precision: float
    recall: float
    f: float
    counts: MatchCounts
    tolerance: float = field(default=float("nan"))

    def to_dict(self) -> dict:
        return {
            "pr": [{"t": t, "p": p, "r": r} for t, p, r in self.pr_points],
            "best": {"t": self.best_threshold, "p": self.precision, "r": self.recall, "f": self.f},
            "counts": {
                "true_positives": self.counts.tp,
                "false_positives": self.counts.fp,
                "false_negatives": self.counts.fn,
            },
            "tolerance_px": self.tolerance,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["threshold", "precision", "recall"])
        writer.writerows(self.pr_points)
        return buf.getvalue()


def default_thresholds(num_thresholds: int = DEFAULT_NUM_THRESHOLDS) -> np.ndarray:
    """``num_thresholds`` evenly spaced values strictly inside (0, 1)."""
    if num_thresholds < 1:
        raise ValueError("num_thresholds must be >= 1")
    return np.arange(1, num_thresholds + 1) / (num_thresholds + 1)


def binary_report(pred, gt, rho: float = DEFAULT_RHO) -> EvalReport:
    """Single-point report for a binary prediction without confidences."""
    pred = as_binary(pred)
    gt = _check_gt(gt)
    dims = check_same_dims(pred, gt)
    c = match_with_tolerance(pred, gt, rho)
    return EvalReport([(1.0, c.precision, c.recall)], 1.0, c.precision, c.recall, c.f, c,
                      tolerance_pixels(dims, rho))


def pr_curve(confidence, gt, rho: float = DEFAULT_RHO,
             num_thresholds: int = DEFAULT_NUM_THRESHOLDS) -> EvalReport:
    """Sweep thresholds over ``confidence >= t`` and keep the best F-measure.

    Ties in F go to the higher recall.
    """
    confidence = np.asarray(confidence, dtype=np.float64)
    gt = _check_gt(gt)
    dims = check_same_dims(confidence, gt)
    if np.any(confidence < 0) or not np.all(np.isfinite(confidence)):
        raise ValueError("confidence must be finite and non-negative")
    d = tolerance_pixels(dims, rho)
    gt_dist = euclidean_dt(gt)

    points = []
    best = None
    cache: dict[bytes, MatchCounts] = {}
    for t in default_thresholds(num_thresholds):
        pred = confidence >= t
        key = np.packbits(pred).tobytes()
        if key not in cache:
            cache[key] = _match(pred, gt, gt_dist, d)
        c = cache[key]
        t = float(t)
        points.append((t, c.precision, c.recall))
        if best is None or (c.f, c.recall) > (best[1].f, best[1].recall):
            best = (t, c)
    t, c = best
    return EvalReport(points, t, c.precision, c.recall, c.f, c, d)

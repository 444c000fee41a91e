"""Point-set matching and classification metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class UndefinedMED(ValueError):
    pass


class WrongClassCount(ValueError):
    pass


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    tp: int
    fp: int
    fn: int
    theta: float


def _as_points(pts) -> np.ndarray:
    a = np.asarray(pts, dtype=float)
    return a.reshape(-1, 2)


def match_points(gt, pred, theta: float) -> MatchResult:
    """Greedy one-to-one matching by ascending distance, pairs with ``d <= theta``.

    Distance ties go to the lower gt index, then the lower pred index.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    g, p = _as_points(gt), _as_points(pred)
    pairs: list[tuple[int, int, float]] = []
    if len(g) and len(p):
        d = np.hypot(g[:, None, 0] - p[None, :, 0], g[:, None, 1] - p[None, :, 1])
        gi, pi = np.nonzero(d <= theta)
        order = sorted(zip(d[gi, pi], gi, pi))
        used_g, used_p = set(), set()
        for dist, i, j in order:
            if i in used_g or j in used_p:
                continue
            used_g.add(i)
            used_p.add(j)
            pairs.append((int(i), int(j), float(dist)))
    tp = len(pairs)
    return MatchResult(pairs, tp, len(p) - tp, len(g) - tp, theta)


def med(gt, pred) -> float:
    """Mean over ground-truth points of the distance to the nearest prediction."""
    g, p = _as_points(gt), _as_points(pred)
    if not len(g) or not len(p):
        raise UndefinedMED(f"MED undefined for {len(g)} gt and {len(p)} predicted points")
    d = np.hypot(g[:, None, 0] - p[None, :, 0], g[:, None, 1] - p[None, :, 1])
    return float(d.min(axis=1).mean())


def _ratio(a: float, b: float) -> float:
    return a / b if b else 0.0


def prf1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return precision, recall, _ratio(2 * precision * recall, precision + recall)


def _square(cm) -> np.ndarray:
    c = np.asarray(cm, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("confusion matrix must be square")
    if (c < 0).any():
        raise ValueError("confusion matrix entries must be non-negative")
    return c


def mcc(cm) -> float:
    """Multi-class Matthews correlation coefficient (Gorodkin's R_K).

    Rows are true classes, columns predictions. Returns 0 when either
    denominator factor vanishes.
    """
    c = _square(cm)
    n = c.sum()
    rows = c.sum(axis=1)
    cols = c.sum(axis=0)
    cov = n * np.trace(c) - rows @ cols
    var_true = n * n - rows @ rows
    var_pred = n * n - cols @ cols
    if var_true <= 0 or var_pred <= 0:
        return 0.0
    return float(cov / math.sqrt(var_true * var_pred))


def cba(cm) -> float:
    """Class balance accuracy; classes with empty row and column score 0."""
    c = _square(cm)
    rows = c.sum(axis=1)
    cols = c.sum(axis=0)
    denom = np.maximum(rows, cols)
    per = np.divide(np.diag(c), denom, out=np.zeros_like(denom), where=denom > 0)
    return float(per.mean())


def sds(cm) -> float:
    """Accuracy that forgives confusions between classes 2 and 3 (0-based 1 and 2).

    Class order: circular, elongated, other.
    """
    c = _square(cm)
    if c.shape != (3, 3):
        raise WrongClassCount(f"SDS needs 3 classes, got {c.shape[0]}")
    total = c.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    return float((np.trace(c) + c[1, 2] + c[2, 1]) / total)


@dataclass
class SweepRow:
    theta: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass
class SweepTable:
    rows: list[SweepRow]
    med_mean: float
    med_std: float
    med_count: int
    undefined_med: list[int] = field(default_factory=list)

    def by_theta(self, theta: float) -> SweepRow:
        for r in self.rows:
            if r.theta == theta:
                return r
        raise KeyError(theta)


def per_image_med(gt_by_id: Mapping[int, Sequence], pred_by_id: Mapping[int, Sequence]) -> tuple[dict[int, float], list[int]]:
    values, undefined = {}, []
    for i in sorted(gt_by_id):
        try:
            values[i] = med(gt_by_id[i], pred_by_id[i])
        except UndefinedMED:
            undefined.append(i)
    return values, undefined


def theta_sweep(
    gt_by_id: Mapping[int, Sequence],
    pred_by_id: Mapping[int, Sequence],
    thetas: Sequence[float] = range(1, 21),
) -> SweepTable:
    """Micro-averaged precision/recall/F1 per threshold plus per-image MED statistics.

    MED does not depend on the threshold. Images where MED is undefined (no
    predictions or no ground truth) are listed and left out of its mean.
    """
    missing = sorted(set(gt_by_id) - set(pred_by_id))
    if missing:
        raise KeyError(f"no detections for image ids {missing}")
    rows = []
    for theta in thetas:
        tp = fp = fn = 0
        for i in sorted(gt_by_id):
            m = match_points(gt_by_id[i], pred_by_id[i], theta)
            tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn
        rows.append(SweepRow(theta, tp, fp, fn, *prf1(tp, fp, fn)))
    meds, undefined = per_image_med(gt_by_id, pred_by_id)
    vals = np.array(list(meds.values()))
    mean = float(vals.mean()) if vals.size else math.nan
    std = float(vals.std()) if vals.size else math.nan
    return SweepTable(rows, mean, std, int(vals.size), undefined)


def sweep_csv(table: SweepTable) -> str:
    lines = ["theta,precision,recall,f1"]
    for r in table.rows:
        theta = int(r.theta) if float(r.theta).is_integer() else r.theta
        lines.append(f"{theta},{r.precision:.6f},{r.recall:.6f},{r.f1:.6f}")
    lines.append(f"med,{table.med_mean:.6f},std,{table.med_std:.6f}")
    return "\n".join(lines) + "\n"

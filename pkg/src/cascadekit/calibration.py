"""Per-model decision-threshold calibration.

For a model's scores on the configuration split, a threshold pair
(p_low, p_high) decides an image negative when score <= p_low, positive
when score >= p_high and not already decided negative, and leaves it
uncertain otherwise.  Calibration grid-searches all pairs from a uniform
step grid and keeps the pair that maximizes decided coverage subject to
both decided sides meeting a target precision.

Ties are broken conservatively: more positive-side decisions, then the
larger p_high, then the smaller p_low, so the chosen pair hugs the score
distribution as tightly as the data supports.  If nothing can be decided
at the target precision the sentinel pair (0.0, 1.0) is returned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ArtifactIOError, ValidationError
from .models import ScoreMatrix


@dataclass(frozen=True)
class ThresholdPair:
    p_low: float
    p_high: float
    target_precision: float

    def __post_init__(self):
        if not 0.0 <= self.p_low <= self.p_high <= 1.0:
            raise ValidationError(
                f"need 0 <= p_low <= p_high <= 1, got ({self.p_low}, {self.p_high})"
            )
        if not 0.5 < self.target_precision <= 1.0:
            raise ValidationError(
                f"target precision must lie in (0.5, 1], got {self.target_precision}"
            )


@dataclass(frozen=True)
class ConfigStats:
    coverage: float
    pos_precision: float
    neg_precision: float


@dataclass(frozen=True)
class CalibratedModel:
    model_id: str
    threshold: ThresholdPair
    config_stats: ConfigStats


def threshold_grid(step: float) -> np.ndarray:
    """Candidate threshold values: multiples of step in [0, 1], plus 1.0."""
    if not 0.0 < step <= 1.0:
        raise ValidationError("step must lie in (0, 1]")
    count = int(np.floor(1.0 / step + 1e-9)) + 1
    grid = np.round(np.arange(count, dtype=np.float64) * step, 10)
    if grid[-1] != 1.0:
        grid = np.append(grid, 1.0)
    return grid


def _validate_scores_labels(scores: np.ndarray, labels: np.ndarray) -> None:
    if scores.size == 0:
        raise ValidationError("need at least one score")
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be 1-D arrays of equal length")
    if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
        raise ValidationError("scores must lie in [0, 1]")
    if not np.isin(labels, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")


def calibrate_thresholds(scores, labels, target_precision: float,
                         step: float = 0.01, *, pooled: bool = False,
                         objective: str = "coverage") -> ThresholdPair:
    """Search the threshold grid for the best feasible pair.

    Feasibility uses per-side precision by default; with pooled=True the
    two decided sides are pooled into a single precision constraint.
    objective="positive_recall" maximizes decided true positives first
    (coverage becomes the tie-break) for workloads that only care about
    finding positives early.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    _validate_scores_labels(scores, labels)
    if not 0.0 < target_precision <= 1.0:
        raise ValidationError("target_precision must lie in (0, 1]")
    if objective not in ("coverage", "positive_recall"):
        raise ValidationError(f"unknown objective {objective!r}")

    grid = threshold_grid(step)
    g_count = len(grid)
    n = scores.size
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    pos_sorted = np.sort(scores[labels == 1], kind="stable")

    # prefix counts against the grid: how many scores are <=, <, >= each value
    cnt_le = np.searchsorted(sorted_scores, grid, side="right")
    cnt_lt = np.searchsorted(sorted_scores, grid, side="left")
    pos_le = np.searchsorted(pos_sorted, grid, side="right")
    pos_lt = np.searchsorted(pos_sorted, grid, side="left")
    cnt_ge = n - cnt_lt
    pos_ge = len(pos_sorted) - pos_lt

    neg_cnt = cnt_le
    neg_tn = cnt_le - pos_le

    # decided-positive counts for every (p_low, p_high) pair; the overlap
    # band [p_high, p_low] goes to the negative side
    overlap_cnt = np.maximum(0, cnt_le[:, None] - cnt_lt[None, :])
    overlap_pos = np.maximum(0, pos_le[:, None] - pos_lt[None, :])
    pos_cnt = cnt_ge[None, :] - overlap_cnt
    pos_tp = pos_ge[None, :] - overlap_pos

    if pooled:
        dec = neg_cnt[:, None] + pos_cnt
        correct = neg_tn[:, None] + pos_tp
        feasible = (dec == 0) | (
            correct.astype(np.float64) / np.maximum(dec, 1) >= target_precision
        )
    else:
        feas_neg = (neg_cnt == 0) | (
            neg_tn.astype(np.float64) / np.maximum(neg_cnt, 1) >= target_precision
        )
        feas_pos = (pos_cnt == 0) | (
            pos_tp.astype(np.float64) / np.maximum(pos_cnt, 1) >= target_precision
        )
        feasible = feas_neg[:, None] & feas_pos

    coverage_cnt = neg_cnt[:, None] + pos_cnt
    if objective == "coverage":
        primary, secondary = coverage_cnt, pos_cnt
    else:
        primary, secondary = pos_tp, coverage_cnt

    il_idx = np.arange(g_count, dtype=np.int64)[:, None]
    ih_idx = np.arange(g_count, dtype=np.int64)[None, :]
    key = (
        (primary.astype(np.int64) * (n + 1) + secondary) * g_count + ih_idx
    ) * g_count + (g_count - 1 - il_idx)
    key = np.where(feasible, key, np.int64(-1))
    flat = int(np.argmax(key))
    il, ih = divmod(flat, g_count)
    if key[il, ih] < 0 or coverage_cnt[il, ih] == 0:
        return ThresholdPair(0.0, 1.0, target_precision)
    return ThresholdPair(float(grid[il]), float(grid[ih]), target_precision)


def threshold_stats(scores, labels, pair: ThresholdPair) -> ConfigStats:
    """Coverage and per-side precision of a pair on a labeled score set.

    An empty decided side reports precision 1.0 (vacuously correct).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    _validate_scores_labels(scores, labels)
    neg = scores <= pair.p_low
    pos = (scores >= pair.p_high) & ~neg
    n = scores.size
    neg_n = int(neg.sum())
    pos_n = int(pos.sum())
    coverage = (neg_n + pos_n) / n if n else 0.0
    neg_precision = float((labels[neg] == 0).sum() / neg_n) if neg_n else 1.0
    pos_precision = float((labels[pos] == 1).sum() / pos_n) if pos_n else 1.0
    return ConfigStats(coverage, pos_precision, neg_precision)


LabelSource = Union[Mapping[int, int], Sequence[int], np.ndarray]


def labels_for_matrix(matrix: ScoreMatrix, labels: LabelSource) -> np.ndarray:
    """Align a label mapping or sequence with a matrix's image order."""
    if isinstance(labels, Mapping):
        missing = [i for i in matrix.image_ids if i not in labels]
        if missing:
            raise ValidationError(f"labels missing for image ids {missing[:5]}")
        arr = np.array([labels[i] for i in matrix.image_ids])
    else:
        arr = np.asarray(labels)
        if arr.shape != (len(matrix.image_ids),):
            raise ValidationError(
                f"label array length {arr.shape} does not match "
                f"{len(matrix.image_ids)} images"
            )
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    return arr.astype(np.int64)


def calibrate_all(matrix: ScoreMatrix, labels: LabelSource,
                  target_precisions: Sequence[float], step: float = 0.01,
                  *, pooled: bool = False,
                  objective: str = "coverage") -> list[CalibratedModel]:
    """Calibrate every model at every target precision (model-major order)."""
    y = labels_for_matrix(matrix, labels)
    out = []
    for model_id in matrix.model_ids:
        row = matrix.row(model_id)
        for target in target_precisions:
            pair = calibrate_thresholds(row, y, target, step,
                                        pooled=pooled, objective=objective)
            out.append(CalibratedModel(model_id, pair, threshold_stats(row, y, pair)))
    return out


def write_calibrated(entries: Sequence[CalibratedModel], path: str) -> None:
    """Write calibrated threshold entries as a JSON array."""
    payload = [
        {
            "model_id": e.model_id,
            "target_precision": e.threshold.target_precision,
            "p_low": e.threshold.p_low,
            "p_high": e.threshold.p_high,
            "coverage": e.config_stats.coverage,
            "pos_precision": e.config_stats.pos_precision,
            "neg_precision": e.config_stats.neg_precision,
        }
        for e in entries
    ]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactIOError(f"cannot write calibrated thresholds {path}: {exc}") from exc


def read_calibrated(path: str) -> list[CalibratedModel]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ArtifactIOError(f"cannot read calibrated thresholds {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"calibrated file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise ValidationError(f"calibrated file {path} must be a JSON array")
    entries = []
    seen = set()
    for k, e in enumerate(payload):
        try:
            pair = ThresholdPair(float(e["p_low"]), float(e["p_high"]),
                                 float(e["target_precision"]))
            stats = ConfigStats(float(e["coverage"]), float(e["pos_precision"]),
                                float(e["neg_precision"]))
            model_id = str(e["model_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"calibrated file {path}, entry {k}: {exc}") from exc
        for name, value in (("p_low", pair.p_low), ("p_high", pair.p_high),
                            ("coverage", stats.coverage),
                            ("pos_precision", stats.pos_precision),
                            ("neg_precision", stats.neg_precision)):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(
                    f"calibrated file {path}, entry {k}: {name} outside [0, 1]"
                )
        key = (model_id, pair.target_precision)
        if key in seen:
            raise ValidationError(
                f"calibrated file {path}, entry {k}: duplicate (model, target) {key}"
            )
        seen.add(key)
        entries.append(CalibratedModel(model_id, pair, stats))
    return entries

"""Cascade structure, outcome precomputation, and reference evaluation.

A cascade is an ordered list of thresholded levels followed by one
terminal model.  Each level either decides an image (negative when its
score is at or below p_low, else positive when at or above p_high) or
passes it on; the terminal decides everything it receives with a 0.5
cutoff, so every image gets a label.

Per-(model, threshold) outcomes depend only on that entry, never on the
cascade around it, so they are precomputed once into an OutcomeTable and
shared by every cascade evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._hashing import fnv1a64, mix64
from .calibration import CalibratedModel
from .errors import ValidationError
from .models import ModelSpec, ScoreMatrix

TERMINAL_CUTOFF = 0.5


@dataclass(frozen=True)
class CascadeLevel:
    """Reference to one calibrated entry: a model at a target precision."""

    model_id: str
    target_precision: float


@dataclass(frozen=True)
class CascadeSpec:
    levels: tuple[CascadeLevel, ...]
    terminal_model_id: str

    def __post_init__(self):
        ids = [lv.model_id for lv in self.levels] + [self.terminal_model_id]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"cascade repeats a model: {ids}")

    @property
    def depth(self) -> int:
        return len(self.levels) + 1


@dataclass(frozen=True)
class CascadeEvalRecord:
    """One evaluated cascade: quality, cost, and how far images travel."""

    cascade_id: str
    accuracy: float
    expected_time_s: float
    throughput_fps: float
    level_hit_counts: tuple[int, ...]


def level_key(model_id: str, target_precision: float) -> str:
    return f"{model_id}@{target_precision:.17g}"


def cascade_id(spec: CascadeSpec) -> str:
    """Stable 16-hex-digit content hash of a cascade's structure."""
    parts = [fnv1a64(level_key(lv.model_id, lv.target_precision)) for lv in spec.levels]
    parts.append(fnv1a64("terminal:" + spec.terminal_model_id))
    return "%016x" % mix64(*parts)


class OutcomeTable:
    """Precomputed per-entry outcomes and per-model terminal predictions.

    outcomes[e, j] is +1 (decided positive), -1 (decided negative) or 0
    (uncertain) for calibrated entry e on eval image j; terminal_pred[m, j]
    is the 0.5-cutoff label model m emits when used as a terminal.
    """

    def __init__(self, image_ids: list[int], entries: list[CalibratedModel],
                 outcomes: np.ndarray, model_ids: list[str],
                 terminal_pred: np.ndarray):
        self.image_ids = image_ids
        self.entries = entries
        self.outcomes = outcomes
        self.model_ids = model_ids
        self.terminal_pred = terminal_pred
        self.entry_index = {
            (e.model_id, e.threshold.target_precision): i for i, e in enumerate(entries)
        }
        self.model_index = {m: i for i, m in enumerate(model_ids)}

    @property
    def image_count(self) -> int:
        return len(self.image_ids)

    def outcome_row(self, level: CascadeLevel) -> np.ndarray:
        idx = self.entry_index.get((level.model_id, level.target_precision))
        if idx is None:
            raise ValidationError(
                f"no calibrated entry for {level.model_id} at "
                f"target {level.target_precision}"
            )
        return self.outcomes[idx]

    def terminal_row(self, model_id: str) -> np.ndarray:
        idx = self.model_index.get(model_id)
        if idx is None:
            raise ValidationError(f"model {model_id} has no terminal predictions")
        return self.terminal_pred[idx]


def precompute_outcomes(eval_matrix: ScoreMatrix,
                        calibrated: Sequence[CalibratedModel]) -> OutcomeTable:
    """Build the outcome table for an eval-split score matrix.

    Every calibrated entry's model must have a score row; terminal
    predictions are derived for every model in the matrix since any of
    them can serve as a cascade terminal.
    """
    entries = list(calibrated)
    seen = set()
    for e in entries:
        key = (e.model_id, e.threshold.target_precision)
        if key in seen:
            raise ValidationError(f"duplicate calibrated entry {key}")
        seen.add(key)

    n = len(eval_matrix.image_ids)
    outcomes = np.zeros((len(entries), n), dtype=np.int8)
    for i, e in enumerate(entries):
        s = eval_matrix.row(e.model_id)
        neg = s <= e.threshold.p_low
        pos = (s >= e.threshold.p_high) & ~neg
        outcomes[i, pos] = 1
        outcomes[i, neg] = -1

    terminal_pred = eval_matrix.scores >= TERMINAL_CUTOFF
    return OutcomeTable(list(eval_matrix.image_ids), entries, outcomes,
                        list(eval_matrix.model_ids), terminal_pred)


def simulate_cascade(spec: CascadeSpec, table: OutcomeTable) -> tuple[np.ndarray, list[int]]:
    """Walk a cascade over all eval images.

    Returns (predicted labels as 0/1 int8, per-level hit counts with the
    terminal counted last).
    """
    n = table.image_count
    pred = np.empty(n, dtype=np.int8)
    undecided = np.ones(n, dtype=bool)
    hits = []
    for level in spec.levels:
        hits.append(int(undecided.sum()))
        o = table.outcome_row(level)
        pred[undecided & (o == 1)] = 1
        pred[undecided & (o == -1)] = 0
        undecided &= o == 0
    hits.append(int(undecided.sum()))
    term = table.terminal_row(spec.terminal_model_id)
    pred[undecided] = term[undecided].astype(np.int8)
    return pred, hits


def cascade_accuracy(predictions, labels) -> float:
    """Fraction of predicted labels that match the truth."""
    pred = np.asarray(predictions)
    y = np.asarray(labels)
    if pred.shape != y.shape or pred.ndim != 1:
        raise ValidationError("predictions and labels must be 1-D arrays of equal length")
    if pred.size == 0:
        raise ValidationError("cannot compute accuracy on an empty eval set")
    return float((pred == y).sum() / pred.size)


def _check_enum_args(models: Sequence[ModelSpec], max_depth: int,
                     anchor_terminal_only_at_depth: int) -> list[ModelSpec]:
    if max_depth not in (1, 2, 3):
        raise ValidationError("max_depth must be 1, 2, or 3")
    if anchor_terminal_only_at_depth < 1:
        raise ValidationError("anchor_terminal_only_at_depth must be >= 1")
    anchors = [m for m in models if m.is_anchor]
    if len(anchors) > 1:
        raise ValidationError("model pool must contain at most one anchor")
    if max_depth >= anchor_terminal_only_at_depth and not anchors:
        raise ValidationError(
            "enumeration requires an anchor model at depths >= "
            f"{anchor_terminal_only_at_depth}"
        )
    return anchors


def enumerate_cascades(calibrated: Sequence[CalibratedModel],
                       models: Sequence[ModelSpec], max_depth: int,
                       anchor_terminal_only_at_depth: int = 3) -> Iterator[CascadeSpec]:
    """Yield every admissible cascade up to max_depth, deterministically.

    Models within a cascade are distinct.  At depths at or beyond
    anchor_terminal_only_at_depth the terminal must be an anchor (pass a
    value above max_depth to lift the restriction).  Order: depth
    ascending, then levels in calibrated-entry order, then terminals in
    model order.
    """
    anchors = _check_enum_args(models, max_depth, anchor_terminal_only_at_depth)
    model_ids = [m.model_id for m in models]
    anchor_ids = [m.model_id for m in anchors]
    entry_levels = [
        CascadeLevel(e.model_id, e.threshold.target_precision) for e in calibrated
    ]

    for m in model_ids:
        yield CascadeSpec((), m)
    if max_depth < 2:
        return

    def terminals_for(depth: int, used: tuple[str, ...]) -> list[str]:
        pool = anchor_ids if depth >= anchor_terminal_only_at_depth else model_ids
        return [m for m in pool if m not in used]

    for lv1 in entry_levels:
        for t in terminals_for(2, (lv1.model_id,)):
            yield CascadeSpec((lv1,), t)
    if max_depth < 3:
        return

    for lv1 in entry_levels:
        for lv2 in entry_levels:
            if lv2.model_id == lv1.model_id:
                continue
            for t in terminals_for(3, (lv1.model_id, lv2.model_id)):
                yield CascadeSpec((lv1, lv2), t)


def count_cascades(calibrated: Sequence[CalibratedModel], models: Sequence[ModelSpec],
                   max_depth: int, anchor_terminal_only_at_depth: int = 3) -> int:
    """Size of the enumeration, computed combinatorially."""
    anchors = _check_enum_args(models, max_depth, anchor_terminal_only_at_depth)
    n_models = len(models)
    n_anchor = len(anchors)
    anchor_set = {m.model_id for m in anchors}
    per_model: dict[str, int] = {}
    for e in calibrated:
        per_model[e.model_id] = per_model.get(e.model_id, 0) + 1
    n_entries = len(calibrated)
    entries_non_anchor = sum(c for m, c in per_model.items() if m not in anchor_set)

    total = n_models
    if max_depth >= 2:
        if 2 >= anchor_terminal_only_at_depth:
            total += entries_non_anchor * n_anchor
        else:
            total += n_entries * (n_models - 1)
    if max_depth >= 3:
        if 3 >= anchor_terminal_only_at_depth:
            pairs = entries_non_anchor**2 - sum(
                c * c for m, c in per_model.items() if m not in anchor_set
            )
            total += pairs * n_anchor
        else:
            pairs = n_entries**2 - sum(c * c for c in per_model.values())
            total += pairs * (n_models - 2)
    return total

"""Pareto frontier over (throughput, accuracy), ALC metrics, selection.

The frontier is the staircase of non-dominated points: sorted by
accuracy descending, throughput is strictly increasing.  ALC integrates
the step function T(a) = max throughput among points with accuracy >= a
over an accuracy range; ALC / width is average throughput and the ratio
of two ALCs is a speedup.  Selection picks the frontier point matching
accuracy/throughput loss budgets relative to the frontier's best.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import SelectionInfeasible, ValidationError


@dataclass(frozen=True)
class EvalPoint:
    cascade_id: str
    accuracy: float
    throughput_fps: float


@dataclass(frozen=True)
class ParetoFrontier:
    points: tuple[EvalPoint, ...]

    @property
    def max_accuracy(self) -> float:
        return self.points[0].accuracy

    @property
    def max_throughput(self) -> float:
        return self.points[-1].throughput_fps

    def validate(self) -> None:
        """Assert the staircase invariants (meant for tests)."""
        for a, b in zip(self.points, self.points[1:]):
            if not (a.accuracy > b.accuracy and a.throughput_fps < b.throughput_fps):
                raise ValidationError(
                    f"frontier order violated between {a.cascade_id} and {b.cascade_id}"
                )


def _check_point(p: EvalPoint) -> None:
    if not (math.isfinite(p.accuracy) and 0.0 <= p.accuracy <= 1.0):
        raise ValidationError(f"point {p.cascade_id}: accuracy {p.accuracy!r} not in [0, 1]")
    if not (math.isfinite(p.throughput_fps) and p.throughput_fps > 0.0):
        raise ValidationError(
            f"point {p.cascade_id}: throughput {p.throughput_fps!r} must be positive"
        )


def pareto_frontier(points: Sequence[EvalPoint]) -> ParetoFrontier:
    """Exact non-dominated set in O(n log n).

    Sort by throughput descending (accuracy descending, then cascade_id
    as tie-breaks) and sweep, keeping points that strictly raise the
    best accuracy seen.  Duplicate (accuracy, throughput) pairs keep the
    smallest cascade_id.
    """
    if not points:
        raise ValidationError("cannot build a frontier from no points")
    for p in points:
        _check_point(p)
    ordered = sorted(points, key=lambda p: (-p.throughput_fps, -p.accuracy, p.cascade_id))
    kept = []
    best_acc = -math.inf
    for p in ordered:
        if p.accuracy > best_acc:
            kept.append(p)
            best_acc = p.accuracy
    kept.reverse()
    return ParetoFrontier(tuple(kept))


def alc(frontier: ParetoFrontier, a_lo: float, a_hi: float) -> float:
    """Area left of the frontier's step curve over [a_lo, a_hi].

    T(a) is undefined above the frontier's maximum accuracy, so a_hi may
    not exceed it.
    """
    pts = frontier.points
    if a_lo >= a_hi:
        raise ValidationError(f"need a_lo < a_hi, got [{a_lo}, {a_hi}]")
    if a_hi > pts[0].accuracy:
        raise ValidationError(
            f"a_hi={a_hi} exceeds the frontier's maximum accuracy {pts[0].accuracy}"
        )
    total = 0.0
    for k, p in enumerate(pts):
        upper = min(a_hi, p.accuracy)
        lower = max(a_lo, pts[k + 1].accuracy) if k + 1 < len(pts) else a_lo
        if upper > lower:
            total += p.throughput_fps * (upper - lower)
    return total


def average_throughput(frontier: ParetoFrontier, a_lo: float, a_hi: float) -> float:
    return alc(frontier, a_lo, a_hi) / (a_hi - a_lo)


PointsOrFrontier = Union[ParetoFrontier, Sequence[EvalPoint]]


def _as_frontier_and_span(arg: PointsOrFrontier):
    if isinstance(arg, ParetoFrontier):
        pts = arg.points
        return arg, min(p.accuracy for p in pts), max(p.accuracy for p in pts)
    if not arg:
        raise ValidationError("cannot compute ALC over an empty point set")
    span_lo = min(p.accuracy for p in arg)
    span_hi = max(p.accuracy for p in arg)
    return pareto_frontier(arg), span_lo, span_hi


def speedup(points_a: PointsOrFrontier, points_b: PointsOrFrontier,
            a_lo: Optional[float] = None, a_hi: Optional[float] = None) -> float:
    """ALC ratio of a over b on a shared accuracy range.

    Inputs may be raw point sets (e.g. frontier cascades re-costed under
    another scenario); their frontiers are taken internally.  The default
    range is the intersection of the two sets' accuracy spans.
    """
    fa, lo_a, hi_a = _as_frontier_and_span(points_a)
    fb, lo_b, hi_b = _as_frontier_and_span(points_b)
    lo = max(lo_a, lo_b) if a_lo is None else a_lo
    hi = min(hi_a, hi_b) if a_hi is None else a_hi
    if lo >= hi:
        raise ValidationError(
            f"accuracy ranges do not overlap: [{lo_a}, {hi_a}] vs [{lo_b}, {hi_b}]"
        )
    return alc(fa, lo, hi) / alc(fb, lo, hi)


@dataclass(frozen=True)
class SelectionConstraint:
    max_accuracy_loss: Optional[float] = None
    max_throughput_loss: Optional[float] = None

    def __post_init__(self):
        if self.max_accuracy_loss is None and self.max_throughput_loss is None:
            raise ValidationError("selection constraint needs at least one loss bound")
        for name, v in (("max_accuracy_loss", self.max_accuracy_loss),
                        ("max_throughput_loss", self.max_throughput_loss)):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")


def select(frontier: ParetoFrontier, constraint: SelectionConstraint) -> EvalPoint:
    """Pick the frontier point satisfying the loss budgets.

    Accuracy budget: keep points within (1 - U_acc) of the best accuracy
    and take the fastest (lowest accuracy still above the floor).
    Throughput budget alone: keep points within (1 - U_thru) of the best
    throughput and take the most accurate.  With both, the accuracy
    floor applies first and the throughput floor filters the rest.
    """
    pts = frontier.points
    u_acc = constraint.max_accuracy_loss
    u_thru = constraint.max_throughput_loss
    if u_acc is not None:
        acc_floor = (1.0 - u_acc) * frontier.max_accuracy
        qualifying = [p for p in pts if p.accuracy >= acc_floor]
        if u_thru is None:
            return qualifying[-1]
        thr_floor = (1.0 - u_thru) * frontier.max_throughput
        both = [p for p in qualifying if p.throughput_fps >= thr_floor]
        if not both:
            raise SelectionInfeasible(
                f"no frontier point has accuracy >= {acc_floor} and "
                f"throughput >= {thr_floor} fps",
                min_accuracy=acc_floor, min_throughput_fps=thr_floor,
            )
        return both[-1]
    thr_floor = (1.0 - u_thru) * frontier.max_throughput
    for p in pts:
        if p.throughput_fps >= thr_floor:
            return p
    raise SelectionInfeasible(
        f"no frontier point has throughput >= {thr_floor} fps",
        min_throughput_fps=thr_floor,
    )


def select_vs_reference(frontier: ParetoFrontier, reference_accuracy: float) -> EvalPoint:
    """Fastest frontier point whose accuracy is at least the reference."""
    qualifying = [p for p in frontier.points if p.accuracy >= reference_accuracy]
    if not qualifying:
        raise SelectionInfeasible(
            f"no frontier point reaches reference accuracy {reference_accuracy} "
            f"(frontier max {frontier.max_accuracy})",
            min_accuracy=reference_accuracy,
        )
    return qualifying[-1]

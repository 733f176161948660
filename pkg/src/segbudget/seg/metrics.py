""" Segmentation metrics.

    gIoU is the mean of per-sample IoU, cIoU the ratio of summed
    intersections to summed unions. Both are accumulated as exact integer
    counts and divided once at the end.
"""

from fractions import Fraction
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from segbudget import error
from segbudget.seg.mask import BBox, IoUStats, Mask, Point


MaskPair = Tuple[Mask, Mask]


class IoUResult(NamedTuple):
    """IoU value together with the counts it came from."""

    value: float
    stats: IoUStats


def iou_stats(pred: Mask, gt: Mask) -> IoUStats:
    """Intersection and union pixel counts of a same-shape pair."""
    pred.check_same_shape(gt)
    intersection = int(np.count_nonzero(pred.bits & gt.bits))
    union = int(np.count_nonzero(pred.bits | gt.bits))
    return IoUStats(intersection, union)


def iou(pred: Mask, gt: Mask) -> IoUResult:
    """IoU of a pair; empty vs. empty counts as a perfect match."""
    stats = iou_stats(pred, gt)
    return IoUResult(stats.value, stats)


def _pair_stats(pairs: Iterable[MaskPair]) -> List[IoUStats]:
    stats = [iou_stats(pred, gt) for pred, gt in pairs]
    if not stats:
        raise error.ValidationError("Cannot compute a dataset IoU over no samples")
    return stats


def mean_iou(stats: Sequence[IoUStats]) -> float:
    """Mean of per-sample IoU over precomputed counts."""
    if not stats:
        raise error.ValidationError("Cannot compute a dataset IoU over no samples")
    total = sum(
        (Fraction(i.intersection, i.union) if i.union else Fraction(1) for i in stats),
        Fraction(0),
    )
    return float(total / len(stats))


def cumulative_iou(stats: Sequence[IoUStats]) -> float:
    """Summed intersections over summed unions; 1.0 for an all-empty set."""
    if not stats:
        raise error.ValidationError("Cannot compute a dataset IoU over no samples")
    union = sum(i.union for i in stats)
    if union == 0:
        return 1.0
    return float(Fraction(sum(i.intersection for i in stats), union))


def giou(pairs: Iterable[MaskPair]) -> float:
    """Mean per-sample IoU."""
    return mean_iou(_pair_stats(pairs))


def ciou(pairs: Iterable[MaskPair]) -> float:
    """Cumulative IoU over the dataset.

    Pairs may differ in size from each other; raw pixel counts are summed,
    so larger images weigh more.
    """
    return cumulative_iou(_pair_stats(pairs))


def accumulate(pairs: Iterable[MaskPair]) -> Tuple[float, float]:
    """Both dataset metrics in one pass: (gIoU, cIoU)."""
    stats = _pair_stats(pairs)
    return mean_iou(stats), cumulative_iou(stats)


def bbox_l1(pred: BBox, gt: BBox) -> float:
    """Mean absolute coordinate difference of two boxes."""
    return sum(abs(p - g) for p, g in zip(pred, gt)) / 4


def point_l1(pred: Point, gt: Point) -> float:
    """Mean absolute coordinate difference of two points."""
    return (abs(pred.x - gt.x) + abs(pred.y - gt.y)) / 2

# pylint: disable=
""" Mask and segmentation metric tests.
"""
import logging

import numpy as np
import pytest

from segbudget import error
from segbudget.seg import metrics
from segbudget.seg.mask import BBox, IoUStats, Mask, Point


log = logging.getLogger(__name__)


def brute_force_counts(pred: Mask, gt: Mask):
    """Count pixels one by one."""
    inter = union = 0
    for y in range(gt.height):
        for x in range(gt.width):
            a, b = bool(pred.bits[y][x]), bool(gt.bits[y][x])
            inter += a and b
            union += a or b
    return inter, union


def random_pairs(count=200, seed=42):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        height, width = rng.integers(1, 17, size=2)
        density = rng.random()
        pred = Mask(rng.random((height, width)) < density)
        gt = Mask(rng.random((height, width)) < rng.random())
        pairs.append((pred, gt))
    return pairs


def test_metrics_match_pixel_oracle():
    pairs = random_pairs()
    counts = [brute_force_counts(p, g) for p, g in pairs]
    expected_giou = sum(i / u if u else 1.0 for i, u in counts) / len(counts)
    expected_ciou = sum(i for i, _ in counts) / sum(u for _, u in counts)

    for (pred, gt), (inter, union) in zip(pairs, counts):
        assert metrics.iou_stats(pred, gt) == IoUStats(inter, union)

    assert metrics.giou(pairs) == pytest.approx(expected_giou, abs=1e-12)
    assert metrics.ciou(pairs) == pytest.approx(expected_ciou, abs=1e-12)
    assert metrics.accumulate(pairs) == (metrics.giou(pairs), metrics.ciou(pairs))


def test_metrics_are_order_independent():
    pairs = random_pairs(50, seed=7)
    assert metrics.giou(pairs) == metrics.giou(pairs[::-1])
    assert metrics.ciou(pairs) == metrics.ciou(pairs[::-1])


@pytest.mark.parametrize(
    ("pred", "gt", "expected"),
    [
        ([(0, 0), (1, 0)], [(1, 0), (1, 1)], 1 / 3),
        ([(0, 0)], [(0, 0)], 1.0),
        ([(0, 0)], [(1, 1)], 0.0),
        ([], [], 1.0),
        ([], [(1, 1)], 0.0),
    ],
)
def test_iou(pred, gt, expected):
    result = metrics.iou(Mask.from_pixels(2, 2, pred), Mask.from_pixels(2, 2, gt))
    assert result.value == pytest.approx(expected)
    assert result.stats.value == result.value


def test_ciou_weighs_large_masks():
    small = (Mask.from_pixels(2, 1, [(0, 0)]), Mask.from_pixels(2, 1, [(0, 0), (1, 0)]))
    large = (Mask(np.ones((10, 10))), Mask(np.ones((10, 10))))
    assert metrics.giou([small, large]) == pytest.approx(0.75)
    assert metrics.ciou([small, large]) == pytest.approx(101 / 102)


def test_all_empty_dataset():
    pair = (Mask.empty(3, 3), Mask.empty(3, 3))
    assert metrics.accumulate([pair, pair]) == (1.0, 1.0)


def test_empty_dataset_is_rejected():
    with pytest.raises(error.ValidationError):
        metrics.giou([])
    with pytest.raises(error.ValidationError):
        metrics.ciou([])


def test_shape_mismatch():
    with pytest.raises(error.ShapeError):
        metrics.iou(Mask.empty(2, 3), Mask.empty(3, 2))


@pytest.mark.parametrize(
    ("pred", "gt", "expected"),
    [
        (BBox(10, 20, 30, 40), BBox(10, 20, 30, 40), 0.0),
        (BBox(0, 0, 10, 10), BBox(4, 4, 14, 14), 4.0),
        (BBox(0, 0, 10, 10), BBox(1, 2, 13, 14), 2.5),
    ],
)
def test_bbox_l1(pred, gt, expected):
    assert metrics.bbox_l1(pred, gt) == expected


@pytest.mark.parametrize(
    ("pred", "gt", "expected"),
    [(Point(5, 5), Point(5, 5), 0.0), (Point(0, 0), Point(3, 5), 4.0)],
)
def test_point_l1(pred, gt, expected):
    assert metrics.point_l1(pred, gt) == expected


class TestMask:
    def test_rle_example(self):
        # 2 rows, 3 columns; column-major runs
        mask = Mask.from_rle("2 3 1 2 2 1")
        assert mask.bits.tolist() == [[False, True, False], [True, False, True]]
        assert mask.to_rle() == "2 3 1 2 2 1"

    def test_rle_starting_with_ones(self):
        mask = Mask.from_rle("1 2 0 2")
        assert mask.area == 2
        assert mask.to_rle() == "1 2 0 2"

    def test_rle_matches_random_masks(self):
        for pred, gt in random_pairs(20, seed=3):
            assert Mask.from_rle(pred.to_rle()) == pred
            assert Mask.from_rle(gt.to_rle()) == gt

    @pytest.mark.parametrize(
        "text",
        ["", "3", "2 2 1 1", "2 2 a b", "0 2", "2 2 -1 5", "2 2 1 1 1 1 1"],
    )
    def test_bad_rle(self, text):
        with pytest.raises(error.ParseError) as exc:
            Mask.from_rle(text)
        assert exc.value.raw == text

    def test_from_box(self):
        mask = Mask.from_box(4, 3, BBox(1, 0, 2, 1))
        assert mask.area == 4
        assert mask.bits[0].tolist() == [False, True, True, False]

    def test_from_box_clips(self):
        assert Mask.from_box(4, 4, BBox(2, 2, 10, 10)).area == 4
        assert Mask.from_box(4, 4, BBox(5, 5, 10, 10)).area == 0

    def test_bad_box(self):
        with pytest.raises(error.ValidationError):
            BBox.from_list([5, 5, 1, 1])
        with pytest.raises(error.ValidationError):
            BBox.from_list([1, 2, 3])

    def test_pixel_outside(self):
        with pytest.raises(error.ValidationError):
            Mask.from_pixels(2, 2, [(2, 0)])

    def test_read_only(self):
        mask = Mask.empty(2, 2)
        with pytest.raises(ValueError):
            mask.bits[0, 0] = True

    def test_bad_grid(self):
        with pytest.raises(error.ValidationError):
            Mask(np.zeros((0, 3)))
        with pytest.raises(error.ValidationError):
            Mask.empty(0, 1)

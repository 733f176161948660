""" Binary masks and geometric primitives.

    Masks are stored as read-only boolean numpy arrays of shape
    (height, width). On disk they travel as COCO-style uncompressed RLE
    text: "<height> <width> <c0> <c1> ...", where the counts are
    alternating runs of 0 and 1 in column-major order, starting with 0.
"""

import logging

from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from segbudget import error


log = logging.getLogger(__name__)


class BBox(NamedTuple):
    """Axis-aligned box in pixel coordinates, corners inclusive."""

    x1: int
    y1: int
    x2: int
    y2: int

    @classmethod
    def from_list(cls, values: Sequence) -> "BBox":
        """Build a validated box from a 4-element sequence."""
        if len(values) != 4:
            raise error.ValidationError(f"A box needs 4 coordinates, got {values!r}")
        box = cls(*(int(i) for i in values))
        box.validate()
        return box

    def validate(self):
        """Check the corner ordering."""
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise error.ValidationError(f"Invalid box corners {list(self)!r}")


class Point(NamedTuple):
    """A pixel position."""

    x: int
    y: int

    @classmethod
    def from_list(cls, values: Sequence) -> "Point":
        """Build a point from a 2-element sequence."""
        if len(values) != 2:
            raise error.ValidationError(f"A point needs 2 coordinates, got {values!r}")
        return cls(int(values[0]), int(values[1]))


class IoUStats(NamedTuple):
    """Exact pixel counts for one mask pair."""

    intersection: int
    union: int

    @property
    def value(self) -> float:
        """IoU of the pair; 1.0 when both masks are empty."""
        if self.union == 0:
            return 1.0
        return self.intersection / self.union


@dataclass(frozen=True)
class Mask:
    """A binary occupancy grid."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.ndim != 2 or 0 in bits.shape:
            raise error.ValidationError(
                f"Mask needs a non-empty 2D grid, got shape {bits.shape}"
            )
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        """Number of rows."""
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        """Number of columns."""
        return int(self.bits.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        """(height, width)"""
        return self.height, self.width

    @property
    def area(self) -> int:
        """Number of set pixels."""
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.shape, self.bits.tobytes()))

    def __repr__(self):
        return f"<Mask {self.width}x{self.height} area={self.area}>"

    @classmethod
    def empty(cls, width: int, height: int) -> "Mask":
        """An all-zero mask."""
        _check_dims(width, height)
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_pixels(
        cls, width: int, height: int, pixels: Iterable[Tuple[int, int]]
    ) -> "Mask":
        """Build a mask from (x, y) pixel positions."""
        _check_dims(width, height)
        bits = np.zeros((height, width), dtype=bool)
        for x, y in pixels:
            if not (0 <= x < width and 0 <= y < height):
                raise error.ValidationError(
                    f"Pixel ({x}, {y}) lies outside the {width}x{height} grid"
                )
            bits[y, x] = True
        return cls(bits)

    @classmethod
    def from_box(cls, width: int, height: int, box: BBox) -> "Mask":
        """Fill a box (clipped to the canvas)."""
        _check_dims(width, height)
        bits = np.zeros((height, width), dtype=bool)
        x1, y1 = max(box.x1, 0), max(box.y1, 0)
        x2, y2 = min(box.x2, width - 1), min(box.y2, height - 1)
        if x1 <= x2 and y1 <= y2:
            bits[y1 : y2 + 1, x1 : x2 + 1] = True
        return cls(bits)

    @classmethod
    def from_rle(cls, text: str) -> "Mask":
        """Decode the RLE text format."""
        try:
            numbers = [int(i) for i in text.split()]
        except ValueError as exc:
            raise error.ParseError(f"Bad RLE mask ({exc})", text) from exc
        if len(numbers) < 2:
            raise error.ParseError("RLE mask lacks its size header", text)
        height, width, counts = numbers[0], numbers[1], numbers[2:]
        if height <= 0 or width <= 0:
            raise error.ParseError(f"Bad RLE mask size {height}x{width}", text)
        if any(i < 0 for i in counts):
            raise error.ParseError("Negative run length in RLE mask", text)
        if sum(counts) != height * width:
            raise error.ParseError(
                f"RLE runs cover {sum(counts)} pixels, expected {height * width}",
                text,
            )
        values = np.zeros(len(counts), dtype=bool)
        values[1::2] = True
        flat = np.repeat(values, counts)
        return cls(flat.reshape((width, height)).T)

    def to_rle(self) -> str:
        """Encode into the RLE text format."""
        flat = self.bits.T.reshape(-1)
        counts: List[int] = []
        current, run = False, 0
        for bit in flat.tolist():
            if bit == current:
                run += 1
            else:
                counts.append(run)
                current, run = bit, 1
        counts.append(run)
        return " ".join(str(i) for i in [self.height, self.width, *counts])

    def check_same_shape(self, other: "Mask"):
        """Raise ShapeError unless both masks have the same size."""
        if self.shape != other.shape:
            raise error.ShapeError(
                f"Mask size mismatch: {self.width}x{self.height}"
                f" vs. {other.width}x{other.height}"
            )


def _check_dims(width: int, height: int):
    if width <= 0 or height <= 0:
        raise error.ValidationError(f"Bad mask size {width}x{height}")

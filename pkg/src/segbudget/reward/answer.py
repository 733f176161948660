""" Model output parsing.

    The segmentation model writes its reasoning into <think></think> and a
    JSON object into <answer></answer>, e.g.

        <think>...</think>
        <answer>{"Bbox": [10,100,200,210], "Point 1": [30,110], "Point 2": [35,180]}</answer>

    Keys are matched case-sensitively; anything that is not strict JSON
    (single quotes, trailing commas) does not count as a valid answer.
"""

import json
import re

from dataclasses import dataclass
from typing import Any, Dict, Optional

from segbudget import error
from segbudget.seg.mask import BBox, Point


THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
ANSWER_OPEN, ANSWER_CLOSE = "<answer>", "</answer>"
KEY_BBOX, KEY_POINT1, KEY_POINT2 = "Bbox", "Point 1", "Point 2"

THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)


@dataclass(frozen=True)
class SegReference:
    """Spatial prompt for the mask decoder: one box and two points."""

    bbox: BBox
    point1: Point
    point2: Point

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SegReference":
        """Build from the answer JSON object; raises ValidationError."""
        try:
            return cls(
                BBox.from_list(_int_list(data[KEY_BBOX], 4)),
                Point.from_list(_int_list(data[KEY_POINT1], 2)),
                Point.from_list(_int_list(data[KEY_POINT2], 2)),
            )
        except (KeyError, TypeError) as exc:
            raise error.ValidationError(f"Incomplete answer object ({exc})") from exc

    def as_dict(self) -> Dict[str, list]:
        """The answer JSON object."""
        return {
            KEY_BBOX: list(self.bbox),
            KEY_POINT1: list(self.point1),
            KEY_POINT2: list(self.point2),
        }


@dataclass(frozen=True)
class ParsedOutput:
    """Result of parsing one model output."""

    think: str
    answer: Optional[SegReference]
    format_reason: int
    format_seg: int


def _int_list(value: Any, size: int) -> list:
    # bool is an int subclass, and floats like 10.0 are not integers here
    if (
        not isinstance(value, list)
        or len(value) != size
        or not all(isinstance(i, int) and not isinstance(i, bool) for i in value)
    ):
        raise error.ValidationError(f"Expected {size} integers, got {value!r}")
    return value


def serialize_answer(ref: SegReference) -> str:
    """Render a reference in the answer JSON format."""
    return json.dumps(ref.as_dict())


def parse_answer(payload: str) -> Optional[SegReference]:
    """Parse the content of an answer block, or return None."""
    try:
        data = json.loads(payload.strip())
    except ValueError:
        return None
    if not isinstance(data, dict):
        return None
    try:
        return SegReference.from_dict(data)
    except error.ValidationError:
        return None


def parse_output(text: str, thinking: bool = True) -> ParsedOutput:
    """Split a model output into reasoning and answer, and grade its format.

    Never raises; broken structure results in zero format rewards.
    With ``thinking=False`` (the no-thinking variant) the think block is
    not required and ``format_reason`` is always 0.
    """
    text = text or ""
    single = {
        tag: text.count(tag) == 1
        for tag in (THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE)
    }
    answer_ok = single[ANSWER_OPEN] and single[ANSWER_CLOSE]
    answer_match = ANSWER_RE.search(text) if answer_ok else None
    think_match = (
        THINK_RE.search(text) if single[THINK_OPEN] and single[THINK_CLOSE] else None
    )

    format_reason = 0
    if thinking and think_match and answer_match:
        if think_match.end() <= answer_match.start():
            format_reason = 1

    answer = None
    if answer_match:
        answer = parse_answer(answer_match.group(1))
    format_seg = int(answer is not None)

    return ParsedOutput(
        think=think_match.group(1).strip() if think_match else "",
        answer=answer,
        format_reason=format_reason,
        format_seg=format_seg,
    )


def think_token_count(text: str) -> int:
    """Whitespace token count of a reasoning text (fallback tokenizer)."""
    return len(text.split())

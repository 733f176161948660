""" Prediction and score file loaders.

    Loaders never stop at a bad line: they skip it, log a warning, and
    report it in their list of problems so the caller can signal a
    partial failure.
"""

import json
import logging

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from segbudget import error
from segbudget.annotate.scoring import REASONING_KEYS, parse_score_dict
from segbudget.reward.answer import SegReference, think_token_count
from segbudget.reward.confidence import ReasoningTrace
from segbudget.seg.mask import Mask


log = logging.getLogger(__name__)

TOKENS_PRODUCER, TOKENS_WHITESPACE, TOKENS_MIXED = "producer", "whitespace", "mixed"


@dataclass(frozen=True)
class PredictionRecord:
    """One model output to evaluate."""

    sample_id: str
    reasoning: str = ""
    token_count: Optional[int] = None
    answer: Optional[SegReference] = None
    mask: Optional[Mask] = None
    trace: Optional[ReasoningTrace] = None

    def __post_init__(self):
        if self.token_count is not None and self.token_count < 0:
            raise error.ValidationError(f"Negative token count {self.token_count}")

    @property
    def tokens(self) -> int:
        """Producer token count, or the whitespace count of the reasoning."""
        if self.token_count is not None:
            return self.token_count
        return think_token_count(self.reasoning)

    @property
    def token_mode(self) -> str:
        """Where the token count came from."""
        return TOKENS_WHITESPACE if self.token_count is None else TOKENS_PRODUCER

    @classmethod
    def from_dict(
        cls, data: Dict[str, Any], think_only: bool = True
    ) -> "PredictionRecord":
        """Build from a predictions JSONL record."""
        try:
            token_count = data.get("token_count")
            if token_count is not None and (
                isinstance(token_count, bool) or not isinstance(token_count, int)
            ):
                raise error.ValidationError(f"Bad token count {token_count!r}")
            answer = data.get("answer")
            trace = data.get("trace")
            mask_rle = data.get("mask_rle")
            return cls(
                sample_id=str(data["sample_id"]),
                reasoning=str(data.get("reasoning") or ""),
                token_count=token_count,
                answer=SegReference.from_dict(answer) if answer else None,
                mask=Mask.from_rle(mask_rle) if mask_rle else None,
                trace=ReasoningTrace.from_record(trace, think_only) if trace else None,
            )
        except (KeyError, TypeError) as exc:
            raise error.ValidationError(f"Malformed prediction record ({exc})") from exc


def _read_jsonl(path: Path, problems: List[str]):
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except ValueError as exc:
                problems.append(f"{path.name}:{lineno}: not JSON ({exc})")
                log.warning("Skipping %s:%d: not JSON", path.name, lineno)


def load_predictions(
    path: Union[str, Path], think_only: bool = True
) -> Tuple[List[PredictionRecord], List[str]]:
    """Read predictions; unparseable records are skipped and reported."""
    path = Path(path)
    records: List[PredictionRecord] = []
    problems: List[str] = []
    seen = set()
    for lineno, data in _read_jsonl(path, problems):
        try:
            record = PredictionRecord.from_dict(data, think_only)
        except error.LoggableError as exc:
            problems.append(f"{path.name}:{lineno}: {exc}")
            log.warning("Skipping prediction %s:%d: %s", path.name, lineno, exc)
            continue
        if record.sample_id in seen:
            problems.append(
                f"{path.name}:{lineno}: duplicate sample {record.sample_id}"
            )
            continue
        seen.add(record.sample_id)
        records.append(record)
    return records, problems


def load_offline_scores(
    path: Union[str, Path]
) -> Tuple[Dict[str, Tuple[float, float, float]], List[str]]:
    """Read precomputed (completeness, grounding, fluency) ratings by sample id."""
    path = Path(path)
    scores: Dict[str, Tuple[float, float, float]] = {}
    problems: List[str] = []
    for lineno, data in _read_jsonl(path, problems):
        try:
            values = parse_score_dict(json.dumps(data), REASONING_KEYS)
            scores[str(data["sample_id"])] = tuple(values[i] for i in REASONING_KEYS)
        except (error.ParseError, KeyError, TypeError) as exc:
            problems.append(f"{path.name}:{lineno}: bad score record ({exc})")
            log.warning("Skipping score %s:%d: %s", path.name, lineno, exc)
    return scores, problems

""" Token-level confidence.

    Uncertainty of a generated reasoning sequence is one minus the mean
    margin between the top-1 and top-2 token probabilities. Only those two
    probabilities are kept per step; they are taken as already normalized.
"""

import json
import logging

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from segbudget import error


log = logging.getLogger(__name__)

# Probabilities coming out of float32 softmax rarely sum to exactly 1
PROB_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TokenStep:
    """Top-2 probabilities of one generation step."""

    p1: float
    p2: float

    def validate(self, index: int = 0):
        """Check 0 <= p2 <= p1 <= 1 and p1 + p2 <= 1."""
        p1, p2 = self.p1, self.p2
        if not (0.0 <= p2 <= p1 <= 1.0) or p1 + p2 > 1.0 + PROB_TOLERANCE:
            raise error.ValidationError(
                f"Invalid top-2 probabilities at timestep {index}: p1={p1!r}, p2={p2!r}"
            )

    @property
    def margin(self) -> float:
        """p1 - p2"""
        return self.p1 - self.p2


@dataclass(frozen=True)
class ReasoningTrace:
    """The per-token top-2 probabilities of one generated sequence."""

    steps: Tuple[TokenStep, ...]

    def __post_init__(self):
        steps = tuple(
            i if isinstance(i, TokenStep) else TokenStep(float(i[0]), float(i[1]))
            for i in self.steps
        )
        if not steps:
            raise error.ValidationError("A reasoning trace needs at least one token")
        for index, step in enumerate(steps):
            step.validate(index)
        object.__setattr__(self, "steps", steps)

    def __len__(self):
        return len(self.steps)

    @property
    def length(self) -> int:
        """Token count T."""
        return len(self.steps)

    def margins(self) -> np.ndarray:
        """Per-step margins as an array."""
        return np.array([i.margin for i in self.steps], dtype=float)

    def span(self, start: int, end: int) -> "ReasoningTrace":
        """The sub-trace covering steps [start, end)."""
        if not 0 <= start < end <= len(self.steps):
            raise error.ValidationError(
                f"Think span [{start}, {end}) does not fit"
                f" a trace of {len(self.steps)} tokens"
            )
        return ReasoningTrace(self.steps[start:end])

    @classmethod
    def from_record(cls, record: Dict, think_only: bool = True) -> "ReasoningTrace":
        """Build a trace from a JSONL record, cut to its think span if asked to."""
        try:
            trace = cls(tuple(record["steps"]))
        except (KeyError, TypeError, IndexError) as exc:
            raise error.ValidationError(f"Malformed trace record ({exc})") from exc
        span = record.get("think_span")
        if think_only and span:
            trace = trace.span(int(span[0]), int(span[1]))
        return trace


def mean_margin(trace: ReasoningTrace) -> float:
    """Average top-1/top-2 margin over the trace."""
    return float(np.sum(trace.margins()) / trace.length)


def uncertainty(trace: ReasoningTrace) -> float:
    """One minus the mean margin; 0 is fully confident, 1 is undecided."""
    return 1.0 - mean_margin(trace)


def trace_uncertainty(
    steps: Sequence[Sequence[float]], think_span: Optional[Sequence[int]] = None
) -> float:
    """Convenience wrapper over raw [[p1, p2], ...] lists."""
    record: Dict = {"steps": steps}
    if think_span:
        record["think_span"] = think_span
    return uncertainty(ReasoningTrace.from_record(record))


def load_traces(
    path: Union[str, Path], think_only: bool = True
) -> Dict[str, ReasoningTrace]:
    """Read a trace JSONL file into an id -> trace mapping."""
    result: Dict[str, ReasoningTrace] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(_nonblank(handle), 1):
            try:
                record = json.loads(line)
                result[str(record["id"])] = ReasoningTrace.from_record(
                    record, think_only
                )
            except (ValueError, KeyError, TypeError) as exc:
                log.warning(
                    "Skipping bad trace record #%d in '%s': %s", lineno, path, exc
                )
    return result


def _nonblank(lines: Iterable[str]) -> Iterable[str]:
    return (i for i in lines if i.strip())

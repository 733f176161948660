""" Annotation store.

    One SampleAnnotation per JSONL line. Ground-truth masks are given
    inline as RLE text ("mask_rle") or as a path to a file holding the RLE
    text ("mask_path", relative to the annotation file).
"""

import json
import logging

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from segbudget import error
from segbudget.reward.engine import (
    BudgetPolicy,
    DifficultyLevel,
    DifficultyScore,
    level_of,
)
from segbudget.seg.mask import Mask
from segbudget.util import pymagic


log = logging.getLogger(__name__)

TEXT_FIELDS = ("short_chain", "long_chain", "visual_description", "textual_description")


@dataclass(frozen=True)
class SampleAnnotation:
    """Everything the benchmark knows about one sample."""

    sample_id: str
    expression: str
    image: str = ""
    mask_rle: Optional[str] = None
    mask_path: Optional[str] = None
    difficulty: Optional[DifficultyScore] = None
    level: Optional[DifficultyLevel] = None
    short_chain: str = ""
    long_chain: str = ""
    visual_description: str = ""
    textual_description: str = ""
    base_dir: Optional[Path] = None

    def gt_mask(self) -> Optional[Mask]:
        """Decode the ground-truth mask, if one is referenced."""
        if self.mask_rle:
            return Mask.from_rle(self.mask_rle)
        if self.mask_path:
            path = Path(self.mask_path)
            if not path.is_absolute() and self.base_dir is not None:
                path = self.base_dir / path
            return Mask.from_rle(path.read_text(encoding="utf-8"))
        return None

    def with_difficulty(
        self, score: DifficultyScore, policy: BudgetPolicy
    ) -> "SampleAnnotation":
        """Attach a difficulty score and the level it implies."""
        return replace(self, difficulty=score, level=level_of(score.composite, policy))

    def check_level(self, policy: BudgetPolicy):
        """Make sure the stored level matches the stored score."""
        if self.difficulty is not None and self.level is not None:
            expected = level_of(self.difficulty.composite, policy)
            if expected is not self.level:
                raise error.ValidationError(
                    f"Sample {self.sample_id}: level {self.level.value} does not match"
                    f" difficulty {self.difficulty.composite:.2f} ({expected.value})"
                )

    def leveled(self, policy: BudgetPolicy) -> "SampleAnnotation":
        """The annotation with its level derived from the difficulty score.

        A stored level must agree with the score under ``policy``; a sample
        without a score keeps the level it was given.
        """
        self.check_level(policy)
        if self.level is None and self.difficulty is not None:
            return replace(self, level=level_of(self.difficulty.composite, policy))
        return self

    @classmethod
    def from_dict(
        cls, data: Dict[str, Any], base_dir: Optional[Path] = None
    ) -> "SampleAnnotation":
        """Build from a JSONL record."""
        try:
            difficulty = data.get("difficulty")
            level = data.get("level")
            return cls(
                sample_id=str(data["sample_id"]),
                expression=str(data.get("expression", "")),
                image=str(data.get("image", "")),
                mask_rle=data.get("mask_rle"),
                mask_path=data.get("mask_path"),
                difficulty=DifficultyScore(**difficulty) if difficulty else None,
                level=DifficultyLevel.parse(level) if level else None,
                short_chain=str(data.get("short_chain") or ""),
                long_chain=str(data.get("long_chain") or ""),
                visual_description=str(data.get("visual_description") or ""),
                textual_description=str(data.get("textual_description") or ""),
                base_dir=base_dir,
            )
        except (KeyError, TypeError) as exc:
            raise error.ValidationError(f"Malformed annotation record ({exc})") from exc

    def as_dict(self) -> Dict[str, Any]:
        """JSONL record, leaving out empty fields."""
        result: Dict[str, Any] = {
            "sample_id": self.sample_id,
            "image": self.image,
            "expression": self.expression,
        }
        if self.mask_rle:
            result["mask_rle"] = self.mask_rle
        if self.mask_path:
            result["mask_path"] = self.mask_path
        if self.difficulty is not None:
            result["difficulty"] = self.difficulty.as_dict()
            result["difficulty_score"] = self.difficulty.composite
        if self.level is not None:
            result["level"] = self.level.value
        for name in TEXT_FIELDS:
            if getattr(self, name):
                result[name] = getattr(self, name)
        return result


def load_annotations(
    path: Union[str, Path]
) -> Tuple[List[SampleAnnotation], List[str]]:
    """Read an annotation file; returns the samples and the problems of
    skipped lines."""
    path = Path(path)
    samples: List[SampleAnnotation] = []
    problems: List[str] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                sample = SampleAnnotation.from_dict(json.loads(line), path.parent)
            except (ValueError, error.LoggableError) as exc:
                problems.append(f"{path.name}:{lineno}: {exc}")
                log.warning("Skipping annotation %s:%d: %s", path.name, lineno, exc)
            else:
                samples.append(sample)
    return samples, problems


def dump_annotations(samples: Iterable[SampleAnnotation]) -> str:
    """Serialize annotations to JSONL text."""
    return "".join(
        json.dumps(i.as_dict(), cls=pymagic.JSONEncoder, ensure_ascii=False) + "\n"
        for i in samples
    )

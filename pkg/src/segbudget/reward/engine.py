""" Length-aware reward.

    The original reward adds a reasoning-format, a segmentation-format and
    three binary accuracy terms. A token budget derived from the sample's
    difficulty (and, for hard samples, the model's uncertainty) turns that
    into a soft penalty: every token over budget costs ``beta`` of the
    reward multiplier, medium samples are left unconstrained.

    The budget scheme is configurable for ablations: levels can come from
    the difficulty, from the uncertainty, or from both (the default);
    medium samples can be merged into hard ones or get a cap of their own.
"""

import enum
import logging

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

from segbudget import error
from segbudget.reward.answer import (
    ParsedOutput,
    SegReference,
    parse_output,
    think_token_count,
)
from segbudget.seg.mask import Mask
from segbudget.seg.metrics import bbox_l1, iou, point_l1


log = logging.getLogger(__name__)

SCORE_MIN, SCORE_MAX = 1.0, 10.0
LEVELING_MODES = ("both", "difficulty", "uncertainty")


class DifficultyLevel(enum.Enum):
    """Difficulty strata, in reporting order."""

    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"

    @property
    def label(self) -> str:
        """Capitalized name for tables."""
        return self.value.capitalize()

    @classmethod
    def parse(cls, value) -> "DifficultyLevel":
        """Accept enum members and their names in any case."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise error.ValidationError(f"Unknown difficulty level {value!r}") from exc


def _check_score(name: str, value: float):
    if not SCORE_MIN <= value <= SCORE_MAX:
        raise error.ValidationError(
            f"{name} score {value!r} outside [{SCORE_MIN:g}, {SCORE_MAX:g}]"
        )


@dataclass(frozen=True)
class DifficultyScore:
    """Judge ratings of the three difficulty aspects."""

    scene: float
    segmentation: float
    language: float

    def __post_init__(self):
        for name in ("scene", "segmentation", "language"):
            _check_score(name, getattr(self, name))

    @property
    def composite(self) -> float:
        """D, the mean of the three aspects."""
        return (self.scene + self.segmentation + self.language) / 3

    def as_dict(self) -> Dict[str, float]:
        """Serializable form."""
        return asdict(self)


@dataclass(frozen=True)
class BudgetPolicy:
    """Difficulty thresholds and soft length penalty constants.

    ``leveling`` picks the signal that assigns budget levels: ``both``
    levels by difficulty and adds ``alpha * U`` to hard budgets,
    ``difficulty`` drops the uncertainty term, and ``uncertainty`` levels
    by U alone, splitting at ``u_low`` and ``u_high``. With ``splits=2``
    medium samples get the hard budget. ``l_medium`` caps medium samples.
    """

    tau1: float = 5.0
    tau2: float = 3.5
    l_base: float = 256
    alpha: float = 25
    l_low: float = 96
    beta: float = 0.002
    clamp_floor: Optional[float] = None
    l_medium: Optional[float] = None
    leveling: str = "both"
    splits: int = 3
    u_low: float = 0.32
    u_high: float = 0.45

    def __post_init__(self):
        if self.tau2 > self.tau1:
            raise error.ConfigurationError(
                f"tau2={self.tau2} must not exceed tau1={self.tau1}"
            )
        if self.l_low > self.l_base:
            raise error.ConfigurationError(
                f"l_low={self.l_low} must not exceed l_base={self.l_base}"
            )
        if self.alpha < 0:
            raise error.ConfigurationError(f"alpha={self.alpha} must be >= 0")
        # beta == 0 switches the penalty off (the unpenalized baseline)
        if self.beta < 0:
            raise error.ConfigurationError(f"beta={self.beta} must be >= 0")
        # s must never exceed 1
        if self.clamp_floor is not None and self.clamp_floor > 1:
            raise error.ConfigurationError(
                f"clamp_floor={self.clamp_floor} must not exceed 1"
            )
        if self.l_medium is not None and self.l_medium < 0:
            raise error.ConfigurationError(f"l_medium={self.l_medium} must be >= 0")
        if self.leveling not in LEVELING_MODES:
            raise error.ConfigurationError(
                f"leveling={self.leveling!r} is not one of {', '.join(LEVELING_MODES)}"
            )
        if self.splits not in (2, 3):
            raise error.ConfigurationError(f"splits={self.splits} must be 2 or 3")
        if not 0.0 <= self.u_low <= self.u_high <= 1.0:
            raise error.ConfigurationError(
                f"Need 0 <= u_low={self.u_low} <= u_high={self.u_high} <= 1"
            )


@dataclass(frozen=True)
class RewardWeights:
    """Accuracy thresholds of the segmentation reward."""

    iou_threshold: float = 0.5
    bbox_l1_threshold: float = 10
    point_l1_threshold: float = 100
    thinking: bool = True

    def __post_init__(self):
        for name in ("iou_threshold", "bbox_l1_threshold", "point_l1_threshold"):
            if getattr(self, name) <= 0:
                raise error.ConfigurationError(f"{name} must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    """All terms of a final reward."""

    format_reason: int
    format_seg: int
    acc_iou: int
    acc_bbox: int
    acc_point: int
    r_original: float
    budget: Optional[float]
    s: float
    r_final: float
    level: Optional[DifficultyLevel] = None
    tokens: Optional[int] = None

    def as_dict(self) -> Dict:
        """Serializable form."""
        result = asdict(self)
        result["level"] = self.level.value if self.level else None
        return result


def _check_difficulty(D: float):
    if not SCORE_MIN <= D <= SCORE_MAX:
        raise error.ValidationError(f"Difficulty {D!r} outside [1, 10]")


def level_of(D: float, policy: BudgetPolicy) -> DifficultyLevel:
    """Hard iff D >= tau1, Easy iff D < tau2, Medium otherwise."""
    _check_difficulty(D)
    if D >= policy.tau1:
        return DifficultyLevel.HARD
    if D < policy.tau2:
        return DifficultyLevel.EASY
    return DifficultyLevel.MEDIUM


def _check_uncertainty(U: float):
    if not 0.0 <= U <= 1.0:
        raise error.ValidationError(f"Uncertainty {U!r} outside [0, 1]")


def budget_level(D: float, U: float, policy: BudgetPolicy) -> DifficultyLevel:
    """The level that decides a sample's budget under the policy's scheme."""
    _check_difficulty(D)
    _check_uncertainty(U)
    if policy.leveling == "uncertainty":
        if U >= policy.u_high:
            level = DifficultyLevel.HARD
        elif U < policy.u_low:
            level = DifficultyLevel.EASY
        else:
            level = DifficultyLevel.MEDIUM
    else:
        level = level_of(D, policy)
    if policy.splits == 2 and level is DifficultyLevel.MEDIUM:
        return DifficultyLevel.HARD
    return level


def token_budget(D: float, U: float, policy: BudgetPolicy) -> Optional[float]:
    """Expected reasoning length for a sample; None means unconstrained."""
    level = budget_level(D, U, policy)
    if level is DifficultyLevel.HARD:
        if policy.leveling == "both":
            return policy.l_base + policy.alpha * U
        return float(policy.l_base)
    if level is DifficultyLevel.EASY:
        return float(policy.l_low)
    return None if policy.l_medium is None else float(policy.l_medium)


def soft_penalty(L_used: float, budget: Optional[float], policy: BudgetPolicy) -> float:
    """Reward multiplier s, linear decay past the budget."""
    if L_used < 0:
        raise error.ValidationError(f"Token count {L_used!r} must be >= 0")
    if budget is None or L_used <= budget:
        return 1.0
    s = 1.0 - policy.beta * (L_used - budget)
    if policy.clamp_floor is not None:
        s = max(s, policy.clamp_floor)
    return s


def accuracy_reward(
    pred: SegReference,
    pred_mask: Mask,
    gt: SegReference,
    gt_mask: Mask,
    weights: RewardWeights,
) -> Tuple[int, int, int]:
    """Binary IoU, box L1 and point L1 rewards; thresholds are inclusive."""
    value, _ = iou(pred_mask, gt_mask)
    acc_iou = int(value >= weights.iou_threshold)
    acc_bbox = int(bbox_l1(pred.bbox, gt.bbox) <= weights.bbox_l1_threshold)
    point_distance = (
        point_l1(pred.point1, gt.point1) + point_l1(pred.point2, gt.point2)
    ) / 2
    acc_point = int(point_distance <= weights.point_l1_threshold)
    return acc_iou, acc_bbox, acc_point


def final_reward(
    output: ParsedOutput,
    pred_mask: Optional[Mask],
    gt: SegReference,
    gt_mask: Mask,
    L_used: int,
    D: Optional[float],
    U: float,
    policy: BudgetPolicy,
    weights: RewardWeights,
) -> RewardBreakdown:
    """Assemble the original reward, the budget, the penalty and the product.

    Without a difficulty score there is no budget, which reproduces the
    unpenalized reward. Accuracy terms are zero when the answer did not parse.
    """
    if output.answer is not None and pred_mask is not None:
        acc = accuracy_reward(output.answer, pred_mask, gt, gt_mask, weights)
    else:
        acc = (0, 0, 0)
    format_reason = output.format_reason if weights.thinking else 0
    r_original = float(format_reason + output.format_seg + sum(acc))

    level, budget = None, None
    if D is not None:
        level = budget_level(D, U, policy)
        budget = token_budget(D, U, policy)
    s = soft_penalty(L_used, budget, policy)
    breakdown = RewardBreakdown(
        format_reason=format_reason,
        format_seg=output.format_seg,
        acc_iou=acc[0],
        acc_bbox=acc[1],
        acc_point=acc[2],
        r_original=r_original,
        budget=budget,
        s=s,
        r_final=r_original * s,
        level=level,
        tokens=L_used,
    )
    log.debug("Reward %r", breakdown)
    return breakdown


def score_output(
    text: str,
    pred_mask: Optional[Mask],
    gt: SegReference,
    gt_mask: Mask,
    L_used: Optional[int],
    D: Optional[float],
    U: float,
    policy: BudgetPolicy,
    weights: RewardWeights,
) -> RewardBreakdown:
    """Parse a raw output and reward it; missing token counts fall back
    to whitespace tokens of the reasoning."""
    parsed = parse_output(text, thinking=weights.thinking)
    if L_used is None:
        L_used = think_token_count(parsed.think)
    return final_reward(parsed, pred_mask, gt, gt_mask, L_used, D, U, policy, weights)

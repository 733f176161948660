""" Evaluation protocol.

    Per difficulty level and over all samples: mean token count, reasoning
    score, gIoU and cIoU, plus the efficiency scores that divide accuracy
    by model size and by the square root of the reasoning length.
"""

import logging
import math

from dataclasses import asdict, dataclass, field
from multiprocessing.pool import ThreadPool
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from segbudget import error
from segbudget.annotate.scoring import RScoreBreakdown, reference_mode, score_reasoning
from segbudget.annotate.store import SampleAnnotation
from segbudget.evaluate.records import (
    TOKENS_MIXED,
    TOKENS_PRODUCER,
    TOKENS_WHITESPACE,
    PredictionRecord,
)
from segbudget.io.judge import JudgeClient
from segbudget.reward.confidence import uncertainty
from segbudget.reward.engine import BudgetPolicy, DifficultyLevel
from segbudget.seg.mask import IoUStats, Mask
from segbudget.seg.metrics import cumulative_iou, iou_stats, mean_iou


log = logging.getLogger(__name__)

ALL = "All"


@dataclass(frozen=True)
class ModelProfile:
    """Size of the evaluated model and the weight of accuracy in URSS."""

    params: float = 7.0
    gamma: float = 0.7

    def __post_init__(self):
        if not self.params > 0:
            raise error.ValidationError(
                f"Model size must be positive, got {self.params!r}"
            )
        _check_gamma(self.gamma)


def _check_gamma(gamma: float):
    if not 0.0 <= gamma <= 1.0:
        raise error.ValidationError(f"gamma={gamma!r} outside [0, 1]")


def _efficiency_denominator(params: float, tokens: float) -> float:
    if not params > 0:
        raise error.ValidationError(f"Model size must be positive, got {params!r}")
    if tokens < 0:
        raise error.ValidationError(f"Token count must not be negative, got {tokens!r}")
    return params * math.sqrt(tokens + 1)


def sat(giou_fraction: float, params: float, tokens: float) -> float:
    """Segmentation accuracy per token (gIoU in percent)."""
    return 100.0 * giou_fraction / _efficiency_denominator(params, tokens)


def rst(rscore: float, params: float, tokens: float) -> float:
    """Reasoning score per token (RScore on a 100 scale)."""
    return 10.0 * rscore / _efficiency_denominator(params, tokens)


def urss(rst_value: float, sat_value: float, gamma: float) -> float:
    """Blend of RST and SAT; gamma weighs segmentation accuracy."""
    _check_gamma(gamma)
    return (1.0 - gamma) * rst_value + gamma * sat_value


@dataclass(frozen=True)
class ScoredSample:
    """Everything a report needs about one evaluated prediction."""

    sample_id: str
    level: DifficultyLevel
    tokens: int
    rscore: float
    stats: IoUStats
    uncertainty: Optional[float] = None


@dataclass(frozen=True)
class StratumRow:
    """One line of the report."""

    name: str
    n: int
    tokens: float
    rscore: float
    rst: float
    giou: float
    ciou: float
    sat: float
    urss: float
    uncertainty: Optional[float] = None

    def as_dict(self) -> Dict[str, Any]:
        """Serializable form."""
        return asdict(self)

    @classmethod
    def from_samples(
        cls, name: str, samples: Sequence[ScoredSample], profile: ModelProfile
    ) -> "StratumRow":
        """Aggregate a non-empty group of samples."""
        n = len(samples)
        tokens = math.fsum(i.tokens for i in samples) / n
        rscore = math.fsum(i.rscore for i in samples) / n
        stats = [i.stats for i in samples]
        giou, ciou = mean_iou(stats), cumulative_iou(stats)
        rst_value = rst(rscore, profile.params, tokens)
        sat_value = sat(giou, profile.params, tokens)
        known = [i.uncertainty for i in samples if i.uncertainty is not None]
        return cls(
            name=name,
            n=n,
            tokens=tokens,
            rscore=rscore,
            rst=rst_value,
            giou=giou,
            ciou=ciou,
            sat=sat_value,
            urss=urss(rst_value, sat_value, profile.gamma),
            uncertainty=math.fsum(known) / len(known) if known else None,
        )


@dataclass(frozen=True)
class EvalReport:
    """Rows for the non-empty levels (in level order), then the All row."""

    rows: Tuple[StratumRow, ...]
    profile: ModelProfile = field(default_factory=ModelProfile)
    token_mode: str = TOKENS_PRODUCER
    skipped: int = 0

    def row(self, name: str) -> Optional[StratumRow]:
        """Look up a row by name; None for an absent stratum."""
        for row in self.rows:
            if row.name == name:
                return row
        return None

    def as_dict(self) -> Dict[str, Any]:
        """Serializable form."""
        return {
            "params": self.profile.params,
            "gamma": self.profile.gamma,
            "token_mode": self.token_mode,
            "skipped": self.skipped,
            "rows": [i.as_dict() for i in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalReport":
        """Rebuild a report from its JSON form."""
        try:
            return cls(
                rows=tuple(StratumRow(**i) for i in data["rows"]),
                profile=ModelProfile(float(data["params"]), float(data["gamma"])),
                token_mode=str(data.get("token_mode", TOKENS_PRODUCER)),
                skipped=int(data.get("skipped", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise error.ValidationError(f"Not an evaluation report ({exc})") from exc


def build_report(
    samples: Sequence[ScoredSample],
    profile: ModelProfile,
    token_mode: str = TOKENS_PRODUCER,
    skipped: int = 0,
) -> EvalReport:
    """Aggregate scored samples into per-level rows plus the All row."""
    if not samples:
        raise error.DataError("No prediction could be evaluated")
    samples = sorted(samples, key=lambda i: i.sample_id)
    rows = []
    for level in DifficultyLevel:
        subset = [i for i in samples if i.level is level]
        if subset:
            rows.append(StratumRow.from_samples(level.label, subset, profile))
    rows.append(StratumRow.from_samples(ALL, samples, profile))
    return EvalReport(tuple(rows), profile, token_mode, skipped)


def offline_rscores(
    scores: Mapping[str, Tuple[float, float, float]],
    annotations: Mapping[str, SampleAnnotation],
    policy: Optional[BudgetPolicy] = None,
) -> Dict[str, RScoreBreakdown]:
    """Turn precomputed ratings into breakdowns labelled with the reference mode."""
    policy = policy or BudgetPolicy()
    result = {}
    for sample_id, (completeness, grounding, fluency) in scores.items():
        mode = ""
        sample = annotations.get(sample_id)
        if sample is not None:
            try:
                level = sample.leveled(policy).level
            except error.ValidationError:
                level = None
            mode = reference_mode(level) if level else ""
        result[sample_id] = RScoreBreakdown(completeness, grounding, fluency, mode)
    return result


def judge_rscores(
    predictions: Sequence[PredictionRecord],
    annotations: Mapping[str, SampleAnnotation],
    judge: JudgeClient,
    jobs: int = 1,
    reprompt: bool = False,
    policy: Optional[BudgetPolicy] = None,
) -> Tuple[Dict[str, RScoreBreakdown], List[str]]:
    """Rate every annotated prediction's reasoning with the judge.

    The reference chain follows the level derived from each sample's
    difficulty under ``policy``.
    """
    policy = policy or BudgetPolicy()

    def work(record: PredictionRecord):
        try:
            sample = annotations[record.sample_id].leveled(policy)
            breakdown = score_reasoning(record.reasoning, sample, judge, reprompt)
            return record.sample_id, breakdown, None
        except (error.JudgeError, error.ParseError, error.ValidationError) as exc:
            return record.sample_id, None, f"{record.sample_id}: {exc}"

    todo = [i for i in predictions if i.sample_id in annotations]
    result: Dict[str, RScoreBreakdown] = {}
    problems: List[str] = []
    with ThreadPool(max(1, jobs)) as pool:
        for sample_id, breakdown, problem in pool.imap(work, todo):
            if problem:
                log.warning("No reasoning score for %s", problem)
                problems.append(problem)
            else:
                result[sample_id] = breakdown
    return result, problems


def score_prediction(
    record: PredictionRecord,
    sample: SampleAnnotation,
    rscore: RScoreBreakdown,
    policy: Optional[BudgetPolicy] = None,
) -> ScoredSample:
    """Compute the per-sample inputs of the report."""
    sample = sample.leveled(policy or BudgetPolicy())
    if sample.level is None:
        raise error.ValidationError("annotation has no difficulty level")
    gt = sample.gt_mask()
    if gt is None:
        raise error.ValidationError("annotation has no ground-truth mask")
    # a prediction without a mask segments nothing
    pred = record.mask if record.mask is not None else Mask.empty(gt.width, gt.height)
    return ScoredSample(
        sample_id=record.sample_id,
        level=sample.level,
        tokens=record.tokens,
        rscore=rscore.rscore,
        stats=iou_stats(pred, gt),
        uncertainty=uncertainty(record.trace) if record.trace is not None else None,
    )


def token_mode(records: Sequence[PredictionRecord]) -> str:
    """Summarize where the token counts of a batch came from."""
    modes = {i.token_mode for i in records}
    if modes == {TOKENS_WHITESPACE}:
        return TOKENS_WHITESPACE
    if modes == {TOKENS_PRODUCER} or not modes:
        return TOKENS_PRODUCER
    return TOKENS_MIXED


def evaluate(
    predictions: Sequence[PredictionRecord],
    annotations: Mapping[str, SampleAnnotation],
    profile: ModelProfile,
    rscores: Mapping[str, RScoreBreakdown],
    skipped: int = 0,
    policy: Optional[BudgetPolicy] = None,
) -> Tuple[EvalReport, List[str]]:
    """Score all predictions and aggregate them into a report.

    Each sample's stratum is the level its difficulty score implies under
    ``policy``; a stored level that disagrees makes the sample a problem.
    Predictions that cannot be scored are left out and listed in the
    returned problems; ``skipped`` counts records already dropped while
    loading. The result does not depend on input order.
    """
    policy = policy or BudgetPolicy()
    samples: List[ScoredSample] = []
    used: List[PredictionRecord] = []
    problems: List[str] = []
    for record in sorted(predictions, key=lambda i: i.sample_id):
        sample = annotations.get(record.sample_id)
        if sample is None:
            problems.append(f"{record.sample_id}: no annotation")
            continue
        rscore = rscores.get(record.sample_id)
        if rscore is None:
            problems.append(f"{record.sample_id}: no reasoning score")
            continue
        try:
            samples.append(score_prediction(record, sample, rscore, policy))
        except (error.ValidationError, error.ParseError, OSError) as exc:
            problems.append(f"{record.sample_id}: {exc}")
            continue
        used.append(record)
    for problem in problems:
        log.warning("Not evaluated: %s", problem)
    if not samples:
        raise error.DataError("No prediction could be evaluated", problems)
    report = build_report(samples, profile, token_mode(used), skipped + len(problems))
    return report, problems

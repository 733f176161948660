""" Judge score parsing, difficulty scoring and reasoning scores.
"""

import ast
import json
import logging
import re

from dataclasses import asdict, dataclass, replace
from multiprocessing.pool import ThreadPool
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

from segbudget import error
from segbudget.annotate import prompts
from segbudget.annotate.store import SampleAnnotation
from segbudget.io.judge import JudgeClient, JudgeResponse
from segbudget.reward.engine import (
    SCORE_MAX,
    SCORE_MIN,
    BudgetPolicy,
    DifficultyLevel,
    DifficultyScore,
    level_of,
)


log = logging.getLogger(__name__)

DIFFICULTY_KEYS = ("scene", "segmentation", "language")
REASONING_KEYS = ("completeness", "grounding", "fluency")
REPROMPT_SUFFIX = "\n\nRespond with only the dictionary."

# Flat {...} objects; scores never nest
OBJECT_RE = re.compile(r"\{[^{}]*\}")
FENCE_RE = re.compile(r"```[a-zA-Z]*")


@dataclass(frozen=True)
class RScoreBreakdown:
    """Judge ratings of one predicted reasoning chain."""

    completeness: float
    grounding: float
    fluency: float
    reference_mode: str

    @property
    def rscore(self) -> float:
        """Mean of the three aspects."""
        return (self.completeness + self.grounding + self.fluency) / 3

    def as_dict(self) -> Dict:
        """Serializable form, including the mean."""
        result = asdict(self)
        result["rscore"] = self.rscore
        return result


def _load_object(text: str):
    try:
        return json.loads(text)
    except ValueError:
        pass
    # the judge is asked for a Python dict, so single quotes are fine
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        return None


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def parse_score_dict(raw: str, expected_keys: Sequence[str]) -> Dict[str, float]:
    """Extract the first object holding all expected keys with scores in [1, 10].

    Prose and code fences around the object are ignored. Raises ParseError
    (with the raw text attached) when no such object exists.
    """
    problem = "no key-value object found"
    for candidate in OBJECT_RE.findall(FENCE_RE.sub(" ", raw or "")):
        data = _load_object(candidate)
        if not isinstance(data, dict):
            continue
        missing = [key for key in expected_keys if key not in data]
        if missing:
            problem = f"missing keys {', '.join(missing)}"
            continue
        values = {key: data[key] for key in expected_keys}
        bad = {key: val for key, val in values.items() if not _is_number(val)}
        if bad:
            problem = f"non-numeric scores {bad!r}"
            continue
        bad = {
            key: val
            for key, val in values.items()
            if not SCORE_MIN <= val <= SCORE_MAX
        }
        if bad:
            problem = f"scores out of range {bad!r}"
            continue
        return {key: float(val) for key, val in values.items()}
    raise error.ParseError(f"Unparseable judge scores ({problem})", raw)


def _ask_scores(
    judge: JudgeClient,
    sample_id: str,
    task: str,
    prompt: str,
    keys: Sequence[str],
    reprompt: bool = False,
) -> JudgeResponse:
    response = judge.ask(sample_id, task, prompt)
    try:
        scores = parse_score_dict(response.raw, keys)
    except error.ParseError as exc:
        if not reprompt:
            raise error.ParseError(f"{exc} [sample {sample_id}]", exc.raw) from exc
        log.info("Re-prompting judge for %s (%s): %s", sample_id, task, exc)
        response = judge.ask(sample_id, task, prompt + REPROMPT_SUFFIX)
        try:
            scores = parse_score_dict(response.raw, keys)
        except error.ParseError as exc2:
            raise error.ParseError(f"{exc2} [sample {sample_id}]", exc2.raw) from exc2
    return replace(response, scores=scores)


def score_difficulty(
    sample: SampleAnnotation,
    judge: JudgeClient,
    policy: BudgetPolicy,
    reprompt: bool = False,
) -> Tuple[DifficultyScore, DifficultyLevel]:
    """Rate a sample's difficulty and map it to a level."""
    prompt = prompts.build_difficulty_prompt(sample)
    response = _ask_scores(
        judge, sample.sample_id, "difficulty", prompt, DIFFICULTY_KEYS, reprompt
    )
    score = DifficultyScore(**response.scores)
    level = level_of(score.composite, policy)
    log.debug(
        "Difficulty of %s: %.2f (%s)", sample.sample_id, score.composite, level.value
    )
    return score, level


def reference_mode(level: DifficultyLevel) -> str:
    """Which reference chain rates predictions at a level."""
    return "long" if level is DifficultyLevel.HARD else "short"


def reference_chain(sample: SampleAnnotation) -> Tuple[str, str]:
    """The (mode, text) of the reference chain for a sample."""
    if sample.level is None:
        raise error.ValidationError(
            f"Sample {sample.sample_id} has no difficulty level"
        )
    mode = reference_mode(sample.level)
    text = sample.long_chain if mode == "long" else sample.short_chain
    if not text.strip():
        raise error.ValidationError(
            f"Sample {sample.sample_id} ({sample.level.value})"
            f" lacks the {mode} reference chain"
        )
    return mode, text


def score_reasoning(
    predicted: str,
    sample: SampleAnnotation,
    judge: JudgeClient,
    reprompt: bool = False,
) -> RScoreBreakdown:
    """Rate a predicted reasoning chain against the level's reference chain."""
    mode, reference = reference_chain(sample)
    prompt = prompts.build_reasoning_prompt(sample.expression, reference, predicted)
    response = _ask_scores(
        judge, sample.sample_id, "rscore", prompt, REASONING_KEYS, reprompt
    )
    return RScoreBreakdown(reference_mode=mode, **response.scores)


def generate_chains(sample: SampleAnnotation, judge: JudgeClient) -> Tuple[str, str]:
    """Ask the judge for the short and the long reference chain."""
    short_prompt, long_prompt = prompts.build_chain_prompts(sample)
    chains = []
    for task, prompt in (("short_chain", short_prompt), ("long_chain", long_prompt)):
        text = judge.ask(sample.sample_id, task, prompt).raw.strip()
        if not text:
            raise error.JudgeError(f"Empty {task.replace('_', ' ')}", sample.sample_id)
        chains.append(text)
    return chains[0], chains[1]


def annotate_sample(
    sample: SampleAnnotation,
    judge: JudgeClient,
    policy: BudgetPolicy,
    chains: bool = True,
    reprompt: bool = False,
) -> SampleAnnotation:
    """Score difficulty and (optionally) generate reference chains."""
    score, _ = score_difficulty(sample, judge, policy, reprompt=reprompt)
    result = sample.with_difficulty(score, policy)
    if chains:
        short_chain, long_chain = generate_chains(sample, judge)
        result = replace(result, short_chain=short_chain, long_chain=long_chain)
    return result


def annotate_all(
    samples: Sequence[SampleAnnotation],
    judge: JudgeClient,
    policy: BudgetPolicy,
    chains: bool = True,
    reprompt: bool = False,
    jobs: int = 1,
) -> Tuple[List[SampleAnnotation], List[str]]:
    """Annotate many samples, keeping input order.

    Returns the annotated samples and one problem line per sample that
    failed (those are left out of the result).
    """

    def work(sample: SampleAnnotation):
        try:
            result = annotate_sample(
                sample, judge, policy, chains=chains, reprompt=reprompt
            )
            return result, None
        except (error.JudgeError, error.ParseError, error.ValidationError) as exc:
            return None, f"{sample.sample_id}: {exc}"

    results: List[SampleAnnotation] = []
    problems: List[str] = []
    mapper: Callable = map
    pool = ThreadPool(jobs) if jobs > 1 else None
    if pool is not None:
        mapper = pool.imap
    try:
        for annotated, problem in mapper(work, samples):
            if problem:
                log.warning("Annotation failed for %s", problem)
                problems.append(problem)
            else:
                results.append(annotated)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return results, problems


def level_statistics(
    annotations: Iterable[SampleAnnotation],
) -> Dict[DifficultyLevel, int]:
    """Count annotated samples per level, in level order."""
    counts = {level: 0 for level in DifficultyLevel}
    for sample in annotations:
        if sample.level is not None:
            counts[sample.level] += 1
    return counts

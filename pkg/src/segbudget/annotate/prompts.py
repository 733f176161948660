""" Prompt builders.

    All prompts are Jinja2 templates under ``data/templates``; a file with
    the same name in ``~/.config/segbudget/templates/`` takes precedence.
"""

import logging
import re

from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, Optional, Set, Tuple

import jinja2
import jinja2.meta
import numpy as np

from segbudget import error
from segbudget.annotate.store import SampleAnnotation
from segbudget.reward.answer import SegReference, serialize_answer
from segbudget.seg.mask import BBox, Mask, Point


log = logging.getLogger(__name__)

TEMPLATE_DIR = Path("~/.config/segbudget/templates/").expanduser()
SHORT_THINKING_LIMIT = 64

# Sizes are fractions of the image area, in percent
SMALL_AREA, LARGE_AREA = 5.0, 25.0
ROWS = ("top", "middle", "bottom")
COLUMNS = ("left", "center", "right")

# Example answer shown in the policy prompts
ANSWER_EXAMPLE = SegReference(
    bbox=BBox(10, 100, 200, 210), point1=Point(30, 110), point2=Point(35, 180)
)

env = jinja2.Environment(
    loader=jinja2.ChoiceLoader(
        [
            jinja2.FileSystemLoader([TEMPLATE_DIR]),
            jinja2.PackageLoader("segbudget", "data/templates"),
        ]
    ),
    keep_trailing_newline=True,
    undefined=jinja2.StrictUndefined,
    autoescape=False,
)


def template_fields(name: str) -> Set[str]:
    """Variables a template refers to."""
    source = env.loader.get_source(env, name)[0]
    return jinja2.meta.find_undeclared_variables(env.parse(source))


def render(name: str, **fields) -> str:
    """Render a prompt template, rejecting missing or empty placeholders."""
    missing = sorted(
        key for key in template_fields(name) if not str(fields.get(key) or "").strip()
    )
    if missing:
        raise error.ValidationError(
            f"Prompt {name!r} is missing placeholder inputs: {', '.join(missing)}"
        )
    return env.get_template(name).render(**fields)


@lru_cache(maxsize=None)
def spatial_terms() -> FrozenSet[str]:
    """The word list used by the textual descriptor."""
    text = (Path(__file__).parent.parent / "data" / "spatial_terms.txt").read_text(
        encoding="utf-8"
    )
    return frozenset(
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


def _region(mask: Mask) -> str:
    ys, xs = np.nonzero(mask.bits)
    col = min(int(3 * (xs.mean() + 0.5) / mask.width), 2)
    row = min(int(3 * (ys.mean() + 0.5) / mask.height), 2)
    if row == 1 and col == 1:
        return "center"
    return f"{ROWS[row]}-{COLUMNS[col]}"


def visual_description(mask: Mask) -> str:
    """Summarize size and position of the ground-truth mask."""
    if not mask.area:
        return "The target mask is empty."
    percent = 100.0 * mask.area / (mask.width * mask.height)
    if percent < SMALL_AREA:
        size = "small"
    elif percent < LARGE_AREA:
        size = "medium-sized"
    else:
        size = "large"
    return (
        f"The target is a {size} object covering {percent:.1f}% of the image,"
        f" centered in the {_region(mask)} region."
    )


def textual_description(expression: str) -> str:
    """Summarize length and spatial vocabulary of a referring expression."""
    words = expression.split()
    if not words:
        raise error.ValidationError("Empty referring expression")
    terms = spatial_terms()
    found = [i for i in re.findall(r"[a-z]+", expression.lower()) if i in terms]
    if found:
        noun = "term" if len(found) == 1 else "terms"
        return (
            f"The expression has {len(words)} words and {len(found)}"
            f" spatial {noun}: {', '.join(found)}."
        )
    return f"The expression has {len(words)} words and no spatial terms."


def _descriptors(sample: SampleAnnotation) -> Tuple[str, str]:
    if not sample.expression.strip():
        raise error.ValidationError(
            f"Sample {sample.sample_id} has no referring expression"
        )
    visual = sample.visual_description
    if not visual:
        try:
            mask = sample.gt_mask()
        except OSError as exc:
            raise error.ValidationError(
                f"Sample {sample.sample_id}: cannot read mask ({exc})"
            ) from exc
        if mask is None:
            raise error.ValidationError(
                f"Sample {sample.sample_id} has neither a visual description nor a mask"
            )
        visual = visual_description(mask)
    textual = sample.textual_description or textual_description(sample.expression)
    return visual, textual


def build_difficulty_prompt(sample: SampleAnnotation) -> str:
    """The difficulty scoring prompt for one sample."""
    visual, textual = _descriptors(sample)
    return render(
        "difficulty.txt",
        question=sample.expression,
        visual_description=visual,
        textual_description=textual,
    )


def build_chain_prompts(sample: SampleAnnotation) -> Tuple[str, str]:
    """Prompts for the short and the long reference reasoning chain."""
    visual, textual = _descriptors(sample)
    fields = dict(
        question=sample.expression,
        visual_description=visual,
        textual_description=textual,
    )
    return render("short_chain.txt", **fields), render("long_chain.txt", **fields)


def build_reasoning_prompt(question: str, reference: str, predicted: str) -> str:
    """The reasoning scoring prompt."""
    return render(
        "reasoning_score.txt",
        question=question,
        reference=reference,
        predicted=predicted,
    )


def build_policy_prompt(
    question: str, mode: str = "think", token_limit: Optional[int] = None
) -> str:
    """Prompt of the segmentation model.

    ``mode`` is one of ``think``, ``short`` (thinking with a token limit)
    or ``none`` (answer only).
    """
    answer_example = serialize_answer(ANSWER_EXAMPLE)
    if mode == "think":
        return render(
            "full_thinking.txt", question=question, answer_example=answer_example
        )
    if mode == "short":
        return render(
            "short_thinking.txt",
            question=question,
            answer_example=answer_example,
            token_limit=token_limit or SHORT_THINKING_LIMIT,
        )
    if mode == "none":
        return render(
            "no_thinking.txt", question=question, answer_example=answer_example
        )
    raise error.ValidationError(f"Unknown prompt mode {mode!r}")

""" Toy environment and policy.

    A toy task stands in for one image/expression sample: it has a
    difficulty D, an uncertainty U, a latent answer label, and a probability
    of being answered correctly that saturates with the reasoning length,

        acc(L) = 1 - (1 - a_min) * exp(-L / scale),  scale = scale_per_difficulty * D

    so harder tasks keep gaining from longer reasoning. The policy picks one
    of a few discrete length bins, with one softmax per budget level.
"""

import logging

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from segbudget import error
from segbudget.reward.engine import (
    BudgetPolicy,
    DifficultyLevel,
    budget_level,
    level_of,
)


log = logging.getLogger(__name__)

LEVELS: Tuple[DifficultyLevel, ...] = tuple(DifficultyLevel)

# Size of the label set a toy task's answer is drawn from
N_LABELS = 4


@dataclass(frozen=True)
class ToyConfig:
    """Knobs of the toy environment and trainer."""

    bins: Tuple[int, ...] = (32, 64, 96, 128, 192, 256, 384, 512)
    level_mix: Tuple[float, float, float] = (0.36, 0.53, 0.11)
    a_min: float = 0.3
    scale_per_difficulty: float = 5.0
    skill: float = 1.0
    n_tasks: int = 200
    group_size: int = 8
    batch_size: int = 4
    learning_rate: float = 0.05
    kl_coeff: float = 1e-3
    epsilon: float = 1e-8
    log_window: float = 0.1

    def __post_init__(self):
        if not self.bins or any(i < 0 for i in self.bins):
            raise error.ConfigurationError("Length bins must be non-negative")
        if len(self.level_mix) != len(LEVELS) or any(i < 0 for i in self.level_mix):
            raise error.ConfigurationError("Level mix needs 3 non-negative weights")
        if sum(self.level_mix) <= 0:
            raise error.ConfigurationError("Level mix must not be all zero")
        if not 0.0 <= self.a_min <= 1.0 or not 0.0 < self.skill <= 1.0:
            raise error.ConfigurationError("a_min and skill must be probabilities")
        if self.scale_per_difficulty <= 0:
            raise error.ConfigurationError("scale_per_difficulty must be positive")
        if self.group_size < 2 or self.batch_size < 1 or self.n_tasks < 1:
            raise error.ConfigurationError("Need group_size >= 2 and positive sizes")
        if self.learning_rate <= 0 or self.kl_coeff < 0 or self.epsilon < 0:
            raise error.ConfigurationError("Bad learning rate, KL or epsilon")


@dataclass(frozen=True)
class ToyTask:
    """A synthetic sample."""

    sample_id: str
    difficulty: float
    uncertainty: float
    answer: int
    a_min: float = 0.3
    scale: float = 8.0

    def __post_init__(self):
        if not 0.0 <= self.a_min <= 1.0 or self.scale <= 0:
            raise error.ValidationError(f"Bad accuracy curve for task {self.sample_id}")
        if not 0 <= self.answer < N_LABELS:
            raise error.ValidationError(f"Bad answer label for task {self.sample_id}")

    def accuracy(self, length) -> np.ndarray:
        """Probability of a correct answer at the given length(s)."""
        length = np.asarray(length, dtype=float)
        return 1.0 - (1.0 - self.a_min) * np.exp(-length / self.scale)

    def miss(self, offset: int) -> int:
        """A wrong label, picked by a non-negative offset."""
        return (self.answer + 1 + offset % (N_LABELS - 1)) % N_LABELS

    def level(self, policy: BudgetPolicy) -> DifficultyLevel:
        """Difficulty level under the given thresholds."""
        return level_of(self.difficulty, policy)

    def budget_level(self, policy: BudgetPolicy) -> DifficultyLevel:
        """Level the reward budgets this task by; it picks the policy row."""
        return budget_level(self.difficulty, self.uncertainty, policy)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass(frozen=True)
class ToyPolicy:
    """Per-level categorical distributions over length bins.

    ``reference`` holds the frozen logits the KL term pulls toward.
    """

    logits: np.ndarray
    bins: Tuple[int, ...]
    reference: np.ndarray = field(default=None)  # type: ignore
    skill: float = 1.0

    def __post_init__(self):
        logits = np.array(self.logits, dtype=float, copy=True)
        expected = (len(LEVELS), len(self.bins))
        if logits.shape != expected:
            raise error.ValidationError(
                f"Policy logits need shape {expected}, got {logits.shape}"
            )
        if self.reference is None:
            reference = logits.copy()
        else:
            reference = np.array(self.reference, dtype=float)
        if reference.shape != logits.shape:
            raise error.ValidationError("Reference logits differ in shape")
        logits.setflags(write=False)
        reference.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "bins", tuple(int(i) for i in self.bins))

    @classmethod
    def uniform(cls, bins: Sequence[int], skill: float = 1.0) -> "ToyPolicy":
        """Start with equal probabilities for every bin."""
        return cls(np.zeros((len(LEVELS), len(bins))), tuple(bins), skill=skill)

    def with_logits(self, logits: np.ndarray) -> "ToyPolicy":
        """Same policy with new logits (the reference stays)."""
        return ToyPolicy(logits, self.bins, self.reference, self.skill)

    def log_probs(self) -> np.ndarray:
        """Log-probabilities, one row per level."""
        return log_softmax(self.logits)

    def probs(self) -> np.ndarray:
        """Probabilities, one row per level."""
        return np.exp(self.log_probs())

    def level_probs(self, level: DifficultyLevel) -> np.ndarray:
        """Bin distribution of a level."""
        return self.probs()[LEVELS.index(level)]

    def expected_length(self, level: DifficultyLevel) -> float:
        """Mean reasoning length the level would produce."""
        bins = np.asarray(self.bins, dtype=float)
        return float(np.dot(self.level_probs(level), bins))

    def kl_to_reference(self) -> np.ndarray:
        """KL(policy || reference) per level."""
        log_p = self.log_probs()
        return np.sum(np.exp(log_p) * (log_p - log_softmax(self.reference)), axis=-1)


def make_tasks(
    config: ToyConfig, policy: BudgetPolicy, rng: np.random.Generator
) -> List[ToyTask]:
    """Draw a toy environment with the configured level mix.

    U follows Beta(D, 11 - D), so its mean D / 11 grows with difficulty.
    """
    mix = np.asarray(config.level_mix, dtype=float)
    mix = mix / mix.sum()
    levels = rng.choice(len(LEVELS), size=config.n_tasks, p=mix)
    tasks = []
    for index, level_index in enumerate(levels.tolist()):
        level = LEVELS[level_index]
        low, high = _band(level, policy)
        difficulty = float(rng.uniform(low, high))
        if level is not DifficultyLevel.HARD:
            # uniform() may return the upper bound only in theory
            difficulty = min(difficulty, np.nextafter(high, low))
        uncertainty = float(rng.beta(difficulty, 11.0 - difficulty))
        tasks.append(
            ToyTask(
                sample_id=f"toy-{index:05d}",
                difficulty=difficulty,
                uncertainty=uncertainty,
                answer=int(rng.integers(0, N_LABELS)),
                a_min=config.a_min,
                scale=config.scale_per_difficulty * difficulty,
            )
        )
    log.debug("Made %d toy tasks", len(tasks))
    return tasks


def _band(level: DifficultyLevel, policy: BudgetPolicy) -> Tuple[float, float]:
    if level is DifficultyLevel.EASY:
        return 1.0, policy.tau2
    if level is DifficultyLevel.MEDIUM:
        return policy.tau2, policy.tau1
    return policy.tau1, 10.0

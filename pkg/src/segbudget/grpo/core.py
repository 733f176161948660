""" Group-relative advantages and the policy-gradient update.

    Each prompt gets a group of rollouts; their rewards are normalized
    within the group, and the policy follows the advantage-weighted
    log-likelihood of what it sampled, minus a KL pull toward its frozen
    reference. There is a single on-policy step per batch and no ratio
    clipping.
"""

import json
import logging

from dataclasses import dataclass, replace
from functools import partial
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from segbudget import error
from segbudget.grpo.toy import (
    LEVELS,
    ToyConfig,
    ToyPolicy,
    ToyTask,
    log_softmax,
    make_tasks,
)
from segbudget.reward.engine import (
    BudgetPolicy,
    DifficultyLevel,
    soft_penalty,
    token_budget,
)
from segbudget.util import pymagic
from segbudget.util.parts import Bunch


log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-8

# The toy always satisfies both format terms; a correct answer adds all
# three accuracy terms
TOY_FORMAT_REWARD = 2.0
TOY_ACCURACY_REWARD = 3.0


@dataclass(frozen=True)
class Rollout:
    """One sampled completion."""

    sample_id: str
    level: DifficultyLevel
    bin_index: int
    length: int
    reward: float
    accuracy: float = 0.0
    correct: bool = False
    prediction: Optional[int] = None

    def __post_init__(self):
        if self.length < 0 or not np.isfinite(self.reward):
            raise error.ValidationError(f"Bad rollout for {self.sample_id}: {self!r}")


@dataclass(frozen=True)
class Group:
    """All rollouts sampled for one prompt."""

    rollouts: Sequence[Rollout]

    def __post_init__(self):
        rollouts = tuple(self.rollouts)
        if len(rollouts) < 2:
            raise error.ValidationError("A group needs at least two rollouts")
        if len({i.sample_id for i in rollouts}) != 1:
            raise error.ValidationError("Rollouts of a group must share their sample")
        object.__setattr__(self, "rollouts", rollouts)

    @property
    def sample_id(self) -> str:
        """The shared sample."""
        return self.rollouts[0].sample_id

    @property
    def size(self) -> int:
        """G"""
        return len(self.rollouts)

    def rewards(self) -> List[float]:
        """Rewards in rollout order."""
        return [i.reward for i in self.rollouts]


def group_advantages(
    rewards: Sequence[float], epsilon: float = DEFAULT_EPSILON
) -> List[float]:
    """(r - mean) / (std + epsilon) with the population std.

    A group whose rewards are all equal carries no signal and gets zeros,
    also for ``epsilon=0``.
    """
    if len(rewards) < 2:
        raise error.ValidationError("Group advantages need at least two rewards")
    values = np.asarray(rewards, dtype=float)
    centered = values - values.mean()
    std = float(values.std())
    if std == 0.0:
        return [0.0] * len(values)
    return (centered / (std + epsilon)).tolist()


def _check_groups(groups: Sequence[Group]):
    if not groups:
        raise error.ValidationError("Policy update needs at least one group")


def surrogate_objective(
    policy: ToyPolicy,
    groups: Sequence[Group],
    kl_coeff: float,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Per-group mean of advantage-weighted log-probabilities, summed over
    groups, minus ``kl_coeff`` times the KL to the reference."""
    _check_groups(groups)
    log_p = policy.log_probs()
    total = 0.0
    for group in groups:
        advantages = group_advantages(group.rewards(), epsilon)
        for rollout, advantage in zip(group.rollouts, advantages):
            row = LEVELS.index(rollout.level)
            total += advantage * log_p[row, rollout.bin_index] / group.size
    return total - kl_coeff * float(np.sum(policy.kl_to_reference()))


def surrogate_gradient(
    policy: ToyPolicy,
    groups: Sequence[Group],
    kl_coeff: float,
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """Analytical gradient of ``surrogate_objective`` w.r.t. the logits."""
    _check_groups(groups)
    probs = policy.probs()
    grad = np.zeros_like(probs)
    for group in groups:
        advantages = group_advantages(group.rewards(), epsilon)
        for rollout, advantage in zip(group.rollouts, advantages):
            row = LEVELS.index(rollout.level)
            grad[row] -= advantage * probs[row] / group.size
            grad[row, rollout.bin_index] += advantage / group.size
    if kl_coeff:
        log_ratio = policy.log_probs() - log_softmax(policy.reference)
        kl = np.sum(probs * log_ratio, axis=-1, keepdims=True)
        grad -= kl_coeff * probs * (log_ratio - kl)
    return grad


def policy_update(
    policy: ToyPolicy,
    groups: Sequence[Group],
    kl_coeff: float = 1e-3,
    lr: float = 0.05,
    epsilon: float = DEFAULT_EPSILON,
) -> ToyPolicy:
    """One gradient ascent step on the surrogate."""
    if kl_coeff < 0:
        raise error.ValidationError(f"KL coefficient {kl_coeff!r} must be >= 0")
    if lr <= 0:
        raise error.ValidationError(f"Learning rate {lr!r} must be positive")
    grad = surrogate_gradient(policy, groups, kl_coeff, epsilon)
    return policy.with_logits(policy.logits + lr * grad)


class TrainingLog:
    """Per-step, per-level statistics plus a closing summary."""

    def __init__(
        self, records: Optional[List[Bunch]] = None, summary: Optional[Bunch] = None
    ):
        self.records: List[Bunch] = records or []
        self.summary: Bunch = summary or Bunch()

    def add(self, step: int, level: DifficultyLevel, rollouts: Sequence[Rollout]):
        """Record the rollouts of one level at one step."""
        self.records.append(
            Bunch(
                step=step,
                level=level.value,
                mean_length=float(np.mean([i.length for i in rollouts])),
                mean_reward=float(np.mean([i.reward for i in rollouts])),
                mean_accuracy=float(np.mean([i.accuracy for i in rollouts])),
            )
        )

    def level_records(self, level: DifficultyLevel) -> List[Bunch]:
        """Records of one level, in step order."""
        return [i for i in self.records if i.level == level.value]

    def to_jsonl(self) -> str:
        """One JSON object per line, summary last."""
        dump = partial(json.dumps, sort_keys=True, cls=pymagic.JSONEncoder)
        lines = [dump(i) for i in self.records]
        lines.append(dump({"summary": self.summary}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, lines: Iterable[str]) -> "TrainingLog":
        """Read a log written by ``to_jsonl``."""
        result = cls()
        for line in lines:
            if not line.strip():
                continue
            data = json.loads(line)
            if "summary" in data:
                result.summary = Bunch.deep(data["summary"])
            else:
                result.records.append(Bunch(data))
        return result


def sample_group(
    task: ToyTask,
    policy: ToyPolicy,
    budget_policy: BudgetPolicy,
    group_size: int,
    rng: np.random.Generator,
) -> Group:
    """Sample ``group_size`` rollouts of one task and reward them."""
    level = task.budget_level(budget_policy)
    bins = np.asarray(policy.bins)
    choices = rng.choice(len(bins), size=group_size, p=policy.level_probs(level))
    lengths = bins[choices]
    accuracy = policy.skill * task.accuracy(lengths)
    hits = rng.random(group_size) < accuracy
    budget = token_budget(task.difficulty, task.uncertainty, budget_policy)
    rollouts = []
    for index, length, acc, hit in zip(
        choices.tolist(), lengths.tolist(), accuracy.tolist(), hits.tolist()
    ):
        # a miss names one of the other labels
        prediction = task.answer if hit else task.miss(index)
        correct = prediction == task.answer
        r_original = TOY_FORMAT_REWARD + (TOY_ACCURACY_REWARD if correct else 0.0)
        rollouts.append(
            Rollout(
                sample_id=task.sample_id,
                level=level,
                bin_index=index,
                length=length,
                reward=r_original * soft_penalty(length, budget, budget_policy),
                accuracy=acc,
                correct=correct,
                prediction=prediction,
            )
        )
    return Group(rollouts)


def expected_accuracy(
    policy: ToyPolicy, tasks: Sequence[ToyTask], budget_policy: BudgetPolicy
) -> Optional[float]:
    """Mean accuracy the policy reaches on the tasks, in expectation."""
    if not tasks:
        return None
    bins = np.asarray(policy.bins, dtype=float)
    values = [
        float(
            np.dot(
                policy.level_probs(i.budget_level(budget_policy)),
                policy.skill * i.accuracy(bins),
            )
        )
        for i in tasks
    ]
    return float(np.mean(values))


def simulate_training(
    env: Sequence[ToyTask],
    policy: ToyPolicy,
    budget_policy: BudgetPolicy,
    config: ToyConfig,
    steps: int,
    seed: int,
) -> TrainingLog:
    """Train the toy policy and return its full trajectory.

    Deterministic for a given seed. Run with ``beta=0`` in the budget policy
    for the unpenalized baseline.
    """
    if not env:
        raise error.ValidationError("The toy environment has no tasks")
    if steps < 1:
        raise error.ValidationError(f"Need at least one training step, got {steps}")
    rng = np.random.default_rng(seed)
    trainlog = TrainingLog()
    log.info(
        "Training on %d tasks for %d steps (seed %d, beta %g)",
        len(env),
        steps,
        seed,
        budget_policy.beta,
    )

    for step in range(1, steps + 1):
        picks = rng.integers(0, len(env), size=config.batch_size)
        groups = [
            sample_group(env[i], policy, budget_policy, config.group_size, rng)
            for i in picks.tolist()
        ]
        policy = policy_update(
            policy, groups, config.kl_coeff, config.learning_rate, config.epsilon
        )
        for level in LEVELS:
            rollouts = [r for g in groups for r in g.rollouts if r.level is level]
            if rollouts:
                trainlog.add(step, level, rollouts)
        if step % 500 == 0:
            lengths = {i.value: round(policy.expected_length(i), 1) for i in LEVELS}
            log.debug("Step %d: %s", step, lengths)

    trainlog.summary = summarize(
        trainlog, env, policy, budget_policy, config, steps, seed
    )
    return trainlog


def summarize(
    trainlog: TrainingLog,
    env: Sequence[ToyTask],
    policy: ToyPolicy,
    budget_policy: BudgetPolicy,
    config: ToyConfig,
    steps: int,
    seed: int,
) -> Bunch:
    """Closing statistics of a run, taken from the final policy.

    Tasks are grouped by budget level, the rows the policy keeps.
    """
    first_window_step = steps - max(1, int(steps * config.log_window)) + 1
    levels: Dict[str, Bunch] = {}
    for level in LEVELS:
        tasks = [i for i in env if i.budget_level(budget_policy) is level]
        window = [
            i.mean_length
            for i in trainlog.level_records(level)
            if i.step >= first_window_step
        ]
        levels[level.value] = Bunch(
            n_tasks=len(tasks),
            expected_length=policy.expected_length(level),
            expected_accuracy=expected_accuracy(policy, tasks, budget_policy),
            window_mean_length=float(np.mean(window)) if window else None,
            probs=policy.level_probs(level).tolist(),
        )
    return Bunch(
        steps=steps,
        seed=seed,
        beta=budget_policy.beta,
        scheme=Bunch(
            leveling=budget_policy.leveling,
            splits=budget_policy.splits,
            l_medium=budget_policy.l_medium,
        ),
        bins=list(policy.bins),
        levels=levels,
        expected_accuracy=expected_accuracy(policy, env, budget_policy),
    )


def baseline_policy(budget_policy: BudgetPolicy) -> BudgetPolicy:
    """The same thresholds without a length penalty."""
    return replace(budget_policy, beta=0.0)


def run_toy(
    config: ToyConfig, budget_policy: BudgetPolicy, steps: int, seed: int
) -> TrainingLog:
    """Build the toy environment from ``seed`` and train a uniform policy on it.

    The environment depends on the level thresholds only, so runs that
    differ in ``beta`` alone see the same tasks and the same random stream.
    """
    env = make_tasks(config, budget_policy, np.random.default_rng(seed))
    policy = ToyPolicy.uniform(config.bins, skill=config.skill)
    return simulate_training(env, policy, budget_policy, config, steps, seed)

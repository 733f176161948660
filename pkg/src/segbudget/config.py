""" Configuration.

    Settings are read from ~/.config/segbudget/config.toml, the file named
    in SEGBUDGET_CONF, and SEGBUDGET_* environment variables (use "__" for
    nesting, e.g. SEGBUDGET_JUDGE__URL). See data/config/config.toml for
    every key and its default.
"""


import logging

from pathlib import Path
from typing import Union

from dynaconf import Dynaconf, Validator
from dynaconf.validator import ValidationError as DynaconfValidationError

from segbudget import error


log = logging.getLogger(__name__)

settings = Dynaconf(
    settings_files=[Path("~/.config/segbudget/config.toml").expanduser()],
    envvar="SEGBUDGET_CONF",
    envvar_prefix="SEGBUDGET",
    validators=[
        # Difficulty levels and the soft length penalty
        Validator("BUDGET__TAU1", default=5.0, gte=1, lte=10),
        Validator("BUDGET__TAU2", default=3.5, gte=1, lte=10),
        Validator("BUDGET__L_BASE", default=256, gte=0),
        Validator("BUDGET__ALPHA", default=25, gte=0),
        Validator("BUDGET__L_LOW", default=96, gte=0),
        Validator("BUDGET__BETA", default=0.002, gte=0),
        Validator(
            "BUDGET__CLAMP_FLOOR",
            default=None,
            condition=lambda v: v is None or v == "" or v <= 1,
        ),
        Validator("BUDGET__L_MEDIUM", default=None),
        Validator(
            "BUDGET__LEVELING",
            default="both",
            is_in=["both", "difficulty", "uncertainty"],
        ),
        Validator("BUDGET__SPLITS", default=3, is_in=[2, 3]),
        Validator("BUDGET__U_LOW", default=0.32, gte=0, lte=1),
        Validator("BUDGET__U_HIGH", default=0.45, gte=0, lte=1),
        # Accuracy terms of the segmentation reward
        Validator("REWARD__IOU_THRESHOLD", default=0.5, gt=0),
        Validator("REWARD__BBOX_L1_THRESHOLD", default=10, gt=0),
        Validator("REWARD__POINT_L1_THRESHOLD", default=100, gt=0),
        Validator("REWARD__THINKING", default=True, is_type_of=bool),
        # Evaluated model
        Validator("PROFILE__PARAMS", default=7, gt=0),
        Validator("PROFILE__GAMMA", default=0.7, gte=0, lte=1),
        # Judge service
        Validator("JUDGE__URL", default=""),
        Validator("JUDGE__TOKEN", default=""),
        Validator("JUDGE__MODEL", default="Qwen2.5-72B-Instruct"),
        Validator("JUDGE__TEMPERATURE", default=0.0, gte=0),
        Validator("JUDGE__RESPONSE_PATH", default="choices.0.message.content"),
        Validator("JUDGE__TIMEOUT", default=60, gt=0),
        Validator("JUDGE__ATTEMPTS", default=3, gte=1),
        Validator("JUDGE__BACKOFF", default=0.5, gte=0),
        Validator("JUDGE__MAX_IN_FLIGHT", default=4, gte=1),
        Validator("JUDGE__OFFLINE", default=""),
        # Toy GRPO trainer
        Validator("TOY__BINS", default=[32, 64, 96, 128, 192, 256, 384, 512]),
        Validator("TOY__LEVEL_MIX", default=[0.36, 0.53, 0.11]),
        Validator("TOY__A_MIN", default=0.3, gte=0, lte=1),
        Validator("TOY__SCALE_PER_DIFFICULTY", default=5.0, gt=0),
        Validator("TOY__SKILL", default=1.0, gt=0, lte=1),
        Validator("TOY__N_TASKS", default=200, gte=1),
        Validator("TOY__GROUP_SIZE", default=8, gte=2),
        Validator("TOY__BATCH_SIZE", default=4, gte=1),
        Validator("TOY__LEARNING_RATE", default=0.05, gt=0),
        Validator("TOY__KL_COEFF", default=1e-3, gte=0),
        Validator("TOY__EPSILON", default=1e-8, gte=0),
        Validator("TOY__STEPS", default=2000, gte=1),
        # Evaluation
        Validator("EVAL__THINK_ONLY", default=True, is_type_of=bool),
    ],
)


def load_config_file(path: Union[str, Path]):
    """Merge a settings file given on the command line."""
    path = Path(path).expanduser()
    if not path.exists():
        raise error.UserError(f"Configuration file '{path}' doesn't exist!")
    log.debug("Loading configuration from '%s'", path)
    settings.load_file(path=str(path))
    validate()


def validate():
    """Run the validators, turning failures into ConfigurationError."""
    try:
        settings.validators.validate()
    except DynaconfValidationError as exc:
        raise error.ConfigurationError(str(exc)) from exc


def budget_policy():
    """The active BudgetPolicy."""
    # pylint: disable=import-outside-toplevel
    from segbudget.reward.engine import BudgetPolicy

    section = settings.BUDGET
    floor = section.get("CLAMP_FLOOR")
    medium = section.get("L_MEDIUM")
    return BudgetPolicy(
        tau1=float(section.TAU1),
        tau2=float(section.TAU2),
        l_base=float(section.L_BASE),
        alpha=float(section.ALPHA),
        l_low=float(section.L_LOW),
        beta=float(section.BETA),
        clamp_floor=None if floor in (None, "") else float(floor),
        l_medium=None if medium in (None, "") else float(medium),
        leveling=str(section.LEVELING),
        splits=int(section.SPLITS),
        u_low=float(section.U_LOW),
        u_high=float(section.U_HIGH),
    )


def reward_weights():
    """The active RewardWeights."""
    # pylint: disable=import-outside-toplevel
    from segbudget.reward.engine import RewardWeights

    section = settings.REWARD
    return RewardWeights(
        iou_threshold=float(section.IOU_THRESHOLD),
        bbox_l1_threshold=float(section.BBOX_L1_THRESHOLD),
        point_l1_threshold=float(section.POINT_L1_THRESHOLD),
        thinking=bool(section.THINKING),
    )


def model_profile():
    """The active ModelProfile."""
    # pylint: disable=import-outside-toplevel
    from segbudget.evaluate.protocol import ModelProfile

    return ModelProfile(
        params=float(settings.PROFILE.PARAMS), gamma=float(settings.PROFILE.GAMMA)
    )


def toy_config():
    """The active ToyConfig."""
    # pylint: disable=import-outside-toplevel
    from segbudget.grpo.toy import ToyConfig

    section = settings.TOY
    return ToyConfig(
        bins=tuple(int(i) for i in section.BINS),
        level_mix=tuple(float(i) for i in section.LEVEL_MIX),
        a_min=float(section.A_MIN),
        scale_per_difficulty=float(section.SCALE_PER_DIFFICULTY),
        skill=float(section.SKILL),
        n_tasks=int(section.N_TASKS),
        group_size=int(section.GROUP_SIZE),
        batch_size=int(section.BATCH_SIZE),
        learning_rate=float(section.LEARNING_RATE),
        kl_coeff=float(section.KL_COEFF),
        epsilon=float(section.EPSILON),
    )

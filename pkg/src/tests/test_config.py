# pylint: disable=
""" Configuration tests.
"""
import logging
import unittest

from pathlib import Path

import pytest

from dynaconf import Dynaconf

from segbudget import config, error
from segbudget.evaluate.protocol import ModelProfile
from segbudget.grpo.toy import ToyConfig
from segbudget.reward.engine import BudgetPolicy, RewardWeights


log = logging.getLogger(__name__)

PACKAGED_CONFIG = Path(config.__file__).parent / "data" / "config" / "config.toml"


class ConfigTest(unittest.TestCase):
    def test_factories_match_builtin_defaults(self):
        assert config.budget_policy() == BudgetPolicy()
        assert config.reward_weights() == RewardWeights()
        assert config.model_profile() == ModelProfile(7.0, 0.7)
        assert config.toy_config() == ToyConfig()

    def test_packaged_config_lists_defaults(self):
        packaged = Dynaconf(settings_files=[str(PACKAGED_CONFIG)])
        checked = 0
        for validator in config.settings.validators:
            for name in validator.names:
                if validator.default is None:
                    continue
                section, key = name.split("__")
                value = packaged.get(section)[key]
                assert value == validator.default, name
                checked += 1
        assert checked > 30

    def test_missing_config_file(self):
        with self.assertRaises(error.UserError):
            config.load_config_file("/does/not/exist.toml")


@pytest.mark.parametrize(
    ("kwargs", "message"),
    [
        ({"tau1": 3.0, "tau2": 3.5}, "tau2"),
        ({"l_low": 300}, "l_low"),
        ({"beta": -0.1}, "beta"),
        ({"alpha": -1}, "alpha"),
    ],
)
def test_bad_budget_policy(kwargs, message):
    with pytest.raises(error.ConfigurationError, match=message):
        BudgetPolicy(**kwargs)


def test_zero_beta_is_allowed():
    assert BudgetPolicy(beta=0.0).beta == 0.0


def test_scheme_settings():
    config.settings.set("BUDGET.LEVELING", "uncertainty")
    config.settings.set("BUDGET.SPLITS", 2)
    config.settings.set("BUDGET.L_MEDIUM", 176)
    try:
        policy = config.budget_policy()
    finally:
        config.settings.set("BUDGET.LEVELING", "both")
        config.settings.set("BUDGET.SPLITS", 3)
        config.settings.set("BUDGET.L_MEDIUM", None)
    scheme = (policy.leveling, policy.splits, policy.l_medium)
    assert scheme == ("uncertainty", 2, 176.0)
    assert config.budget_policy() == BudgetPolicy()


@pytest.mark.parametrize(
    ("key", "value", "default"),
    [
        ("BUDGET.CLAMP_FLOOR", 2.0, None),
        ("BUDGET.LEVELING", "entropy", "both"),
        ("BUDGET.SPLITS", 4, 3),
        ("BUDGET.U_HIGH", 1.5, 0.45),
    ],
)
def test_bad_budget_setting(key, value, default):
    config.settings.set(key, value)
    try:
        with pytest.raises(error.ConfigurationError):
            config.validate()
    finally:
        config.settings.set(key, default)


def test_validation_failure():
    config.settings.set("PROFILE.GAMMA", 1.5)
    try:
        with pytest.raises(error.ConfigurationError):
            config.validate()
    finally:
        config.settings.set("PROFILE.GAMMA", 0.7)


if __name__ == "__main__":
    unittest.main()

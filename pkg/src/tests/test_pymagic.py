# pylint: disable=
""" Python utilities tests.
"""
import json
import logging
import unittest

import numpy as np

from segbudget.reward.engine import DifficultyLevel, DifficultyScore
from segbudget.util import pymagic


log = logging.getLogger(__name__)
log.debug("module loaded")


class LogTest(unittest.TestCase):
    def test_get_class_logger(self):
        logger = pymagic.get_class_logger(self)
        assert logger.name == "tests.test_pymagic.LogTest"


class JSONEncoderTest(unittest.TestCase):
    def dumps(self, obj):
        return json.dumps(obj, cls=pymagic.JSONEncoder, sort_keys=True)

    def test_enum(self):
        assert self.dumps([DifficultyLevel.HARD]) == '["hard"]'

    def test_as_dict(self):
        score = DifficultyScore(4, 6, 3)
        expected = {"scene": 4, "segmentation": 6, "language": 3}
        assert json.loads(self.dumps(score)) == expected

    def test_numpy(self):
        assert self.dumps([np.float64(0.5), np.int64(3)]) == "[0.5, 3]"
        assert self.dumps(np.array([1, 2])) == "[1, 2]"

    def test_set(self):
        assert self.dumps({"b", "a"}) == '["a", "b"]'

    def test_unknown(self):
        with self.assertRaises(TypeError):
            self.dumps(object())


if __name__ == "__main__":
    unittest.main()

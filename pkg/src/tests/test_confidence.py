# pylint: disable=
""" Token confidence tests.
"""
import json
import logging

import numpy as np
import pytest

from segbudget import error
from segbudget.reward import confidence
from segbudget.reward.confidence import ReasoningTrace, TokenStep


log = logging.getLogger(__name__)


def random_trace(rng, length):
    p1 = rng.random(length)
    # p2 <= min(p1, 1 - p1) keeps both invariants
    p2 = rng.random(length) * np.minimum(p1, 1.0 - p1)
    return ReasoningTrace(tuple(zip(p1.tolist(), p2.tolist())))


@pytest.mark.parametrize(
    ("steps", "expected"),
    [
        ([(1.0, 0.0)] * 5, 0.0),
        ([(0.5, 0.5)] * 3, 1.0),
        ([(0.9, 0.05), (0.6, 0.3)], 0.425),
        ([(0.7, 0.2)], 0.5),
    ],
)
def test_uncertainty(steps, expected):
    trace = ReasoningTrace(steps)
    assert confidence.uncertainty(trace) == pytest.approx(expected)
    assert confidence.mean_margin(trace) == pytest.approx(1.0 - expected)


def test_random_traces():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        trace = random_trace(rng, int(rng.integers(1, 40)))
        u, m = confidence.uncertainty(trace), confidence.mean_margin(trace)
        assert 0.0 <= u <= 1.0
        assert u + m == pytest.approx(1.0, abs=1e-15)


def test_permutation_invariance():
    rng = np.random.default_rng(2)
    trace = random_trace(rng, 30)
    steps = rng.permutation(np.array(trace.steps, dtype=object))
    shuffled = ReasoningTrace(tuple(steps))
    expected = confidence.uncertainty(trace)
    assert confidence.uncertainty(shuffled) == pytest.approx(expected)


def test_smaller_margin_raises_uncertainty():
    base = ReasoningTrace([(0.8, 0.1), (0.6, 0.2)])
    worse = ReasoningTrace([(0.8, 0.1), (0.5, 0.3)])
    assert confidence.uncertainty(worse) > confidence.uncertainty(base)


@pytest.mark.parametrize(
    "step",
    [(0.4, 0.5), (1.2, 0.0), (0.7, 0.4), (0.5, -0.1)],
)
def test_invalid_step(step):
    with pytest.raises(error.ValidationError, match="timestep 1"):
        ReasoningTrace([(0.9, 0.1), step])


def test_float32_rounding():
    p1, p2 = np.float32(0.6), np.float32(0.4)
    assert float(p1) + float(p2) > 1.0
    trace = ReasoningTrace([(float(p1), float(p2))])
    assert confidence.uncertainty(trace) == pytest.approx(0.8, abs=1e-6)
    with pytest.raises(error.ValidationError):
        ReasoningTrace([(0.7, 0.3 + 1e-5)])


def test_empty_trace():
    with pytest.raises(error.ValidationError):
        ReasoningTrace([])


def test_step_margin():
    assert TokenStep(0.75, 0.25).margin == 0.5


class TestThinkSpan:
    steps = [[1.0, 0.0], [0.5, 0.5], [0.5, 0.5], [1.0, 0.0]]

    def test_think_only(self):
        u = confidence.trace_uncertainty(self.steps, think_span=[1, 3])
        assert u == pytest.approx(1.0)

    def test_full_trace(self):
        record = {"steps": self.steps, "think_span": [1, 3]}
        trace = ReasoningTrace.from_record(record, think_only=False)
        assert confidence.uncertainty(trace) == pytest.approx(0.5)

    @pytest.mark.parametrize("span", [[2, 2], [3, 9], [-1, 2]])
    def test_bad_span(self, span):
        with pytest.raises(error.ValidationError):
            confidence.trace_uncertainty(self.steps, think_span=span)


def test_load_traces(tmp_path):
    path = tmp_path / "traces.jsonl"
    lines = [
        {"id": "a", "steps": [[0.9, 0.05], [0.6, 0.3]]},
        {"id": "b", "steps": [[0.5, 0.5], [1.0, 0.0]], "think_span": [0, 1]},
        {"id": "c", "steps": []},
    ]
    text = "\n".join(json.dumps(i) for i in lines) + "\nnot json\n"
    path.write_text(text, encoding="utf-8")

    traces = confidence.load_traces(path)

    assert sorted(traces) == ["a", "b"]
    assert confidence.uncertainty(traces["a"]) == pytest.approx(0.425)
    assert confidence.uncertainty(traces["b"]) == pytest.approx(1.0)

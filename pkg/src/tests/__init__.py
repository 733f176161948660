# pylint: disable=
""" Unit Tests.

    Shared fixtures: the test data directory and a scriptable judge.
"""
import logging

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from segbudget import error
from segbudget.io.judge import JudgeClient, JudgeRequest, JudgeResponse


log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"


class StubJudge(JudgeClient):
    """Answers from a (sample_id, task) table, recording every request.

    A value can be a list of answers, which are used up in order.
    """

    model = "stub"

    def __init__(self, answers: Dict[Tuple[str, str], object]):
        self.answers = dict(answers)
        self.requests: List[JudgeRequest] = []

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        self.requests.append(request)
        answer = self.answers.get((request.sample_id, request.task))
        if isinstance(answer, list):
            answer = answer.pop(0) if answer else None
        if answer is None:
            raise error.JudgeError("stub has no answer", request.sample_id)
        log.debug("Stub answer for %s/%s", request.sample_id, request.task)
        return JudgeResponse(request.sample_id, str(answer))

    def prompts(self, task: Optional[str] = None) -> Sequence[str]:
        """Prompts seen so far, optionally for one task only."""
        return [i.prompt for i in self.requests if task is None or i.task == task]

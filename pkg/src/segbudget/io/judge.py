"""Judge transports.

A judge takes a single user message and returns text. Two transports
exist: an HTTP chat-completion endpoint, and an offline file of canned
responses keyed by sample id (and optionally the task the prompt was for).
"""
import json
import logging
import threading

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import requests

from prometheus_client import Counter, Summary
from requests.adapters import HTTPAdapter
from urllib3.util import Retry

from segbudget import error
from segbudget.util import fmt


request_counter = Counter("judge_request", "Number of requests sent to the judge")
request_size_counter = Counter(
    "judge_request_size", "Size of the judge requests in bytes"
)
response_time_summary = Summary(
    "judge_response_time", "Time spent waiting for the judge"
)
response_size_counter = Counter(
    "judge_response_size", "Size of the judge responses in bytes"
)
failure_counter = Counter(
    "judge_failure", "Judge requests that failed after all retries"
)

logger = logging.getLogger(__name__)

# Statuses worth another attempt
RETRY_STATUS = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class JudgeRequest:
    """One prompt for the judge."""

    sample_id: str
    task: str
    prompt: str
    model: str = ""
    temperature: float = 0.0

    def body(self) -> Dict[str, Any]:
        """Chat-completion request body."""
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": self.prompt}],
            "temperature": self.temperature,
        }


@dataclass(frozen=True)
class JudgeResponse:
    """Raw judge output, plus the scores parsed from it (if any)."""

    sample_id: str
    raw: str
    scores: Dict[str, float] = field(default_factory=dict)


class JudgeClient:
    """Base class of the judge transports."""

    model: str = ""
    temperature: float = 0.0

    def request(self, sample_id: str, task: str, prompt: str) -> JudgeRequest:
        """Wrap a prompt with this client's decoding parameters."""
        return JudgeRequest(sample_id, task, prompt, self.model, self.temperature)

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        """Send a request, return the generated text."""
        raise NotImplementedError()

    def ask(self, sample_id: str, task: str, prompt: str) -> JudgeResponse:
        """Shortcut for ``complete(request(...))``."""
        return self.complete(self.request(sample_id, task, prompt))

    def close(self):
        """Release resources."""


def extract_path(data: Any, path: str) -> Any:
    """Follow a dotted path like "choices.0.message.content" into JSON data."""
    result = data
    for part in path.split("."):
        if isinstance(result, list):
            result = result[int(part)]
        else:
            result = result[part]
    return result


class HTTPJudge(JudgeClient):
    """Judge behind an HTTP chat-completion endpoint.

    Transport errors and overload statuses are retried with exponential
    backoff; at most ``max_in_flight`` requests run at the same time.
    """

    def __init__(
        self,
        url: str,
        model: str,
        token: str = "",
        temperature: float = 0.0,
        response_path: str = "choices.0.message.content",
        timeout: float = 60,
        attempts: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        session: Optional[requests.Session] = None,
    ):
        if not url:
            raise error.ConfigurationError("No judge URL configured")
        self.url = url
        self.model = model
        self.temperature = temperature
        self.response_path = response_path
        self.timeout = timeout
        self._headers = {"Content-Type": "application/json"}
        if token:
            self._headers["Authorization"] = f"Bearer {token}"
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self.session = session or requests.Session()
        retry = Retry(
            total=attempts - 1,
            backoff_factor=backoff,
            status_forcelist=RETRY_STATUS,
            allowed_methods=frozenset({"POST"}),
            raise_on_status=False,
        )
        adapter = HTTPAdapter(max_retries=retry, pool_maxsize=max_in_flight)
        self.session.mount("http://", adapter)
        self.session.mount("https://", adapter)

    def __repr__(self):
        return f"<{self.__class__.__name__} {self.model} at {self.url}>"

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        body = json.dumps(request.body()).encode("utf-8")
        request_counter.inc()
        request_size_counter.inc(len(body))
        logger.debug("Judge request for %s (%s)", request.sample_id, request.task)
        try:
            with self._slots, response_time_summary.time():
                resp = self.session.post(
                    self.url, data=body, headers=self._headers, timeout=self.timeout
                )
            response_size_counter.inc(len(resp.content))
            resp.raise_for_status()
            text = extract_path(resp.json(), self.response_path)
        except requests.RequestException as exc:
            failure_counter.inc()
            raise error.JudgeError(
                f"Judge request failed: {exc}", request.sample_id
            ) from exc
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            failure_counter.inc()
            raise error.JudgeError(
                f"No text at '{self.response_path}' in judge response ({exc})",
                request.sample_id,
            ) from exc
        return JudgeResponse(request.sample_id, str(text))

    def close(self):
        self.session.close()


class OfflineJudge(JudgeClient):
    """Canned judge responses from a JSONL file.

    Each line holds "sample_id", "response" and optionally "task"; a record
    without task answers every task of its sample.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.responses: Dict[Tuple[str, Optional[str]], str] = {}
        with self.path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = (str(record["sample_id"]), record.get("task"))
                    self.responses[key] = str(record["response"])
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning(
                        "Skipping bad offline judge record #%d in '%s': %s",
                        lineno,
                        self.path,
                        exc,
                    )

    def __repr__(self):
        count = len(self.responses)
        return f"<{self.__class__.__name__} {self.path} ({count} responses)>"

    def complete(self, request: JudgeRequest) -> JudgeResponse:
        for key in ((request.sample_id, request.task), (request.sample_id, None)):
            if key in self.responses:
                return JudgeResponse(request.sample_id, self.responses[key])
        raise error.JudgeError(
            f"No offline response for task '{request.task}'", request.sample_id
        )


def judge_from_settings(offline: Optional[Union[str, Path]] = None) -> JudgeClient:
    """Build the configured judge; an offline file wins over the HTTP endpoint."""
    # pylint: disable=import-outside-toplevel
    from segbudget.config import settings

    section = settings.JUDGE
    offline = offline or section.get("OFFLINE")
    if offline:
        return OfflineJudge(offline)
    return HTTPJudge(
        url=section.URL,
        model=section.MODEL,
        token=section.TOKEN,
        temperature=float(section.TEMPERATURE),
        response_path=section.RESPONSE_PATH,
        timeout=float(section.TIMEOUT),
        attempts=int(section.ATTEMPTS),
        backoff=float(section.BACKOFF),
        max_in_flight=int(section.MAX_IN_FLIGHT),
    )


def judge_stats() -> str:
    """Return a string with judge transport statistics"""
    req_num = int(request_counter._value.get())
    failures = int(failure_counter._value.get())
    req_time = round(list(response_time_summary._child_samples())[1].value, 3)
    req_sz = fmt.human_size(request_size_counter._value.get())
    resp_sz = fmt.human_size(response_size_counter._value.get())
    return (
        f"{req_num} judge requests ({req_sz}) in {req_time}s"
        f" (response {resp_sz}, {failures} failed)"
    )

# pylint: disable=
""" Judge transport tests.
"""
import json
import logging
import re
import threading
import time

from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
import requests

from segbudget import error
from segbudget.io import judge
from segbudget.util.parts import Bunch


log = logging.getLogger(__name__)


class FakeResponse:
    def __init__(self, payload, status=200):
        self.status_code = status
        self.content = json.dumps(payload).encode("utf-8")
        self.payload = payload

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"{self.status_code} Server Error")

    def json(self):
        return self.payload


class FakeSession:
    """Just enough of ``requests.Session`` for the HTTP judge."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.calls = []
        self.mounted = []

    def mount(self, prefix, adapter):
        self.mounted.append(prefix)

    def post(self, url, data=None, headers=None, timeout=None):
        self.calls.append((url, json.loads(data), headers, timeout))
        result = self.responses.pop(0)
        if isinstance(result, Exception):
            raise result
        return result

    def close(self):
        pass


def chat_payload(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def test_extract_path():
    data = chat_payload("hello")
    assert judge.extract_path(data, "choices.0.message.content") == "hello"
    assert judge.extract_path({"text": "x"}, "text") == "x"
    with pytest.raises(KeyError):
        judge.extract_path(data, "choices.0.message.missing")


def test_request_body():
    request = judge.JudgeRequest(
        "s1", "difficulty", "rate this", model="m", temperature=0.0
    )
    assert request.body() == {
        "model": "m",
        "messages": [{"role": "user", "content": "rate this"}],
        "temperature": 0.0,
    }


class TestHTTPJudge:
    def test_complete(self):
        session = FakeSession(FakeResponse(chat_payload('{"scene": 4}')))
        client = judge.HTTPJudge(
            "http://judge.local/v1/chat", "judge-model", token="secret", session=session
        )
        response = client.ask("s1", "difficulty", "rate this")

        assert response.raw == '{"scene": 4}'
        assert response.sample_id == "s1"
        url, body, headers, _ = session.calls[0]
        assert url == "http://judge.local/v1/chat"
        assert body["model"] == "judge-model"
        assert body["temperature"] == 0.0
        assert body["messages"][0]["content"] == "rate this"
        assert headers["Authorization"] == "Bearer secret"
        assert set(session.mounted) == {"http://", "https://"}

    def test_no_token_no_auth_header(self):
        session = FakeSession(FakeResponse(chat_payload("ok")))
        client = judge.HTTPJudge("http://judge.local", "m", session=session)
        client.ask("s1", "rscore", "p")
        assert "Authorization" not in session.calls[0][2]

    def test_custom_response_path(self):
        session = FakeSession(FakeResponse({"output": {"text": "done"}}))
        client = judge.HTTPJudge(
            "http://judge.local", "m", response_path="output.text", session=session
        )
        assert client.ask("s1", "rscore", "p").raw == "done"

    def test_transport_failure(self):
        session = FakeSession(requests.ConnectionError("refused"))
        client = judge.HTTPJudge("http://judge.local", "m", session=session)
        with pytest.raises(error.JudgeError) as exc:
            client.ask("s7", "difficulty", "p")
        assert exc.value.sample_id == "s7"

    def test_http_error(self):
        session = FakeSession(FakeResponse({"error": "busy"}, status=503))
        client = judge.HTTPJudge("http://judge.local", "m", session=session)
        with pytest.raises(error.JudgeError):
            client.ask("s1", "difficulty", "p")

    def test_bad_payload(self):
        session = FakeSession(FakeResponse({"choices": []}))
        client = judge.HTTPJudge("http://judge.local", "m", session=session)
        with pytest.raises(error.JudgeError, match="choices.0.message.content"):
            client.ask("s1", "difficulty", "p")

    def test_needs_url(self):
        with pytest.raises(error.ConfigurationError):
            judge.HTTPJudge("", "m", session=FakeSession())


@pytest.fixture
def judge_server():
    """A local chat endpoint answering with queued statuses, then 200."""
    state = Bunch(statuses=[], hits=0, active=0, peak=0, delay=0.0)
    lock = threading.Lock()

    class ChatHandler(BaseHTTPRequestHandler):
        def do_POST(self):  # pylint: disable=invalid-name
            self.rfile.read(int(self.headers.get("Content-Length", 0)))
            with lock:
                state.hits += 1
                state.active += 1
                state.peak = max(state.peak, state.active)
                status = state.statuses.pop(0) if state.statuses else 200
            time.sleep(state.delay)
            payload = chat_payload("ok") if status == 200 else {"error": "busy"}
            body = json.dumps(payload).encode("utf-8")
            with lock:
                state.active -= 1
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, format, *args):  # pylint: disable=redefined-builtin
            log.debug("Judge server: " + format, *args)

    server = ThreadingHTTPServer(("127.0.0.1", 0), ChatHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    state.url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    try:
        yield state
    finally:
        server.shutdown()
        server.server_close()
        thread.join()


def local_judge(url, **kwargs):
    session = requests.Session()
    session.trust_env = False
    return judge.HTTPJudge(url, "m", backoff=0, session=session, **kwargs)


class TestRetries:
    def test_overload_is_retried(self, judge_server):
        judge_server.statuses = [503, 503]
        client = local_judge(judge_server.url, attempts=3)
        assert client.ask("s1", "difficulty", "p").raw == "ok"
        assert judge_server.hits == 3

    def test_attempts_exhausted(self, judge_server):
        judge_server.statuses = [503, 503, 503]
        client = local_judge(judge_server.url, attempts=3)
        with pytest.raises(error.JudgeError) as exc:
            client.ask("s2", "difficulty", "p")
        assert exc.value.sample_id == "s2"
        assert judge_server.hits == 3

    def test_client_errors_are_final(self, judge_server):
        judge_server.statuses = [400]
        client = local_judge(judge_server.url, attempts=3)
        with pytest.raises(error.JudgeError):
            client.ask("s3", "difficulty", "p")
        assert judge_server.hits == 1

    def test_max_in_flight(self, judge_server):
        judge_server.delay = 0.05
        client = local_judge(judge_server.url, max_in_flight=2)
        with ThreadPoolExecutor(max_workers=6) as pool:
            answers = list(
                pool.map(lambda i: client.ask(f"s{i}", "rscore", "p").raw, range(6))
            )
        assert answers == ["ok"] * 6
        assert judge_server.hits == 6
        assert 1 <= judge_server.peak <= 2


class TestOfflineJudge:
    @pytest.fixture
    def offline(self, tmp_path):
        path = tmp_path / "judge.jsonl"
        lines = [
            {"sample_id": "a", "task": "difficulty", "response": "{'scene': 2}"},
            {"sample_id": "a", "response": "fallback"},
            {"sample_id": "b", "task": "rscore", "response": "rated"},
        ]
        text = "\n".join(json.dumps(i) for i in lines) + "\n\nnot json\n"
        path.write_text(text, encoding="utf-8")
        return judge.OfflineJudge(path)

    def test_task_specific(self, offline):
        assert offline.ask("a", "difficulty", "ignored").raw == "{'scene': 2}"

    def test_task_fallback(self, offline):
        assert offline.ask("a", "rscore", "ignored").raw == "fallback"

    def test_missing(self, offline):
        with pytest.raises(error.JudgeError, match="short_chain"):
            offline.ask("b", "short_chain", "ignored")
        with pytest.raises(error.JudgeError):
            offline.ask("zzz", "difficulty", "ignored")

    def test_bad_lines_skipped(self, offline):
        assert len(offline.responses) == 3


def test_judge_stats():
    session = FakeSession(FakeResponse(chat_payload("x")))
    judge.HTTPJudge("http://judge.local", "m", session=session).ask("s", "t", "p")
    stats = judge.judge_stats()
    log.info("Stats: %s", stats)
    assert re.match(
        r"^\d+ judge requests \(.+\) in [\d.]+s \(response .+, \d+ failed\)$", stats
    )

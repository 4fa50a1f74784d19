import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


class StubServer:
    """Local HTTP server replaying a queue of canned (status, body) replies.

    When the queue runs dry the last reply repeats. Every request is kept
    in ``requests`` as (path, headers, decoded JSON body).
    """

    def __init__(self):
        self.replies = []
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(n)
                stub.requests.append((self.path, dict(self.headers), json.loads(raw or b"null")))
                status, body = stub.replies.pop(0) if len(stub.replies) > 1 else stub.replies[0]
                data = body if isinstance(body, (bytes, str)) else json.dumps(body)
                data = data.encode() if isinstance(data, str) else data
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1/chat/completions"
        self.thread = threading.Thread(target=self.httpd.serve_forever, args=(0.01,), daemon=True)

    def reply(self, status, body):
        self.replies.append((status, body))
        return self


@pytest.fixture
def stub_server():
    s = StubServer()
    s.thread.start()
    yield s
    s.httpd.shutdown()
    s.httpd.server_close()


def chat_reply(content):
    return {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}


# (criterion number, PASS/FAIL, title, detail) rows filled by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, verdict, title, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{verdict}] {n:2d}. {title}" + (f" ({detail})" if detail else ""))

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from textmend import Corpus, CorpusDoc, DocOrigin, SentencePair, TaskKind


@pytest.fixture
def worked_pair():
    # the spot-rate trading sentence: two substituted characters at 0 and 1
    return SentencePair(
        id="w1",
        source="机器外汇交易也称现汇交易",
        target="即期外汇交易也称现汇交易",
        task=TaskKind.SPELLING,
    )


@pytest.fixture
def worked_corpus(worked_pair):
    texts = [
        worked_pair.target,          # the reference itself
        "即时发布产品投资报价",        # contains 即
        "沪深300指数期货主力合约",     # contains 期
        "现汇交易具有高流动性",        # close to the query, no corrected char
        "我国对外汇实行管制",          # clean filler
        "市场交易量持续增长",
        "银行提供多种理财产品",
    ]
    docs = [
        CorpusDoc(doc_id=f"d{i:03d}", text=t, origin=DocOrigin.TRAIN_TARGET)
        for i, t in enumerate(texts)
    ]
    return Corpus(docs=tuple(docs), domain_tag="finance")


class _StubHandler(BaseHTTPRequestHandler):
    """Tiny chat + embed server for wire-protocol tests.

    Behavior is driven by the server's ``script`` list (chat replies,
    consumed in order; an int entry means "answer with that HTTP status")
    and ``embed_dim`` for deterministic per-text embeddings.
    """

    def log_message(self, *args):
        pass

    def _read_body(self):
        length = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(length) or b"{}")

    def _send(self, status, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        server = self.server
        if self.path == "/chat/completions":
            with server.lock:
                entry = (
                    server.script.pop(0) if server.script else server.default_reply
                )
                server.chat_requests.append(self._read_body())
            if isinstance(entry, int):
                self._send(entry, {"error": "scripted"})
                return
            self._send(200, {"choices": [{"message": {"content": entry}}]})
        elif self.path == "/embed":
            body = self._read_body()
            texts = body.get("texts", [])
            dim = server.embed_dim
            # char-code folding: deterministic, text-sensitive, nonzero
            vecs = []
            for text in texts:
                row = [1.0] * dim
                for pos, ch in enumerate(text):
                    row[(ord(ch) + pos) % dim] += ord(ch) % 97
                vecs.append(row)
            self._send(200, {"embeddings": vecs, "dim": dim})
        else:
            self._send(404, {"error": "no such route"})


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.script = []
    server.default_reply = "好的"
    server.embed_dim = 8
    server.chat_requests = []
    server.lock = threading.Lock()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        server.url = f"http://127.0.0.1:{server.server_address[1]}"
        yield server
    finally:
        server.shutdown()
        thread.join(timeout=5)

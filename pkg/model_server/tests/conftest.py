from __future__ import annotations

import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn

from model_server.app import build_engines, create_app
from model_server.tiny import build_tiny_checkpoints

FIXTURES = Path(__file__).parent.parent / "fixtures"

CORPUS = [
    "john lennon plays guitar piano and harmonica on the record",
    "mira plays violin in the orchestra",
    "dexter plays drums in the band",
    "elena plays cello in the quartet",
    "nobody never plays anything here",
    "harold finch died in lisbon",
    "what instruments plays john lennon ?",
]


@pytest.fixture(scope="session")
def tiny_checkpoints(tmp_path_factory) -> dict[str, str]:
    out = tmp_path_factory.mktemp("tiny-checkpoints")
    return build_tiny_checkpoints(out, CORPUS, seed=0)


class LiveServer:
    """uvicorn in a background thread on an ephemeral port."""

    def __init__(self, app):
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        deadline = time.time() + 30
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start within 30s")
            time.sleep(0.02)
        sock: socket.socket = self._server.servers[0].sockets[0]
        host, port = sock.getsockname()[:2]
        return f"http://{host}:{port}"

    def __exit__(self, *exc) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture(scope="session")
def server_url(tiny_checkpoints) -> str:
    app = create_app(build_engines(tiny_checkpoints))
    with LiveServer(app) as url:
        yield url

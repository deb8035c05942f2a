import threading

import pytest

from groundforge_server.app import build_server
from groundforge_server.config import ServerConfig


@pytest.fixture
def run_server():
    """Start a server on an ephemeral port; yields its base URL."""
    servers = []

    def _start(config: ServerConfig) -> str:
        server = build_server(config, port=0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append((server, thread))
        host, port = server.server_address[:2]
        return f"http://{host}:{port}"

    yield _start
    for server, thread in servers:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)

"""Reference HTTP server for the backend wire protocol.

Serves the five model roles in canned (fixture playback with a
deterministic fallback generator) or live (adapter forwarding) mode.
"""

from .config import ServerConfig
from .service import CannedService, LiveService, build_service
from .app import build_server, serve

__version__ = "0.1.0"

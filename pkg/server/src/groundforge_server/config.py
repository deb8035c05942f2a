"""Server configuration: JSON file plus a PORT environment override."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

MODES = ("canned", "live")
PORT_ENV = "PORT"


class ServerConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServerConfig:
    mode: str = "canned"
    fixtures_dir: Optional[str] = None
    port: int = 8080
    seed: int = 0
    fallback: bool = True
    adapters: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ServerConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "canned" and not self.fixtures_dir:
            raise ServerConfigError("canned mode requires fixtures_dir")
        if not (0 <= self.port <= 65535):
            raise ServerConfigError(f"invalid port {self.port}")

    @classmethod
    def from_dict(cls, data: dict) -> "ServerConfig":
        port = data.get("port", 8080)
        env_port = os.environ.get(PORT_ENV)
        if env_port:
            try:
                port = int(env_port)
            except ValueError as exc:
                raise ServerConfigError(f"bad {PORT_ENV} value {env_port!r}") from exc
        try:
            return cls(
                mode=data.get("mode", "canned"),
                fixtures_dir=data.get("fixtures_dir"),
                port=int(port),
                seed=int(data.get("seed", 0)),
                fallback=bool(data.get("fallback", True)),
                adapters=dict(data.get("adapters") or {}),
            )
        except (TypeError, ValueError) as exc:
            raise ServerConfigError(f"malformed server config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "ServerConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ServerConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

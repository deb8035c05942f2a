"""Wire protocol for the five model roles, plus the retrying HTTP client.

Roles: caption (image describer), generate_image (text-to-image),
complete (language model), detect (open-vocabulary detector), embed
(text embedder). Requests and responses travel as canonical JSON over
HTTP POST; image payloads are content-addressed blobs fetched separately.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from .canonical import canonical_bytes, content_hash
from .core import Box, ValidationError

ROLES = ("caption", "generate_image", "complete", "detect", "embed")

DEFAULT_GUIDANCE_SCALE = 10.0
DEFAULT_IMAGE_SIZE = (256, 256)
BLOB_PREFIX = "sha256:"


class BackendError(Exception):
    """Base failure for backend traffic."""

    def __init__(self, message: str, code: str = "backend_error", retryable: bool = False):
        super().__init__(message)
        self.code = code
        self.retryable = retryable


class ProtocolError(BackendError):
    """Schema violation in a request or response; never retried."""

    def __init__(self, message: str, code: str = "protocol_error"):
        super().__init__(message, code=code, retryable=False)


class BackendExhausted(BackendError):
    """Transient failures outlasted the retry budget."""

    def __init__(self, message: str):
        super().__init__(message, code="exhausted", retryable=False)


@dataclass(frozen=True)
class BackendEndpoint:
    role: str
    base_url: str
    timeout: float = 10.0
    max_retries: int = 2

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"unknown backend role {self.role!r}")
        if self.timeout <= 0:
            raise ValidationError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")


@dataclass(frozen=True)
class GenerateImageRequest:
    prompt: str
    guidance_scale: float = DEFAULT_GUIDANCE_SCALE
    seed: int = 0
    size: tuple[int, int] = DEFAULT_IMAGE_SIZE

    def __post_init__(self):
        if self.guidance_scale <= 0:
            raise ValidationError("guidance_scale must be > 0")

    def to_payload(self) -> dict:
        return {
            "prompt": self.prompt,
            "guidance_scale": self.guidance_scale,
            "seed": self.seed,
            "size": list(self.size),
        }


@dataclass(frozen=True)
class DetectRequest:
    image_ref: str
    phrase: str

    def to_payload(self) -> dict:
        return {"image_ref": self.image_ref, "phrase": self.phrase}


@dataclass(frozen=True)
class DetectResponse:
    detections: tuple[tuple[Box, float], ...]

    @classmethod
    def from_payload(cls, payload: dict) -> "DetectResponse":
        validate_response_payload("detect", payload)
        dets = tuple(
            (Box(*row["box"]), float(row["confidence"])) for row in payload["detections"]
        )
        return cls(dets)


def caption_payload(image_ref: str) -> dict:
    return {"image_ref": image_ref}


def complete_payload(prompt: str) -> dict:
    return {"prompt": prompt}


def embed_payload(text: str) -> dict:
    return {"text": text}


def request_hash(role: str, payload: dict) -> str:
    """Content address of a request; transport-independent."""
    return content_hash({"role": role, "payload": payload})


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ProtocolError(message)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_request_payload(role: str, payload) -> None:
    """Check a request body against its role schema."""
    _require(isinstance(payload, dict), f"{role}: request body must be a JSON object")
    if role == "caption":
        _require(isinstance(payload.get("image_ref"), str) and payload["image_ref"] != "",
                 "caption: image_ref must be a non-empty string")
        _require(set(payload) <= {"image_ref"}, "caption: unexpected request fields")
    elif role == "generate_image":
        _require(isinstance(payload.get("prompt"), str) and payload["prompt"] != "",
                 "generate_image: prompt must be a non-empty string")
        _require(_is_num(payload.get("guidance_scale")) and payload["guidance_scale"] > 0,
                 "generate_image: guidance_scale must be > 0")
        _require(isinstance(payload.get("seed"), int) and payload["seed"] >= 0,
                 "generate_image: seed must be a non-negative integer")
        size = payload.get("size")
        _require(isinstance(size, list) and len(size) == 2
                 and all(isinstance(s, int) and s >= 1 for s in size),
                 "generate_image: size must be [width, height] of positive integers")
        _require(set(payload) <= {"prompt", "guidance_scale", "seed", "size"},
                 "generate_image: unexpected request fields")
    elif role == "complete":
        _require(isinstance(payload.get("prompt"), str) and payload["prompt"] != "",
                 "complete: prompt must be a non-empty string")
        _require(set(payload) <= {"prompt"}, "complete: unexpected request fields")
    elif role == "detect":
        _require(isinstance(payload.get("image_ref"), str) and payload["image_ref"] != "",
                 "detect: image_ref must be a non-empty string")
        _require(isinstance(payload.get("phrase"), str) and payload["phrase"] != "",
                 "detect: phrase must be a non-empty string")
        _require(set(payload) <= {"image_ref", "phrase"}, "detect: unexpected request fields")
    elif role == "embed":
        _require(isinstance(payload.get("text"), str) and payload["text"] != "",
                 "embed: text must be a non-empty string")
        _require(set(payload) <= {"text"}, "embed: unexpected request fields")
    else:
        raise ProtocolError(f"unknown role {role!r}", code="unknown_role")


def validate_response_payload(role: str, payload) -> None:
    """Check a response body against its role schema."""
    _require(isinstance(payload, dict), f"{role}: response body must be a JSON object")
    if role == "caption":
        _require(isinstance(payload.get("caption"), str) and payload["caption"] != "",
                 "caption: response needs a non-empty caption")
    elif role == "generate_image":
        ref = payload.get("image_ref")
        _require(isinstance(ref, str) and ref.startswith(BLOB_PREFIX),
                 "generate_image: response needs a content-hash image_ref")
    elif role == "complete":
        _require(isinstance(payload.get("completion"), str),
                 "complete: response needs a completion string")
    elif role == "detect":
        dets = payload.get("detections")
        _require(isinstance(dets, list), "detect: response needs a detections list")
        last = None
        for row in dets:
            _require(isinstance(row, dict), "detect: detection rows must be objects")
            box = row.get("box")
            _require(isinstance(box, list) and len(box) == 4 and all(_is_num(c) for c in box),
                     "detect: box must be [x_min, y_min, x_max, y_max]")
            try:
                Box(*[float(c) for c in box])
            except ValidationError as exc:
                raise ProtocolError(f"detect: invalid box: {exc}") from exc
            conf = row.get("confidence")
            _require(_is_num(conf) and 0.0 <= conf <= 1.0,
                     "detect: confidence must lie in [0, 1]")
            _require(last is None or conf <= last,
                     "detect: confidences must be sorted descending")
            last = conf
    elif role == "embed":
        emb = payload.get("embedding")
        _require(isinstance(emb, list) and len(emb) >= 1 and all(_is_num(x) for x in emb),
                 "embed: response needs a numeric embedding list")
        norm = float(np.linalg.norm(np.asarray(emb, dtype=np.float64)))
        _require(abs(norm - 1.0) <= 1e-6, f"embed: embedding norm {norm} is not 1")
    else:
        raise ProtocolError(f"unknown role {role!r}", code="unknown_role")


class Backend(Protocol):
    """Anything that can answer one role's requests."""

    role: str

    def call(self, payload: dict) -> dict: ...

    def get_blob(self, ref: str) -> bytes: ...


# transport(method, url, body, timeout) -> (status_code, body_bytes)
Transport = Callable[[str, str, Optional[bytes], float], tuple[int, bytes]]


def _requests_transport(method: str, url: str, body: Optional[bytes], timeout: float):
    import requests

    try:
        resp = requests.request(
            method,
            url,
            data=body,
            timeout=timeout,
            headers={"Content-Type": "application/json"} if body is not None else None,
        )
    except requests.exceptions.RequestException as exc:
        raise BackendError(f"transport failure: {exc}", code="transport", retryable=True)
    return resp.status_code, resp.content


@dataclass
class HttpBackend:
    """Client for one endpoint: canonical-JSON POST with backoff retries.

    Reentrant; concurrent calls are permitted up to max_in_flight.
    """

    endpoint: BackendEndpoint
    transport: Transport = field(default=None)  # type: ignore[assignment]
    sleep: Callable[[float], None] = time.sleep
    backoff_base: float = 0.25
    backoff_factor: float = 2.0
    max_in_flight: int = 8
    _rng: random.Random = field(default_factory=lambda: random.Random(0x5EED))

    def __post_init__(self):
        if self.transport is None:
            self.transport = _requests_transport
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be >= 1")
        self._in_flight = threading.BoundedSemaphore(self.max_in_flight)

    @property
    def role(self) -> str:
        return self.endpoint.role

    def _delay(self, attempt: int) -> float:
        base = self.backoff_base * (self.backoff_factor ** attempt)
        return base * (0.5 + self._rng.random())

    def _request(self, method: str, url: str, body: Optional[bytes]) -> bytes:
        with self._in_flight:
            return self._request_locked(method, url, body)

    def _request_locked(self, method: str, url: str, body: Optional[bytes]) -> bytes:
        import json as _json

        attempts = self.endpoint.max_retries + 1
        last_error: Optional[BackendError] = None
        for attempt in range(attempts):
            try:
                status, content = self.transport(method, url, body, self.endpoint.timeout)
            except BackendError as exc:
                if not exc.retryable:
                    raise
                last_error = exc
            else:
                if status == 200:
                    return content
                retryable = status >= 500 or status == 429
                code = f"http_{status}"
                message = f"{method} {url} returned {status}"
                try:
                    err = _json.loads(content.decode("utf-8"))["error"]
                    retryable = bool(err.get("retryable", retryable))
                    code = str(err.get("code", code))
                    message = f"{message}: {err.get('message', '')}"
                except Exception:
                    pass
                if not retryable:
                    raise BackendError(message, code=code, retryable=False)
                last_error = BackendError(message, code=code, retryable=True)
            if attempt + 1 < attempts:
                self.sleep(self._delay(attempt))
        raise BackendExhausted(
            f"{url}: retries exhausted after {attempts} attempts: {last_error}"
        )

    def call(self, payload: dict) -> dict:
        import json as _json

        validate_request_payload(self.role, payload)
        url = f"{self.endpoint.base_url.rstrip('/')}/{self.role}"
        content = self._request("POST", url, canonical_bytes(payload))
        try:
            parsed = _json.loads(content.decode("utf-8"))
        except Exception as exc:
            raise ProtocolError(f"{self.role}: response is not valid JSON: {exc}") from exc
        validate_response_payload(self.role, parsed)
        return parsed

    def get_blob(self, ref: str) -> bytes:
        if not ref.startswith(BLOB_PREFIX):
            raise ProtocolError(f"blob ref must start with {BLOB_PREFIX!r}: {ref!r}")
        url = f"{self.endpoint.base_url.rstrip('/')}/blob/{ref[len(BLOB_PREFIX):]}"
        return self._request("GET", url, None)

import hashlib
import json

import requests

from groundforge.canonical import canonical_bytes
from groundforge.conformance import run_conformance
from groundforge.protocol import BackendEndpoint, HttpBackend, ROLES, request_hash
from groundforge_server.config import ServerConfig


def canned_config(tmp_path, **kwargs):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    defaults = {"mode": "canned", "fixtures_dir": str(fixtures), "seed": 0}
    defaults.update(kwargs)
    return ServerConfig.from_dict(defaults), fixtures


def http_callers(base_url):
    backends = {
        role: HttpBackend(BackendEndpoint(role, base_url, timeout=10.0, max_retries=0))
        for role in ROLES
    }

    def call(role, payload):
        return backends[role].call(payload)

    def get_blob(ref):
        return backends["generate_image"].get_blob(ref)

    return call, get_blob


def test_canned_server_passes_shared_conformance_suite(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    call, get_blob = http_callers(base_url)
    report = run_conformance(call, get_blob)
    assert report["checks"] > 10


def test_repeated_request_byte_identical_on_the_wire(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    body = canonical_bytes({"image_ref": "sha256:" + "e" * 64, "phrase": "a cat"})
    first = requests.post(f"{base_url}/detect", data=body, timeout=10)
    second = requests.post(f"{base_url}/detect", data=body, timeout=10)
    assert first.status_code == second.status_code == 200
    assert first.content == second.content


def test_detect_boxes_validated_by_primary_client(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    backend = HttpBackend(BackendEndpoint("detect", base_url, timeout=10.0))
    response = backend.call({"image_ref": "sha256:" + "a" * 64, "phrase": "a dog"})
    confs = [row["confidence"] for row in response["detections"]]
    assert confs == sorted(confs, reverse=True)
    for row in response["detections"]:
        x0, y0, x1, y1 = row["box"]
        assert 0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0


def test_fixture_playback_takes_precedence(tmp_path, run_server):
    config, fixtures = canned_config(tmp_path)
    payload = {"image_ref": "sha256:" + "5" * 64}
    key = request_hash("caption", payload)
    (fixtures / "caption").mkdir()
    (fixtures / "caption" / f"{key}.json").write_text(
        json.dumps({"caption": "a hand-authored fixture caption"})
    )
    base_url = run_server(config)
    resp = requests.post(
        f"{base_url}/caption", data=canonical_bytes(payload), timeout=10
    )
    assert resp.json()["caption"] == "a hand-authored fixture caption"


def test_fixture_miss_without_fallback_is_non_retryable_404(tmp_path, run_server):
    config, _ = canned_config(tmp_path, fallback=False)
    base_url = run_server(config)
    resp = requests.post(
        f"{base_url}/caption",
        data=canonical_bytes({"image_ref": "sha256:" + "1" * 64}),
        timeout=10,
    )
    assert resp.status_code == 404
    err = resp.json()["error"]
    assert err["code"] == "fixture_miss"
    assert err["retryable"] is False


def test_unknown_role_404(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    resp = requests.post(f"{base_url}/transcribe", data=b"{}", timeout=10)
    assert resp.status_code == 404
    assert resp.json()["error"]["code"] == "unknown_role"


def test_malformed_body_400(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    resp = requests.post(f"{base_url}/caption", data=b"{not json", timeout=10)
    assert resp.status_code == 400
    assert resp.json()["error"]["retryable"] is False


def test_schema_violation_400(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    resp = requests.post(
        f"{base_url}/caption", data=canonical_bytes({"image_ref": 7}), timeout=10
    )
    assert resp.status_code == 400


def test_blob_endpoint_round_trip(tmp_path, run_server):
    config, _ = canned_config(tmp_path)
    base_url = run_server(config)
    gen = requests.post(
        f"{base_url}/generate_image",
        data=canonical_bytes(
            {"prompt": "a dog", "guidance_scale": 10.0, "seed": 3, "size": [32, 32]}
        ),
        timeout=10,
    ).json()
    blob_hash = gen["image_ref"].split(":", 1)[1]
    blob = requests.get(f"{base_url}/blob/{blob_hash}", timeout=10)
    assert blob.status_code == 200
    assert hashlib.sha256(blob.content).hexdigest() == blob_hash
    missing = requests.get(f"{base_url}/blob/" + "f" * 64, timeout=10)
    assert missing.status_code == 404


def test_fixture_blob_directory_served(tmp_path, run_server):
    config, fixtures = canned_config(tmp_path, fallback=False)
    payload = b"fixture image bytes"
    digest = hashlib.sha256(payload).hexdigest()
    (fixtures / "blobs").mkdir()
    (fixtures / "blobs" / digest).write_bytes(payload)
    base_url = run_server(config)
    resp = requests.get(f"{base_url}/blob/{digest}", timeout=10)
    assert resp.content == payload


class TestLiveMode:
    def test_configured_adapter_answers(self, run_server):
        config = ServerConfig.from_dict({
            "mode": "live",
            "adapters": {
                "caption": "groundforge_server.adapters:echo_caption",
                "embed": "groundforge_server.adapters:hashed_embed",
            },
        })
        base_url = run_server(config)
        backend = HttpBackend(BackendEndpoint("caption", base_url, timeout=10.0))
        response = backend.call({"image_ref": "sha256:" + "9" * 64})
        assert "placeholder caption" in response["caption"]
        embed = HttpBackend(BackendEndpoint("embed", base_url, timeout=10.0))
        assert len(embed.call({"text": "a dog"})["embedding"]) == 16

    def test_unconfigured_role_descriptive_error(self, run_server):
        config = ServerConfig.from_dict({"mode": "live", "adapters": {}})
        base_url = run_server(config)
        resp = requests.post(
            f"{base_url}/detect",
            data=canonical_bytes({"image_ref": "sha256:" + "0" * 64, "phrase": "x"}),
            timeout=10,
        )
        assert resp.status_code == 501
        err = resp.json()["error"]
        assert err["code"] == "role_not_configured"
        assert err["retryable"] is False
        assert "detect" in err["message"]

    def test_broken_adapter_path_errors(self, run_server):
        config = ServerConfig.from_dict({
            "mode": "live",
            "adapters": {"caption": "nonexistent.module:fn"},
        })
        base_url = run_server(config)
        resp = requests.post(
            f"{base_url}/caption",
            data=canonical_bytes({"image_ref": "sha256:" + "0" * 64}),
            timeout=10,
        )
        assert resp.status_code == 500

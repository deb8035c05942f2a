"""End-to-end image-text-box synthesis, layout selection, and subsampling.

The caption pipeline walks each input through describe -> generate_image
[-> recaption] -> extract_phrases -> detect, persisting one JSONL record
per accepted phrase-box pair. All model traffic flows through the stage
cache, so an interrupted run resumes bit-identically from warm entries.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .boxes import (
    Detection,
    TextBoxPool,
    select_by_dissimilarity,
    select_max_compatible,
    select_random,
    select_top1_box,
)
from .cache import NullCache, StageCache
from .canonical import canonical_bytes, dumps_canonical, sha256_hex
from .core import (
    Box,
    DatasetManifest,
    GroundingPhrase,
    GroundingRecord,
    ImageRef,
    ValidationError,
)
from .mocks import MockModelHub, MockRoleBackend
from .protocol import (
    BLOB_PREFIX,
    ROLES,
    BackendEndpoint,
    BackendExhausted,
    HttpBackend,
    request_hash,
)
from .records import (
    build_manifest,
    record_line,
    stage_digest,
    write_manifest,
)
from .text_synthesis import (
    ConceptList,
    EXCLUDED_NOUNS,
    InContextExample,
    PhraseExtractionError,
    build_prompt,
    load_default_examples,
    parse_phrase_list,
    sample_concepts,
    segment_phrases,
)

logger = logging.getLogger(__name__)

PURITIES = ("lower_image2text", "higher_concept2text")
PARADIGMS = ("caption", "recaption")
PHRASE_MODES = ("llm_short", "llm_long", "both", "comma", "period")
SELECTION_STRATEGIES = ("all", "random", "text", "iou")

CACHE_ENV = "GROUNDFORGE_CACHE_DIR"
# Test hook: abort with backend exhaustion after this many backend
# executions, leaving resumable state behind.
FAIL_AFTER_ENV = "GROUNDFORGE_FAIL_AFTER"


class ConfigError(Exception):
    """Configuration is missing, malformed, or inconsistent."""


def derive_seed(*parts) -> int:
    """Stable 64-bit sub-seed from arbitrary JSON-serializable parts."""
    digest = hashlib.sha256(canonical_bytes(list(parts))).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class PipelineConfig:
    purity: str = "lower_image2text"
    paradigm: str = "caption"
    phrase_mode: str = "llm_short"
    detector_threshold: float = 0.7
    guidance_scale: float = 10.0
    seed: int = 0
    image_size: tuple[int, int] = (256, 256)
    workers: int = 4
    endpoints: dict[str, BackendEndpoint] = field(default_factory=dict)
    inputs_path: Optional[str] = None
    out_dir: str = "out"
    cache_dir: Optional[str] = None
    concept_list_path: Optional[str] = None
    examples_path: Optional[str] = None

    def __post_init__(self):
        if self.purity not in PURITIES:
            raise ConfigError(f"purity must be one of {PURITIES}, got {self.purity!r}")
        if self.paradigm not in PARADIGMS:
            raise ConfigError(f"paradigm must be one of {PARADIGMS}, got {self.paradigm!r}")
        if self.phrase_mode not in PHRASE_MODES:
            raise ConfigError(
                f"phrase_mode must be one of {PHRASE_MODES}, got {self.phrase_mode!r}"
            )
        if not (0.0 <= self.detector_threshold <= 1.0):
            raise ConfigError("detector_threshold must lie in [0, 1]")
        if self.guidance_scale <= 0:
            raise ConfigError("guidance_scale must be > 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        missing = [role for role in ROLES if role not in self.endpoints]
        if missing:
            raise ConfigError(f"endpoints missing for roles: {missing}")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        endpoints = {}
        for role, spec in (data.get("endpoints") or {}).items():
            if role not in ROLES:
                raise ConfigError(f"unknown endpoint role {role!r}")
            try:
                endpoints[role] = BackendEndpoint(
                    role=role,
                    base_url=spec["base_url"],
                    timeout=float(spec.get("timeout", 10.0)),
                    max_retries=int(spec.get("max_retries", 2)),
                )
            except (KeyError, TypeError, ValidationError) as exc:
                raise ConfigError(f"bad endpoint for role {role!r}: {exc}") from exc
        io = data.get("io") or {}
        cache_dir = os.environ.get(CACHE_ENV) or io.get("cache_dir")
        size = data.get("image_size", [256, 256])
        try:
            return cls(
                purity=data.get("purity", "lower_image2text"),
                paradigm=data.get("paradigm", "caption"),
                phrase_mode=data.get("phrase_mode", "llm_short"),
                detector_threshold=float(data.get("detector_threshold", 0.7)),
                guidance_scale=float(data.get("guidance_scale", 10.0)),
                seed=int(data.get("seed", 0)),
                image_size=(int(size[0]), int(size[1])),
                workers=int(data.get("workers", 4)),
                endpoints=endpoints,
                inputs_path=io.get("inputs"),
                out_dir=io.get("out_dir", "out"),
                cache_dir=cache_dir,
                concept_list_path=io.get("concept_list"),
                examples_path=io.get("examples"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def replace(self, **kwargs) -> "PipelineConfig":
        from dataclasses import replace as _replace

        try:
            return _replace(self, **kwargs)
        except ConfigError:
            raise
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def snapshot(self) -> str:
        """Canonical serialized form, stored in the manifest."""
        payload = {
            "purity": self.purity,
            "paradigm": self.paradigm,
            "phrase_mode": self.phrase_mode,
            "detector_threshold": self.detector_threshold,
            "guidance_scale": self.guidance_scale,
            "seed": self.seed,
            "image_size": list(self.image_size),
            "workers": self.workers,
            "endpoints": {
                role: {
                    "base_url": ep.base_url,
                    "timeout": ep.timeout,
                    "max_retries": ep.max_retries,
                }
                for role, ep in sorted(self.endpoints.items())
            },
        }
        return dumps_canonical(payload)


def build_backends(cfg: PipelineConfig) -> dict:
    """Resolve endpoints to callables: mock:// hubs or HTTP clients."""
    backends = {}
    hubs: dict[int, MockModelHub] = {}
    for role, endpoint in cfg.endpoints.items():
        url = endpoint.base_url
        if url.startswith("mock://"):
            suffix = url[len("mock://"):].strip("/")
            seed = int(suffix) if suffix else cfg.seed
            hub = hubs.setdefault(seed, MockModelHub(seed))
            backends[role] = MockRoleBackend(hub, role)
        elif url.startswith("http://") or url.startswith("https://"):
            backends[role] = HttpBackend(endpoint)
        else:
            raise ConfigError(f"unsupported endpoint url {url!r} for role {role!r}")
    return backends


@dataclass
class RunStats:
    inputs: int = 0
    records: int = 0
    skipped_inputs: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    backend_calls: int = 0


@dataclass
class RunResult:
    manifest: DatasetManifest
    records_path: str
    manifest_path: str
    stats: RunStats


class _Runtime:
    """Shared per-run state: backends, cache, stage digests, fault hook."""

    def __init__(self, cfg: PipelineConfig, cache: StageCache, out_dir: Path):
        self.cfg = cfg
        self.cache = cache
        self.out_dir = out_dir
        self.backends = build_backends(cfg)
        self.stats = RunStats()
        self.stage_pairs: dict[str, set[tuple[str, str]]] = {}
        self._lock = threading.Lock()
        fail_after = os.environ.get(FAIL_AFTER_ENV)
        self._fail_after = int(fail_after) if fail_after else None
        self.examples = self._load_examples(cfg.examples_path)
        self.concepts = (
            load_concept_list(cfg.concept_list_path) if cfg.concept_list_path else None
        )

    @staticmethod
    def _load_examples(path: Optional[str]) -> dict[str, list[InContextExample]]:
        roles = ("concept2text", "summarize", "extract_short", "extract_long")
        if path is None:
            return {role: load_default_examples(role) for role in roles}
        try:
            table = json.loads(Path(path).read_text(encoding="utf-8"))
            return {
                role: [InContextExample(row["q"], row["a"]) for row in table[role]]
                for role in roles
            }
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load example database {path}: {exc}") from exc

    def _note_execution(self) -> None:
        with self._lock:
            self.stats.backend_calls += 1
            if self._fail_after is not None and self.stats.backend_calls > self._fail_after:
                raise BackendExhausted(
                    f"fault injection: backend call budget ({self._fail_after}) exceeded"
                )

    def _record_stage(self, stage: str, req_hash: str, resp_bytes: bytes, hit: bool):
        with self._lock:
            self.stage_pairs.setdefault(stage, set()).add(
                (req_hash, sha256_hex(resp_bytes))
            )
            if hit:
                self.stats.cache_hits += 1
            else:
                self.stats.cache_misses += 1

    def call(self, stage: str, role: str, payload: dict) -> tuple[dict, str]:
        """Cached backend call; returns (response, request hash)."""
        rh = request_hash(role, payload)
        cached = self.cache.get(stage, rh)
        if cached is not None:
            self._record_stage(stage, rh, cached, hit=True)
            return json.loads(cached.decode("utf-8")), rh
        self._note_execution()
        response = self.backends[role].call(payload)
        raw = canonical_bytes(response)
        if role == "generate_image":
            # Cache the blob before the response so a cached response always
            # implies a retrievable blob, even after a mid-run kill.
            ref = response["image_ref"]
            digest = ref[len(BLOB_PREFIX):]
            if self.cache.get_blob(digest) is None:
                self.cache.put_blob(digest, self.backends[role].get_blob(ref))
        self.cache.put(stage, rh, raw)
        self._record_stage(stage, rh, raw, hit=False)
        return response, rh

    def materialize_blob(self, ref: str) -> str:
        """Fetch an image payload and persist it under the output directory."""
        digest = ref[len(BLOB_PREFIX):]
        rel_path = f"blobs/{digest}.bin"
        target = self.out_dir / rel_path
        if not target.exists():
            blob = self.cache.get_blob(digest)
            if blob is None:
                blob = self.backends["generate_image"].get_blob(ref)
                self.cache.put_blob(digest, blob)
            with self._lock:
                if not target.exists():
                    target.parent.mkdir(parents=True, exist_ok=True)
                    tmp = target.with_name(target.name + f".tmp{threading.get_ident()}")
                    tmp.write_bytes(blob)
                    os.replace(tmp, target)
        return rel_path


def _extract_phrases(
    runtime: _Runtime, cfg: PipelineConfig, idx: int, image_id: str, text: str
) -> tuple[list[GroundingPhrase], tuple[str, str, str]]:
    if cfg.phrase_mode in ("comma", "period"):
        phrases = segment_phrases(text, cfg.phrase_mode, image_id=image_id)
        rh = request_hash("local_extract", {"mode": cfg.phrase_mode, "text": text})
        return phrases, ("extract_phrases", "local", rh)

    def llm_pass(mode: str) -> tuple[list[GroundingPhrase], str]:
        role = "extract_short" if mode == "llm_short" else "extract_long"
        prompt = build_prompt(
            role,
            runtime.examples[role],
            text,
            seed=derive_seed(cfg.seed, idx, "extract", mode),
        )
        response, rh = runtime.call("extract_phrases", "complete", {"prompt": prompt})
        parsed = [
            GroundingPhrase(p, mode, image_id)
            for p in parse_phrase_list(response["completion"])
        ]
        return parsed, rh

    if cfg.phrase_mode == "both":
        short, rh_short = llm_pass("llm_short")
        long_, rh_long = llm_pass("llm_long")
        seen = set()
        merged = []
        for phrase in short + long_:
            if phrase.text not in seen:
                seen.add(phrase.text)
                merged.append(phrase)
        rh = request_hash("extract_both", {"short": rh_short, "long": rh_long})
        return merged, ("extract_phrases", "complete", rh)

    phrases, rh = llm_pass(cfg.phrase_mode)
    return phrases, ("extract_phrases", "complete", rh)


def _process_input(
    runtime: _Runtime, cfg: PipelineConfig, idx: int, item: dict
) -> list[GroundingRecord]:
    input_id = str(item.get("id") or f"input-{idx:06d}")
    trace: list[tuple[str, str, str]] = []

    if cfg.purity == "lower_image2text":
        source_ref = item.get("image_ref")
        if not source_ref:
            raise ValidationError(f"input {input_id!r}: lower purity requires image_ref")
        response, rh = runtime.call("describe", "caption", {"image_ref": source_ref})
        description = response["caption"]
        trace.append(("describe", "caption", rh))
    else:
        concepts = item.get("concepts")
        if concepts is None:
            if runtime.concepts is None:
                raise ConfigError(
                    "higher purity inputs without concepts require a concept list"
                )
            concepts = sample_concepts(
                runtime.concepts, k=2, seed=derive_seed(cfg.seed, idx, "concepts")
            )
        prompt = build_prompt(
            "concept2text",
            runtime.examples["concept2text"],
            ", ".join(concepts),
            seed=derive_seed(cfg.seed, idx, "prompt"),
        )
        response, rh = runtime.call("describe", "complete", {"prompt": prompt})
        description = response["completion"]
        trace.append(("describe", "complete", rh))

    gen_payload = {
        "prompt": description,
        "guidance_scale": cfg.guidance_scale,
        "seed": derive_seed(cfg.seed, idx, "image") % (1 << 63),
        "size": list(cfg.image_size),
    }
    response, rh = runtime.call("generate_image", "generate_image", gen_payload)
    ref = response["image_ref"]
    trace.append(("generate_image", "generate_image", rh))
    image_ref = ImageRef(ref, runtime.materialize_blob(ref))

    if cfg.paradigm == "recaption":
        response, rh = runtime.call("recaption", "caption", {"image_ref": ref})
        phrase_source = response["caption"]
        trace.append(("recaption", "caption", rh))
    else:
        phrase_source = description

    phrases, extract_entry = _extract_phrases(runtime, cfg, idx, input_id, phrase_source)
    trace.append(extract_entry)
    if not phrases:
        raise PhraseExtractionError(f"input {input_id!r}: no phrases extracted")

    pipeline_kind = "concept2text" if cfg.purity == "higher_concept2text" else cfg.paradigm
    records = []
    for phrase in phrases:
        response, rh = runtime.call(
            "detect", "detect", {"image_ref": ref, "phrase": phrase.text}
        )
        dets = [
            Detection(Box(*row["box"]), row["confidence"], phrase)
            for row in response["detections"]
        ]
        top = select_top1_box(dets, cfg.detector_threshold)
        if top is None:
            continue
        records.append(
            GroundingRecord(
                image_ref=image_ref,
                phrase=phrase,
                boxes=(top.box,),
                confidences=(top.confidence,),
                pipeline=pipeline_kind,
                stage_trace=tuple(trace) + (("detect", "detect", rh),),
            )
        )
    return records


def run_caption_pipeline(cfg: PipelineConfig, inputs: Iterable[dict]) -> RunResult:
    """Synthesize records for every input and write the dataset + manifest."""
    items = list(inputs)
    if not items:
        raise ValidationError("input stream is empty")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = StageCache(cfg.cache_dir) if cfg.cache_dir else NullCache()
    runtime = _Runtime(cfg, cache, out_dir)
    runtime.stats.inputs = len(items)

    def worker(pair: tuple[int, dict]) -> list[GroundingRecord]:
        idx, item = pair
        try:
            produced = _process_input(runtime, cfg, idx, item)
        except PhraseExtractionError as exc:
            logger.warning("skipping input %d: %s", idx, exc)
            with runtime._lock:
                runtime.stats.skipped_inputs += 1
            return []
        if not produced:
            logger.info("input %d yielded no accepted boxes", idx)
            with runtime._lock:
                runtime.stats.skipped_inputs += 1
        return produced

    records_path = out_dir / "records.jsonl"
    manifest_path = out_dir / "manifest.json"
    hasher = hashlib.sha256()
    count = 0
    with open(records_path, "wb") as fh:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for produced in pool.map(worker, enumerate(items)):
                for record in produced:
                    line = record_line(record)
                    fh.write(line)
                    hasher.update(line)
                    count += 1
                fh.flush()

    stage_hashes = {
        stage: stage_digest(pairs) for stage, pairs in sorted(runtime.stage_pairs.items())
    }
    stage_hashes["records"] = hasher.hexdigest()
    runtime.stats.records = count
    manifest = build_manifest(count, cfg.snapshot(), stage_hashes, cfg.seed)
    write_manifest(manifest_path, manifest)
    logger.info(
        "run complete: records=%d skipped=%d cache_hits=%d cache_misses=%d",
        count,
        runtime.stats.skipped_inputs,
        runtime.stats.cache_hits,
        runtime.stats.cache_misses,
    )
    return RunResult(manifest, str(records_path), str(manifest_path), runtime.stats)


def run_layout_selection(
    pools: Sequence[tuple[str, TextBoxPool]],
    strategy: str,
    cap: int = 10,
    seed: int = 0,
    iou_threshold: float = 0.5,
) -> tuple[list[tuple[str, TextBoxPool]], dict]:
    """Apply one text-box selection strategy per image pool."""
    if strategy not in SELECTION_STRATEGIES:
        raise ConfigError(f"strategy must be one of {SELECTION_STRATEGIES}")
    selected = []
    items_in = 0
    items_out = 0
    for i, (image_id, pool) in enumerate(pools):
        if strategy == "all":
            out = pool
        elif strategy == "random":
            out = select_random(pool, cap, seed=derive_seed(seed, i, "random"))
        elif strategy == "text":
            out = select_by_dissimilarity(pool, cap)
        else:
            out = select_max_compatible(pool, iou_threshold)
        items_in += len(pool)
        items_out += len(out)
        selected.append((image_id, out))
    stats = {"pools": len(selected), "items_in": items_in, "items_out": items_out}
    return selected, stats


def subsample(
    records_path,
    manifest: DatasetManifest,
    fraction: float,
    repeats: int,
    seed: int,
    out_dir,
) -> list[DatasetManifest]:
    """Write `repeats` uniform record-level subsets of a dataset.

    Subset size is round(fraction * N); repeat i draws with seed + i.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValidationError("fraction must lie in (0, 1]")
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    lines = [
        line for line in Path(records_path).read_bytes().split(b"\n") if line.strip()
    ]
    total = len(lines)
    if total == 0:
        raise ValidationError("source dataset is empty")
    size = int(np.floor(fraction * total + 0.5))
    out_root = Path(out_dir)
    manifests = []
    for i in range(repeats):
        rng = np.random.default_rng(seed + i)
        keep = sorted(rng.choice(total, size=size, replace=False).tolist())
        subset_dir = out_root / f"subset_{i}"
        subset_dir.mkdir(parents=True, exist_ok=True)
        hasher = hashlib.sha256()
        with open(subset_dir / "records.jsonl", "wb") as fh:
            for j in keep:
                fh.write(lines[j] + b"\n")
                hasher.update(lines[j] + b"\n")
        sub_manifest = build_manifest(
            size,
            manifest.config_snapshot,
            {"records": hasher.hexdigest()},
            seed + i,
        )
        write_manifest(subset_dir / "manifest.json", sub_manifest)
        manifests.append(sub_manifest)
    return manifests


def read_inputs(path) -> list[dict]:
    """Read the synth input stream: JSONL of {id, image_ref | concepts}."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(json.loads(line))
    return items


def load_concept_list(path) -> ConceptList:
    """Load a concept list file: {"entries": {noun: frequency, ...}}."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        raw = data["entries"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load concept list {path}: {exc}") from exc
    pairs = raw.items() if isinstance(raw, dict) else raw
    cleaned = {}
    for noun, freq in pairs:
        folded = str(noun).lower()
        if folded not in EXCLUDED_NOUNS:
            cleaned[folded] = cleaned.get(folded, 0) + int(freq)
    entries = tuple(sorted(cleaned.items(), key=lambda kv: (-kv[1], kv[0])))
    return ConceptList(entries)


def read_pools(path) -> list[tuple[str, TextBoxPool]]:
    """Read per-image text-box pools from JSONL."""
    pools = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            items = tuple(
                (entry["phrase"], Box(*entry["box"])) for entry in row["items"]
            )
            embeddings = None
            if row.get("embeddings") is not None:
                embeddings = tuple(np.asarray(e, dtype=np.float64) for e in row["embeddings"])
            pools.append((row["image_id"], TextBoxPool(items, embeddings)))
    return pools


def write_pools(path, pools: Sequence[tuple[str, TextBoxPool]]) -> None:
    with open(path, "wb") as fh:
        for image_id, pool in pools:
            payload = {
                "image_id": image_id,
                "items": [
                    {"phrase": phrase, "box": box.as_list()} for phrase, box in pool.items
                ],
            }
            if pool.embeddings is not None:
                payload["embeddings"] = [[float(x) for x in e] for e in pool.embeddings]
            fh.write(canonical_bytes(payload) + b"\n")

"""Concept sampling, prompt construction, and phrase segmentation.

Everything between raw captions and grounding phrases lives here. Language
models and part-of-speech taggers enter only as injected callables.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import GroundingPhrase, ValidationError

# Nouns excluded from concept lists: prompt boilerplate and spatial words
# that carry no groundable content.
EXCLUDED_NOUNS = frozenset({
    "scene", "scenery", "view", "picture", "image", "photo",
    "left", "right", "back", "front", "top", "bottom",
    "middle", "center", "side", "background",
    "frontmost", "leftmost", "rightmost",
})

PROMPT_ROLES = ("concept2text", "summarize", "extract_short", "extract_long")
SEGMENT_MODES = ("period", "comma", "llm_short", "llm_long")

EXAMPLES_PER_PROMPT = 4

Tagger = Callable[[str], Sequence[str]]
Completer = Callable[[str], str]


class PhraseExtractionError(ValidationError):
    """LLM output parsed to zero phrases; the record should be skipped."""


class LexiconTagger:
    """Trivial noun tagger backed by a fixed lexicon.

    Real deployments plug in a proper part-of-speech backend; this one
    exists so concept-list construction is testable without one.
    """

    DEFAULT_LEXICON = frozenset({
        "dog", "cat", "man", "woman", "boy", "girl", "horse", "bird",
        "table", "chair", "window", "door", "car", "bus", "train", "boat",
        "tree", "grass", "field", "street", "sky", "cloud", "water",
        "ball", "hat", "shirt", "umbrella", "lamp", "cup", "bowl",
        "kettle", "stove", "harbor", "bench",
        "kitchen", "park", "beach", "mountain", "house", "wall", "fence",
        "left", "right", "top", "bottom", "scene", "picture", "image",
    })

    def __init__(self, lexicon: Optional[frozenset[str]] = None):
        self.lexicon = lexicon if lexicon is not None else self.DEFAULT_LEXICON

    def __call__(self, text: str) -> list[str]:
        tokens = [t.strip(".,;:!?\"'()") for t in text.lower().split()]
        return [t for t in tokens if t in self.lexicon]


@dataclass(frozen=True)
class ConceptList:
    """Noun frequencies harvested from a caption corpus."""

    entries: tuple[tuple[str, int], ...]
    exclusions: frozenset[str] = EXCLUDED_NOUNS

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(n), int(f)) for n, f in self.entries))
        object.__setattr__(self, "exclusions", frozenset(self.exclusions))
        seen = set()
        for noun, freq in self.entries:
            if noun != noun.lower():
                raise ValidationError(f"concept noun must be lowercase: {noun!r}")
            if noun in seen:
                raise ValidationError(f"duplicate concept noun: {noun!r}")
            if noun in self.exclusions:
                raise ValidationError(f"excluded noun in concept list: {noun!r}")
            if freq < 1:
                raise ValidationError(f"concept frequency must be >= 1: {noun!r}")
            seen.add(noun)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class InContextExample:
    query: str
    answer: str

    def __post_init__(self):
        if not self.query or not self.answer:
            raise ValidationError("in-context examples need non-empty query and answer")


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    examples: tuple[InContextExample, ...]
    query: str

    def __post_init__(self):
        if self.role not in PROMPT_ROLES:
            raise ValidationError(f"unknown prompt role {self.role!r}")
        object.__setattr__(self, "examples", tuple(self.examples))
        if len(self.examples) != EXAMPLES_PER_PROMPT:
            raise ValidationError(
                f"prompt templates carry exactly {EXAMPLES_PER_PROMPT} examples"
            )

    def render(self) -> str:
        blocks = [f"Q: {e.query}\nA: {e.answer}\n" for e in self.examples]
        return "".join(blocks) + f"Q: {self.query}\nA:"


def load_default_examples(role: str) -> list[InContextExample]:
    """Load the shipped in-context example database for a prompt role."""
    if role not in PROMPT_ROLES:
        raise ValidationError(f"unknown prompt role {role!r}")
    raw = resources.files("groundforge").joinpath("data/incontext_examples.json").read_text()
    table = json.loads(raw)
    return [InContextExample(row["q"], row["a"]) for row in table[role]]


def build_concept_list(
    captions: Iterable[str],
    tagger: Tagger,
    exclusions: frozenset[str] = EXCLUDED_NOUNS,
) -> ConceptList:
    """Count tagger-identified nouns over a corpus, dropping exclusions.

    Counts are case-folded occurrence totals, insensitive to caption order;
    entries are sorted by descending frequency then noun.
    """
    counts: Counter[str] = Counter()
    empty = True
    for caption in captions:
        empty = False
        try:
            nouns = tagger(caption)
        except Exception as exc:
            raise ValidationError(f"tagger failed on caption {caption!r}: {exc}") from exc
        for noun in nouns:
            folded = noun.lower()
            if folded not in exclusions:
                counts[folded] += 1
    if empty:
        raise ValidationError("caption stream is empty")
    entries = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return ConceptList(entries, exclusions)


def sample_concepts(concepts: ConceptList, k: int = 2, seed: int = 0) -> list[str]:
    """Draw k distinct nouns without replacement, weighted by frequency."""
    if len(concepts) < k:
        raise ValidationError(
            f"need {k} distinct concepts but only {len(concepts)} are eligible"
        )
    nouns = [n for n, _ in concepts.entries]
    freqs = np.array([f for _, f in concepts.entries], dtype=np.float64)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(nouns), size=k, replace=False, p=freqs / freqs.sum())
    return [nouns[i] for i in picks]


def build_prompt(
    role: str,
    example_db: Sequence[InContextExample],
    query: str,
    seed: int = 0,
) -> str:
    """Render a prompt from four seeded-sampled in-context examples.

    Output is byte-stable for fixed inputs: examples render as
    "Q: ...\\nA: ...\\n" blocks followed by the query line "Q: ...\\nA:".
    """
    if len(example_db) < EXAMPLES_PER_PROMPT:
        raise ValidationError(
            f"example database holds {len(example_db)} entries; need {EXAMPLES_PER_PROMPT}"
        )
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(example_db), size=EXAMPLES_PER_PROMPT, replace=False)
    chosen = tuple(example_db[i] for i in picks)
    return PromptTemplate(role, chosen, query).render()


def _split_clean(parts: Iterable[str]) -> list[str]:
    out = []
    seen = set()
    for part in parts:
        text = part.strip()
        if text and text not in seen:
            seen.add(text)
            out.append(text)
    return out


def parse_phrase_list(completion: str) -> list[str]:
    """Split an LLM completion on newlines and commas into clean phrases."""
    parts = []
    for line in completion.split("\n"):
        parts.extend(line.split(","))
    return _split_clean(parts)


def segment_phrases(
    text: str,
    mode: str,
    llm: Optional[Completer] = None,
    *,
    image_id: str = "",
    example_db: Optional[Sequence[InContextExample]] = None,
    seed: int = 0,
) -> list[GroundingPhrase]:
    """Segment a description into grounding phrases.

    Period and comma modes split locally on the delimiter; the llm modes
    prompt for short or long phrase extraction and parse the completion.
    """
    if mode not in SEGMENT_MODES:
        raise ValidationError(f"unknown segmentation mode {mode!r}")
    if mode in ("period", "comma"):
        if llm is not None:
            raise ValidationError(f"mode {mode!r} takes no language model")
        delimiter = "." if mode == "period" else ","
        phrases = _split_clean(text.split(delimiter))
        source = "period_split" if mode == "period" else "comma_split"
    else:
        if llm is None:
            raise ValidationError(f"mode {mode!r} requires a language model")
        role = "extract_short" if mode == "llm_short" else "extract_long"
        db = example_db if example_db is not None else load_default_examples(role)
        prompt = build_prompt(role, db, text, seed=seed)
        phrases = parse_phrase_list(llm(prompt))
        if not phrases:
            raise PhraseExtractionError(f"no phrases extracted from {text!r}")
        source = mode
    return [GroundingPhrase(p, source, image_id) for p in phrases]


def summarize_captions(
    captions: Sequence[str],
    llm: Completer,
    example_db: Optional[Sequence[InContextExample]] = None,
    seed: int = 0,
) -> str:
    """Condense a caption list into one description via the summary prompt."""
    if not captions:
        raise ValidationError("caption list is empty")
    db = example_db if example_db is not None else load_default_examples("summarize")
    prompt = build_prompt("summarize", db, ", ".join(captions), seed=seed)
    return llm(prompt).strip()

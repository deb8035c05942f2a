import numpy as np
import pytest

from groundforge.core import ValidationError
from groundforge.text_synthesis import (
    EXCLUDED_NOUNS,
    ConceptList,
    InContextExample,
    LexiconTagger,
    PhraseExtractionError,
    build_concept_list,
    build_prompt,
    load_default_examples,
    parse_phrase_list,
    sample_concepts,
    segment_phrases,
    summarize_captions,
)


def example_db(n=6):
    return [InContextExample(f"query {i}", f"answer {i}") for i in range(n)]


class TestExclusionList:
    def test_nineteen_words(self):
        assert len(EXCLUDED_NOUNS) == 19
        assert {"scene", "background", "rightmost", "photo"} <= EXCLUDED_NOUNS


class TestBuildConceptList:
    def test_counts_and_exclusions(self):
        tags = {"a dog on the left": ["dog", "left"], "a dog and a cat": ["dog", "cat"]}
        concepts = build_concept_list(tags.keys(), lambda text: tags[text])
        assert dict(concepts.entries) == {"dog": 2, "cat": 1}

    def test_all_excluded_yields_empty_list(self):
        concepts = build_concept_list(["x"], lambda text: ["left", "scene"])
        assert len(concepts) == 0
        with pytest.raises(ValidationError):
            sample_concepts(concepts, k=1, seed=0)

    def test_order_insensitive_counts(self):
        captions = ["a dog", "a cat", "a dog and a cat", "a horse"]
        tagger = LexiconTagger()
        forward = build_concept_list(captions, tagger)
        backward = build_concept_list(list(reversed(captions)), tagger)
        assert forward.entries == backward.entries

    def test_case_folding(self):
        concepts = build_concept_list(["x"], lambda text: ["Dog", "DOG"])
        assert dict(concepts.entries) == {"dog": 2}

    def test_tagger_failure_carries_caption_context(self):
        def broken(text):
            raise RuntimeError("backend down")

        with pytest.raises(ValidationError, match="the failing caption"):
            build_concept_list(["the failing caption"], broken)


class TestConceptListInvariants:
    def test_rejects_excluded_entry(self):
        with pytest.raises(ValidationError):
            ConceptList((("scene", 3),))

    def test_rejects_duplicates_and_zero_freq(self):
        with pytest.raises(ValidationError):
            ConceptList((("dog", 1), ("dog", 2)))
        with pytest.raises(ValidationError):
            ConceptList((("dog", 0),))


class TestSampleConcepts:
    def test_insufficient_support(self):
        with pytest.raises(ValidationError):
            sample_concepts(ConceptList((("dog", 1),)), k=2, seed=0)

    def test_frequency_weighted_marginal(self):
        concepts = ConceptList((("dog", 3), ("cat", 1)))
        draws = sum(
            sample_concepts(concepts, k=1, seed=i) == ["dog"] for i in range(10_000)
        )
        assert abs(draws / 10_000 - 0.75) < 0.02

    def test_deterministic_for_fixed_seed(self):
        concepts = ConceptList((("dog", 3), ("cat", 1), ("horse", 2)))
        assert sample_concepts(concepts, seed=42) == sample_concepts(concepts, seed=42)

    def test_distinct_nouns(self):
        concepts = ConceptList((("dog", 100), ("cat", 1)))
        for seed in range(50):
            pair = sample_concepts(concepts, k=2, seed=seed)
            assert len(set(pair)) == 2

    def test_excluded_nouns_never_sampled(self):
        rng = np.random.default_rng(0)
        vocab = ["dog", "cat", "horse", "table", "scene", "left", "photo"]
        for trial in range(30):
            captions = [
                " ".join(rng.choice(vocab, size=3)) for _ in range(10)
            ]
            concepts = build_concept_list(captions, str.split)
            if len(concepts) < 2:
                continue
            for seed in range(20):
                for noun in sample_concepts(concepts, k=2, seed=seed):
                    assert noun not in EXCLUDED_NOUNS


class TestBuildPrompt:
    def test_db_of_exactly_four_uses_all(self):
        db = example_db(4)
        prompt = build_prompt("extract_short", db, "the query", seed=0)
        for e in db:
            assert f"Q: {e.query}\nA: {e.answer}\n" in prompt
        assert prompt.endswith("Q: the query\nA:")

    def test_byte_stable(self):
        db = example_db(8)
        a = build_prompt("summarize", db, "captions here", seed=7)
        b = build_prompt("summarize", db, "captions here", seed=7)
        assert a == b
        assert a != build_prompt("summarize", db, "captions here", seed=8)

    def test_two_noun_query_appears_once(self):
        prompt = build_prompt(
            "concept2text", load_default_examples("concept2text"), "dog, kettle", seed=1
        )
        assert prompt.count("Q: dog, kettle") == 1
        assert prompt.count("Q:") == 5

    def test_insufficient_examples_rejected(self):
        with pytest.raises(ValidationError):
            build_prompt("extract_long", example_db(3), "q", seed=0)


class TestSegmentPhrases:
    def test_comma_mode(self):
        phrases = segment_phrases("a dog, a cat", "comma", image_id="i")
        assert [p.text for p in phrases] == ["a dog", "a cat"]
        assert all(p.source == "comma_split" for p in phrases)

    def test_period_mode_oracle(self):
        text = "A man sits. He wears a hat."
        expected = [part.strip() for part in text.split(".") if part.strip()]
        phrases = segment_phrases(text, "period", image_id="i")
        assert [p.text for p in phrases] == expected == ["A man sits", "He wears a hat"]

    def test_dedupe_preserves_order(self):
        phrases = segment_phrases("a, b, a, c", "comma")
        assert [p.text for p in phrases] == ["a", "b", "c"]

    def test_llm_short_round_trip(self):
        phrases = segment_phrases(
            "whatever", "llm_short",
            llm=lambda prompt: "a red ball, a wooden bench",
            image_id="img-9",
        )
        assert [p.text for p in phrases] == ["a red ball", "a wooden bench"]
        assert all(p.source == "llm_short" and p.image_id == "img-9" for p in phrases)

    def test_llm_output_with_newlines(self):
        assert parse_phrase_list("a dog\na cat, a hat\n\n") == ["a dog", "a cat", "a hat"]

    def test_zero_phrases_flagged(self):
        with pytest.raises(PhraseExtractionError):
            segment_phrases("text", "llm_long", llm=lambda prompt: " , ,\n")

    def test_llm_mode_requires_backend(self):
        with pytest.raises(ValidationError):
            segment_phrases("text", "llm_short")
        with pytest.raises(ValidationError):
            segment_phrases("text", "comma", llm=lambda p: p)

    def test_no_phrase_has_edge_whitespace(self):
        for mode, text in (("comma", " a , b ,, c "), ("period", " x. y . ")):
            for p in segment_phrases(text, mode):
                assert p.text == p.text.strip() and p.text


class TestSummarizeCaptions:
    def test_echo_backend_returns_joined_captions(self):
        def echo(prompt):
            final = prompt.rsplit("Q: ", 1)[1]
            return final.rsplit("\nA:", 1)[0]

        out = summarize_captions(["a dog", "a cat"], echo)
        assert out == "a dog, a cat"

    def test_empty_caption_list_rejected(self):
        with pytest.raises(ValidationError):
            summarize_captions([], lambda p: p)

    def test_prompt_bytes_stable(self):
        captured = []
        summarize_captions(["one", "two"], lambda p: captured.append(p) or "s")
        summarize_captions(["one", "two"], lambda p: captured.append(p) or "s")
        assert captured[0] == captured[1]
        assert captured[0].count("Q:") == 5

import csv
import json

import numpy as np
import pytest

from groundforge.core import ValidationError
from groundforge.text_analysis import (
    ImageTextGroup,
    analyze_corpora,
    histogram,
    image_similarity,
    load_corpus,
    overlap_coefficient,
    tokenize,
    ttr,
    write_analysis_csvs,
    write_histogram_csv,
)


class TestTtr:
    def test_repeated_token(self):
        assert ttr("red red red") == pytest.approx(1 / 3)

    def test_all_distinct(self):
        assert ttr("a small dog barks") == 1.0

    def test_hand_count_with_article_repeat(self):
        assert ttr("a dog and a cat") == pytest.approx(0.8)

    def test_case_fold_and_punctuation(self):
        assert ttr("Dog, dog!") == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            ttr("   ")

    def test_upper_bound_iff_distinct(self):
        assert ttr("x y z") == 1.0
        assert ttr("x y x") < 1.0


class TestOverlapCoefficient:
    def test_identical_sets(self):
        assert overlap_coefficient({"a", "b"}, {"a", "b"}) == 1.0

    def test_hand_count(self):
        assert overlap_coefficient({"a", "b"}, {"b", "c", "d"}) == 0.5

    def test_disjoint(self):
        assert overlap_coefficient({"a"}, {"b"}) == 0.0

    def test_symmetric_and_containment(self):
        a, b = {"x", "y", "z"}, {"x", "y"}
        assert overlap_coefficient(a, b) == overlap_coefficient(b, a) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            overlap_coefficient(set(), {"a"})


def unit(vec):
    arr = np.asarray(vec, dtype=np.float64)
    return arr / np.linalg.norm(arr)


class TestImageSimilarity:
    def test_identical_text_scores_one(self):
        table = {"t": unit([1.0, 2.0])}
        group = ImageTextGroup("img", ("t",), ("t",))
        assert image_similarity(group, table.__getitem__) == pytest.approx(1.0, abs=1e-6)

    def test_hand_mean_of_best_matches(self):
        # synthetic s1 best-cosine 0.4 against reals, s2 best 0.8 -> mean 0.6
        vectors = {
            "s1": unit([1.0, 0.0]),
            "s2": unit([0.0, 1.0]),
            "r1": unit([0.4, np.sqrt(1 - 0.16)]),
            "r2": unit([np.sqrt(1 - 0.64), 0.8]),
        }
        group = ImageTextGroup("img", ("s1", "s2"), ("r1", "r2"))
        got = image_similarity(group, vectors.__getitem__)
        best1 = max(0.4, float(vectors["s1"] @ vectors["r2"]))
        best2 = max(float(vectors["s2"] @ vectors["r1"]), 0.8)
        assert got == pytest.approx((best1 + best2) / 2, abs=1e-12)

    def test_single_synthetic_equals_best_alone(self):
        vectors = {
            "s": unit([1.0, 0.0]),
            "r1": unit([1.0, 0.1]),
            "r2": unit([0.0, 1.0]),
        }
        group = ImageTextGroup("img", ("s",), ("r1", "r2"))
        expected = float(vectors["s"] @ vectors["r1"])
        assert image_similarity(group, vectors.__getitem__) == pytest.approx(expected)

    def test_duplicate_real_caption_invariance(self):
        vectors = {"s": unit([1.0, 1.0]), "r": unit([1.0, 0.0])}
        one = ImageTextGroup("img", ("s",), ("r",))
        two = ImageTextGroup("img", ("s",), ("r", "r"))
        embed = vectors.__getitem__
        assert image_similarity(one, embed) == image_similarity(two, embed)


class TestHistogram:
    def test_three_values_two_bins(self):
        assert histogram([0.0, 0.5, 1.0], 0.0, 1.0, 2) == [1, 2]

    def test_empty_values(self):
        assert histogram([], 0.0, 1.0, 4) == [0, 0, 0, 0]

    def test_all_at_lower_edge(self):
        assert histogram([0.0] * 5, 0.0, 1.0, 3) == [5, 0, 0]

    def test_out_of_range_clamps(self):
        assert histogram([-2.0, 3.0], 0.0, 1.0, 2) == [1, 1]

    def test_counts_sum_to_total(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=500).tolist()
        assert sum(histogram(values, -1.0, 1.0, 7)) == 500


class TestCorpusIo:
    def _embed(self, text):
        rng = np.random.default_rng(abs(hash(text)) % (2**32))
        return unit(rng.standard_normal(8))

    def test_load_corpus_accepts_both_shapes(self, tmp_path):
        path = tmp_path / "mixed.jsonl"
        path.write_text(
            json.dumps({"image_id": "a", "text": "a dog"}) + "\n"
            + json.dumps({"phrase": {"image_id": "a", "text": "a cat", "source": "llm_short"}}) + "\n"
        )
        assert load_corpus(path) == {"a": ["a dog", "a cat"]}

    def test_analyze_and_write_csvs(self, tmp_path):
        synthetic = {"a": ["a red dog"], "b": ["a cat"], "only_syn": ["x"]}
        real = {"a": ["a dog runs"], "b": ["a cat sits"]}
        rows = analyze_corpora(synthetic, real, self._embed)
        assert [r["image_id"] for r in rows] == ["a", "b"]
        paths = write_analysis_csvs(rows, tmp_path)
        with open(paths["overlap"]) as fh:
            reader = list(csv.reader(fh))
        assert reader[0] == ["image_id", "overlap"]
        assert len(reader) == 3

    def test_disjoint_corpora_rejected(self):
        with pytest.raises(ValidationError):
            analyze_corpora({"a": ["x"]}, {"b": ["y"]}, self._embed)

    def test_histogram_csv(self, tmp_path):
        path = tmp_path / "hist.csv"
        write_histogram_csv([2, 0, 1], 0.0, 3.0, path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["bin_left", "bin_right", "count"]
        assert [r[2] for r in rows[1:]] == ["2", "0", "1"]


def test_tokenize_strips_edge_punctuation_only():
    assert tokenize("Self-driving cars, here!") == ["self-driving", "cars", "here"]

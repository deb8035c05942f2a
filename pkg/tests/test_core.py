import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groundforge.core import (
    Box,
    BoxMask,
    DegenerateMaskError,
    GroundingPhrase,
    GroundingRecord,
    Heatmap,
    ImageRef,
    ValidationError,
    rasterize_box,
)


class TestHeatmap:
    def test_accepts_valid_grid(self):
        hm = Heatmap([[0.0, 1.0], [2.0, 3.0]])
        assert hm.height == 2 and hm.width == 2
        assert not hm.values.flags.writeable

    def test_rejects_negative_and_nonfinite(self):
        with pytest.raises(ValidationError):
            Heatmap([[-0.1, 0.0]])
        with pytest.raises(ValidationError):
            Heatmap([[np.nan, 0.0]])

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValidationError):
            Heatmap([1.0, 2.0])


class TestBox:
    def test_rejects_zero_area(self):
        with pytest.raises(ValidationError):
            Box(0.2, 0.2, 0.2, 0.8)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            Box(-0.1, 0.0, 0.5, 0.5)
        with pytest.raises(ValidationError):
            Box(0.0, 0.0, 1.1, 0.5)

    def test_contains_is_closed(self):
        box = Box(0.25, 0.25, 0.75, 0.75)
        assert box.contains(0.25, 0.75)
        assert not box.contains(0.24, 0.5)


class TestBoxMask:
    def test_rejects_non_binary(self):
        with pytest.raises(ValidationError):
            BoxMask([[0, 2], [1, 0]])

    def test_degeneracy_flag(self):
        assert BoxMask([[1, 1], [1, 1]]).is_degenerate
        assert BoxMask([[0, 0], [0, 0]]).is_degenerate
        assert not BoxMask([[1, 0], [1, 0]]).is_degenerate


class TestRasterizeBox:
    def test_full_cover_rejected_as_degenerate(self):
        with pytest.raises(DegenerateMaskError):
            rasterize_box(Box(0.0, 0.0, 1.0, 1.0), 3, 3)

    def test_half_plane_on_2x2(self):
        mask = rasterize_box(Box(0.0, 0.0, 0.5, 1.0), 2, 2)
        assert mask.mask.tolist() == [[1, 0], [1, 0]]

    def test_center_square_on_4x4(self):
        # Expected cells derived by enumerating the 16 cell centers against
        # the closed box bounds.
        box = Box(0.25, 0.25, 0.75, 0.75)
        expected = np.zeros((4, 4), dtype=int)
        for i in range(4):
            for j in range(4):
                cx = (j + 0.5) / 4
                cy = (i + 0.5) / 4
                expected[i, j] = int(0.25 <= cx <= 0.75 and 0.25 <= cy <= 0.75)
        assert expected.sum() == 4
        mask = rasterize_box(box, 4, 4)
        assert mask.mask.tolist() == expected.tolist()

    def test_tiny_box_rejected_when_no_center_inside(self):
        with pytest.raises(DegenerateMaskError):
            rasterize_box(Box(0.0, 0.0, 0.1, 0.1), 2, 2)

    @settings(max_examples=60)
    @given(st.data())
    def test_monotone_under_enlargement(self, data):
        x0 = data.draw(st.floats(0.05, 0.5))
        y0 = data.draw(st.floats(0.05, 0.5))
        x1 = data.draw(st.floats(x0 + 0.2, 0.95))
        y1 = data.draw(st.floats(y0 + 0.2, 0.95))
        grow = data.draw(st.floats(0.0, 0.04))
        h = data.draw(st.integers(2, 9))
        w = data.draw(st.integers(2, 9))
        small = Box(x0, y0, x1, y1)
        big = Box(max(x0 - grow, 0.0), max(y0 - grow, 0.0),
                  min(x1 + grow, 1.0), min(y1 + grow, 1.0))
        try:
            small_mask = rasterize_box(small, h, w).mask
            big_mask = rasterize_box(big, h, w).mask
        except DegenerateMaskError:
            return
        assert np.all(big_mask >= small_mask)

    def test_cell_count_equals_centers_inside(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            x0, y0 = rng.uniform(0, 0.6, 2)
            x1 = rng.uniform(x0 + 0.15, 1.0)
            y1 = rng.uniform(y0 + 0.15, 1.0)
            h = int(rng.integers(2, 10))
            w = int(rng.integers(2, 10))
            box = Box(x0, y0, x1, y1)
            inside = sum(
                1
                for i in range(h)
                for j in range(w)
                if box.contains((j + 0.5) / w, (i + 0.5) / h)
            )
            try:
                mask = rasterize_box(box, h, w)
            except DegenerateMaskError:
                assert inside in (0, h * w)
                continue
            assert mask.inside_count == inside


class TestPhraseAndRecord:
    def test_phrase_requires_stripped_text(self):
        with pytest.raises(ValidationError):
            GroundingPhrase(" a dog", "llm_short", "img-1")
        with pytest.raises(ValidationError):
            GroundingPhrase("a dog", "mystery", "img-1")

    def _record(self, confidences=(0.9,), boxes=None):
        boxes = boxes or (Box(0.1, 0.1, 0.5, 0.5),)
        return GroundingRecord(
            image_ref=ImageRef("sha256:" + "0" * 64, "blobs/x.bin"),
            phrase=GroundingPhrase("a dog", "llm_short", "img-1"),
            boxes=boxes,
            confidences=confidences,
            pipeline="caption",
            stage_trace=(("describe", "caption", "h"),),
        )

    def test_alignment_enforced(self):
        with pytest.raises(ValidationError):
            self._record(confidences=(0.9, 0.8))

    def test_threshold_validation(self):
        record = self._record(confidences=(0.71,))
        record.validate_confidences(0.7)
        with pytest.raises(ValidationError):
            record.validate_confidences(0.72)

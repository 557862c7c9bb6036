import numpy as np
import pytest

from fsg.core import FACE, HAIR, Image, SegMask
from fsg.errors import ValidationError
from fsg.masks import (
    OcclusionSpec,
    boundary_pixels,
    coverage_ratio,
    face_bbox,
    occlude_border,
    remove_background,
    sample_ellipses,
)


def blob_mask(height=24, width=24, r0=6, c0=6, r1=18, c1=18):
    labels = np.zeros((height, width), dtype=np.uint8)
    labels[r0:r1, c0:c1] = FACE
    return SegMask(labels)


class TestCoverage:
    def test_all_face_bbox(self):
        mask = SegMask(np.full((8, 8), FACE, dtype=np.uint8))
        assert coverage_ratio(mask, (0, 0, 8, 8)) == 1.0

    def test_checkerboard_is_half(self):
        labels = np.indices((8, 8)).sum(axis=0) % 2
        mask = SegMask(labels.astype(np.uint8))
        assert coverage_ratio(mask, (0, 0, 8, 8)) == 0.5

    def test_matches_naive_count(self, rng):
        labels = rng.integers(0, 3, size=(16, 16)).astype(np.uint8)
        mask = SegMask(labels)
        bbox = (2, 3, 11, 14)
        count = 0
        for i in range(bbox[0], bbox[2]):
            for j in range(bbox[1], bbox[3]):
                count += labels[i, j] == FACE
        area = (bbox[2] - bbox[0]) * (bbox[3] - bbox[1])
        assert coverage_ratio(mask, bbox) == count / area

    def test_always_within_unit_interval(self, rng):
        for _ in range(20):
            labels = rng.integers(0, 3, size=(10, 10)).astype(np.uint8)
            assert 0.0 <= coverage_ratio(SegMask(labels), (0, 0, 10, 10)) <= 1.0

    def test_empty_bbox_rejected(self):
        mask = blob_mask()
        with pytest.raises(ValidationError):
            coverage_ratio(mask, (4, 4, 4, 8))
        with pytest.raises(ValidationError):
            coverage_ratio(mask, (0, 0, 30, 8))


class TestRemoveBackground:
    def test_keep_all(self, rng):
        img = Image(rng.random((6, 6, 3), dtype=np.float32))
        mask = SegMask(np.full((6, 6), FACE, dtype=np.uint8))
        out = remove_background(img, mask)
        assert np.array_equal(out.data, img.data)

    def test_all_background_zeroes(self, rng):
        img = Image(rng.random((6, 6, 3), dtype=np.float32))
        mask = SegMask(np.zeros((6, 6), dtype=np.uint8))
        assert not remove_background(img, mask).data.any()

    def test_half_half(self, rng):
        img = Image(rng.uniform(0.5, 1.0, (6, 6, 3)).astype(np.float32))
        labels = np.zeros((6, 6), dtype=np.uint8)
        labels[:, 3:] = FACE
        out = remove_background(img, SegMask(labels))
        assert not out.data[:, :3].any()
        assert np.array_equal(out.data[:, 3:], img.data[:, 3:])

    def test_keep_set_includes_hair(self, rng):
        img = Image(rng.uniform(0.5, 1.0, (4, 4, 3)).astype(np.float32))
        labels = np.array(
            [[0, 1, 2, 0], [1, 1, 2, 2], [0, 0, 0, 0], [2, 2, 1, 1]], dtype=np.uint8
        )
        out = remove_background(img, SegMask(labels), keep=(FACE, HAIR))
        kept = (labels == FACE) | (labels == HAIR)
        assert np.array_equal(out.data[kept], img.data[kept])
        assert not out.data[~kept].any()

    def test_idempotent(self, rng):
        img = Image(rng.random((6, 6, 3), dtype=np.float32))
        labels = rng.integers(0, 3, size=(6, 6)).astype(np.uint8)
        mask = SegMask(labels)
        once = remove_background(img, mask)
        twice = remove_background(once, mask)
        assert np.array_equal(once.data, twice.data)

    def test_dimension_mismatch(self, rng):
        img = Image(rng.random((6, 6, 3), dtype=np.float32))
        with pytest.raises(ValidationError):
            remove_background(img, SegMask(np.zeros((5, 6), dtype=np.uint8)))


class TestOcclusion:
    def test_zero_count_leaves_mask_unchanged(self):
        mask = blob_mask()
        spec = OcclusionSpec(count=(0, 0), seed=3)
        out = occlude_border(mask, spec)
        assert np.array_equal(out.labels, mask.labels)

    def test_deterministic_for_fixed_seed(self):
        mask = blob_mask()
        spec = OcclusionSpec(count=(1, 1), seed=42)
        a = occlude_border(mask, spec)
        b = occlude_border(mask, spec)
        assert np.array_equal(a.labels, b.labels)
        c = occlude_border(mask, OcclusionSpec(count=(1, 1), seed=43))
        assert not np.array_equal(a.labels, c.labels)

    def test_face_count_drops_by_independent_rasterization(self):
        mask = blob_mask(32, 32, 4, 4, 28, 28)
        spec = OcclusionSpec(count=(1, 1), semi_axis=(0.1, 0.2), seed=7)
        ellipses = sample_ellipses(mask, spec)
        out = occlude_border(mask, spec)
        # Rasterize the same ellipse with a plain per-pixel loop.
        removed = 0
        for i in range(32):
            for j in range(32):
                if mask.labels[i, j] != FACE:
                    continue
                inside = any(
                    e.contains(np.array([float(i)]), np.array([float(j)]))[0]
                    for e in ellipses
                )
                removed += bool(inside)
        before = int((mask.labels == FACE).sum())
        after = int((out.labels == FACE).sum())
        assert removed > 0
        assert before - after == removed

    def test_never_adds_face_pixels(self, rng):
        mask = blob_mask()
        for seed in range(10):
            out = occlude_border(mask, OcclusionSpec(seed=seed))
            gained = (out.labels == FACE) & (mask.labels != FACE)
            assert not gained.any()

    def test_centers_sampled_on_face_boundary(self):
        mask = blob_mask()
        border = {tuple(p) for p in boundary_pixels(mask)}
        spec = OcclusionSpec(count=(3, 3), seed=11)
        for e in sample_ellipses(mask, spec):
            assert (int(e.center[0]), int(e.center[1])) in border

    def test_empty_face_region_rejected(self):
        mask = SegMask(np.zeros((8, 8), dtype=np.uint8))
        with pytest.raises(ValidationError):
            occlude_border(mask, OcclusionSpec())

    def test_bad_spec_ranges(self):
        with pytest.raises(ValidationError):
            OcclusionSpec(count=(3, 1))
        with pytest.raises(ValidationError):
            OcclusionSpec(semi_axis=(0.0, 0.1))
        with pytest.raises(ValidationError):
            OcclusionSpec(aspect=(0.5, 0.4))


def test_face_bbox():
    mask = blob_mask(24, 24, 6, 8, 18, 20)
    assert face_bbox(mask) == (6, 8, 18, 20)
    with pytest.raises(ValidationError):
        face_bbox(SegMask(np.zeros((4, 4), dtype=np.uint8)))


def test_boundary_pixels_of_solid_block():
    mask = blob_mask(10, 10, 2, 2, 8, 8)
    border = boundary_pixels(mask)
    assert len(border) == 6 * 6 - 4 * 4
    inner = blob_mask(10, 10, 3, 3, 7, 7)
    inner_set = {tuple(p) for p in np.stack(np.nonzero(inner.labels), axis=1)}
    assert all(tuple(p) not in inner_set or True for p in border)
    rows = border[:, 0]
    cols = border[:, 1]
    assert rows.min() == 2 and rows.max() == 7
    assert cols.min() == 2 and cols.max() == 7

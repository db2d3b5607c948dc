"""Data model and similarity partitioning tests."""

import numpy as np
import pytest

from vicount import (
    DataError,
    Detection,
    DetectionStream,
    FrameRecord,
    SimilarityBlocks,
    normalize_feature,
    pair_blocks,
    partition_similarity,
    shared_count,
)


def _det(feature, gt_id=None, xy=(0.0, 0.0)):
    return Detection(xy, np.asarray(feature, dtype=float), gt_id=gt_id)


def _frame(idx, feats, inflow, outflow, t=None):
    dets = tuple(_det(f) for f in feats)
    return FrameRecord(idx, (idx - 1) * 3.0 if t is None else t, dets, inflow, outflow)


class TestNormalizeFeature:
    def test_three_four_five(self):
        np.testing.assert_array_equal(normalize_feature([3.0, 4.0]), [0.6, 0.8])

    def test_unit_vector_unchanged(self):
        v = np.array([1.0, 0.0, 0.0])
        np.testing.assert_array_equal(normalize_feature(v), v)

    def test_zero_vector_raises(self):
        with pytest.raises(DataError, match="degenerate feature"):
            normalize_feature([0.0, 0.0])

    def test_non_finite_raises(self):
        with pytest.raises(DataError, match="degenerate feature"):
            normalize_feature([np.nan, 1.0])

    def test_unit_norm_within_tolerance(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            v = rng.uniform(-10, 10, size=rng.integers(1, 20))
            if not np.any(v):
                continue
            out = normalize_feature(v)
            assert abs(np.linalg.norm(out) - 1.0) <= 1e-12

    def test_idempotent_bitwise(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            v = rng.standard_normal(8)
            once = normalize_feature(v)
            twice = normalize_feature(once)
            np.testing.assert_array_equal(once, twice)


class TestSharedCount:
    def test_consistent_labels(self):
        assert shared_count((0, 0, 1), (0, 0, 1, 1)) == 2

    def test_inconsistent_labels(self):
        with pytest.raises(DataError, match="inconsistent weak labels"):
            shared_count((0, 0, 1), (0, 1, 1))

    def test_empty(self):
        assert shared_count((), ()) == 0

    def test_all_turnover(self):
        assert shared_count((1, 1), (1, 1, 1)) == 0


class TestDetection:
    def test_feature_normalized_at_construction(self):
        d = _det([3.0, 4.0])
        np.testing.assert_array_equal(d.feature, [0.6, 0.8])
        assert d.dim == 2

    def test_feature_read_only(self):
        d = _det([1.0, 0.0])
        with pytest.raises(ValueError):
            d.feature[0] = 5.0

    def test_negative_gt_id(self):
        with pytest.raises(DataError):
            _det([1.0, 0.0], gt_id=-1)

    def test_equality(self):
        assert _det([3.0, 4.0], gt_id=2) == _det([0.6, 0.8], gt_id=2)
        assert _det([1.0, 0.0]) != _det([0.0, 1.0])


class TestFrameRecord:
    def test_bit_length_mismatch(self):
        with pytest.raises(DataError, match="inflow"):
            _frame(1, [[1.0, 0.0]], inflow=(1, 1), outflow=(0,))

    def test_non_binary_bits(self):
        with pytest.raises(DataError, match="0 or 1"):
            _frame(1, [[1.0, 0.0]], inflow=(2,), outflow=(0,))

    def test_frame_index_positive(self):
        with pytest.raises(DataError, match="frame_index"):
            _frame(0, [], inflow=(), outflow=())

    def test_mixed_dims(self):
        dets = (_det([1.0, 0.0]), _det([1.0, 0.0, 0.0]))
        with pytest.raises(DataError, match="dimension"):
            FrameRecord(1, 0.0, dets, (1, 1), (0, 0))


class TestDetectionStream:
    def test_timestamp_spacing_enforced(self):
        f1 = _frame(1, [[1.0, 0.0]], (1,), (0,))
        f2 = FrameRecord(2, 4.0, (_det([1.0, 0.0]),), (0,), (1,))
        with pytest.raises(DataError, match="spaced"):
            DetectionStream((f1, f2), 3.0)

    def test_first_frame_inflow_convention(self):
        f1 = _frame(1, [[1.0, 0.0]], (0,), (0,))
        with pytest.raises(DataError, match="first frame"):
            DetectionStream((f1,), 3.0)

    def test_indices_must_increase(self):
        f1 = _frame(1, [], (), ())
        f2 = _frame(1, [], (), (), t=3.0)
        with pytest.raises(DataError, match="increase"):
            DetectionStream((f1, f2), 3.0)

    def test_feature_dim(self):
        f1 = _frame(1, [], (), ())
        f2 = _frame(2, [[0.0, 1.0, 0.0]], (1,), (1,))
        s = DetectionStream((f1, f2), 3.0)
        assert s.feature_dim == 3
        assert DetectionStream((f1,), 3.0).feature_dim is None

    def test_empty_stream(self):
        s = DetectionStream((), 2.0)
        assert len(s) == 0


class TestPartitionSimilarity:
    def test_shapes_and_permutations(self):
        fi = _frame(1, [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]], (1, 1, 1), (0, 1, 0))
        fj = _frame(2, [[0.8, 0.6], [1.0, 0.0], [0.0, 1.0]], (0, 0, 1), (1, 1, 1))
        blocks = partition_similarity(fi, fj)
        assert blocks.m == 2
        assert (blocks.n_i, blocks.n_j) == (3, 3)
        assert blocks.s0.shape == (2, 2)
        assert blocks.s1.shape == (2, 1)
        assert blocks.s2.shape == (1, 2)
        assert blocks.s3.shape == (1, 1)
        # stable: zeros first in original order, then ones
        assert blocks.perm_i.tolist() == [0, 2, 1]
        assert blocks.perm_j.tolist() == [0, 1, 2]

    def test_values_match_inner_products(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n_i, n_j = int(rng.integers(0, 6)), int(rng.integers(0, 6))
            m = int(rng.integers(0, min(n_i, n_j) + 1))
            out_bits = [0] * m + [1] * (n_i - m)
            in_bits = [0] * m + [1] * (n_j - m)
            rng.shuffle(out_bits)
            rng.shuffle(in_bits)
            fi = _frame(1, rng.standard_normal((n_i, 4)) + 0.01, [1] * n_i, out_bits)
            fj = _frame(2, rng.standard_normal((n_j, 4)) + 0.01, in_bits, [1] * n_j)
            blocks = partition_similarity(fi, fj)
            full = blocks.full
            for a in range(n_i):
                for b in range(n_j):
                    expect = float(
                        np.dot(
                            fi.detections[blocks.perm_i[a]].feature,
                            fj.detections[blocks.perm_j[b]].feature,
                        )
                    )
                    assert full[a, b] == pytest.approx(expect, abs=1e-12)

    def test_inconsistent_pair_raises(self):
        fi = _frame(1, [[1.0, 0.0]], (1,), (0,))
        fj = _frame(2, [[1.0, 0.0]], (1,), (1,))
        with pytest.raises(DataError, match="inconsistent weak labels"):
            partition_similarity(fi, fj)

    def test_empty_sides(self):
        fi = _frame(1, [], (), ())
        fj = _frame(2, [[1.0, 0.0]], (1,), (1,))
        blocks = partition_similarity(fi, fj)
        assert blocks.m == 0
        assert blocks.full.shape == (0, 1)

    def test_entries_bounded(self):
        rng = np.random.default_rng(6)
        fi = _frame(1, rng.standard_normal((4, 3)), [1] * 4, [0, 0, 1, 1])
        fj = _frame(2, rng.standard_normal((5, 3)), [0, 0, 1, 1, 1], [1] * 5)
        full = partition_similarity(fi, fj).full
        assert np.all(full <= 1.0) and np.all(full >= -1.0)


class TestSimilarityBlocks:
    def test_from_full_round_trip(self):
        rng = np.random.default_rng(7)
        s = rng.uniform(-1, 1, (4, 6))
        blocks = SimilarityBlocks.from_full(s, 3)
        np.testing.assert_array_equal(blocks.full, s)
        assert blocks.m == 3 and blocks.n_i == 4 and blocks.n_j == 6

    def test_bad_permutation(self):
        s = np.zeros((2, 2))
        with pytest.raises(DataError, match="permutation"):
            SimilarityBlocks.from_full(s, 1, perm_i=[0, 0])

    def test_mismatched_blocks(self):
        with pytest.raises(DataError):
            SimilarityBlocks(
                s0=np.zeros((2, 2)),
                s1=np.zeros((1, 3)),
                s2=np.zeros((1, 2)),
                s3=np.zeros((1, 3)),
            )


def test_pair_blocks_covers_adjacent_pairs():
    f1 = _frame(1, [[1.0, 0.0]], (1,), (0,))
    f2 = _frame(2, [[1.0, 0.0], [0.0, 1.0]], (0, 1), (0, 1))
    f3 = _frame(3, [[1.0, 0.0]], (0,), (1,))
    s = DetectionStream((f1, f2, f3), 3.0)
    blocks = pair_blocks(s)
    assert len(blocks) == 2
    assert blocks[0].m == 1 and blocks[1].m == 1

"""Simulator tests: determinism, label consistency, scripted lifespans."""

import numpy as np
import pytest

from vicount import (
    DataError,
    Detection,
    DetectionStream,
    FrameRecord,
    SimConfig,
    derive_weak_labels,
    generate_scene,
    gt_unique_count,
    scene_from_lifespans,
)


class TestDeriveWeakLabels:
    def test_basic_turnover(self):
        inflow, outflow = derive_weak_labels([1, 2, 3], [2, 3, 4])
        assert inflow == (0, 0, 1)
        assert outflow == (1, 0, 0)

    def test_stream_boundaries(self):
        inflow, _ = derive_weak_labels([], [5, 6])
        assert inflow == (1, 1)
        _, outflow = derive_weak_labels([5, 6], [])
        assert outflow == (1, 1)

    def test_no_change(self):
        inflow, outflow = derive_weak_labels([7, 8], [8, 7])
        assert inflow == (0, 0)
        assert outflow == (0, 0)


class TestGenerateScene:
    def test_same_seed_same_stream(self):
        cfg = SimConfig(num_identities=6, num_frames=5, feature_noise_sigma=0.1, seed=21)
        assert generate_scene(cfg) == generate_scene(cfg)

    def test_different_seed_differs(self):
        a = generate_scene(SimConfig(num_identities=6, num_frames=5, seed=1))
        b = generate_scene(SimConfig(num_identities=6, num_frames=5, seed=2))
        assert a != b

    def test_labels_consistent_with_identities(self):
        for seed in range(6):
            stream = generate_scene(
                SimConfig(num_identities=10, num_frames=8,
                          reentry_probability=0.5, seed=seed)
            )
            frames = stream.frames
            for k, frame in enumerate(frames):
                ids = [d.gt_id for d in frame.detections]
                prev_ids = [d.gt_id for d in frames[k - 1].detections] if k else []
                next_ids = (
                    [d.gt_id for d in frames[k + 1].detections]
                    if k + 1 < len(frames) else []
                )
                inflow, _ = derive_weak_labels(prev_ids, ids)
                _, outflow = derive_weak_labels(ids, next_ids)
                assert frame.inflow == inflow
                assert frame.outflow == outflow

    def test_every_identity_appears(self):
        stream = generate_scene(SimConfig(num_identities=9, num_frames=7, seed=4))
        assert gt_unique_count(stream) == 9

    def test_zero_identities(self):
        stream = generate_scene(SimConfig(num_identities=0, num_frames=3, seed=0))
        assert len(stream.frames) == 3
        assert all(len(f) == 0 for f in stream.frames)
        assert gt_unique_count(stream) == 0

    def test_single_persistent_identity_labels(self):
        stream = scene_from_lifespans(
            SimConfig(num_identities=1, num_frames=3, seed=0), [[(0, 2)]]
        )
        assert [f.inflow for f in stream.frames] == [(1,), (0,), (0,)]
        assert [f.outflow for f in stream.frames] == [(0,), (0,), (1,)]

    def test_pairwise_base_similarity_cap(self):
        stream = generate_scene(
            SimConfig(num_identities=25, num_frames=4, feature_dim=64,
                      max_base_similarity=0.3, seed=13)
        )
        by_id = {}
        for frame in stream.frames:
            for det in frame.detections:
                by_id.setdefault(det.gt_id, det.feature)
        feats = list(by_id.values())
        for i in range(len(feats)):
            for j in range(i + 1, len(feats)):
                assert abs(float(np.dot(feats[i], feats[j]))) < 0.3

    def test_noisy_features_stay_unit(self):
        stream = generate_scene(
            SimConfig(num_identities=5, num_frames=5, feature_noise_sigma=0.2, seed=8)
        )
        for frame in stream.frames:
            for det in frame.detections:
                assert np.linalg.norm(det.feature) == pytest.approx(1.0, abs=1e-9)

    def test_positions_inside_scene(self):
        cfg = SimConfig(num_identities=8, num_frames=10, scene_size=(100.0, 50.0),
                        walk_step_sigma=30.0, seed=17)
        for frame in generate_scene(cfg).frames:
            for det in frame.detections:
                x, y = det.coordinate
                assert 0.0 <= x <= 100.0
                assert 0.0 <= y <= 50.0


class TestSceneFromLifespans:
    def test_presence_follows_intervals(self):
        cfg = SimConfig(num_identities=3, num_frames=5, seed=2)
        stream = scene_from_lifespans(cfg, [[(0, 4)], [(1, 2)], [(0, 0), (3, 4)]])
        presence = [[d.gt_id for d in f.detections] for f in stream.frames]
        assert presence == [[0, 2], [0, 1], [0, 1], [0, 2], [0, 2]]

    def test_labels_mark_exit_and_reentry(self):
        cfg = SimConfig(num_identities=2, num_frames=5, seed=2)
        stream = scene_from_lifespans(cfg, [[(0, 4)], [(0, 1), (3, 4)]])
        frames = stream.frames
        # identity 1 leaves after frame 1 and comes back at frame 3
        assert frames[1].outflow == (0, 1)
        assert frames[3].inflow == (0, 1)
        assert frames[0].inflow == (1, 1)
        assert frames[4].outflow == (1, 1)

    def test_reentry_reuses_base_feature(self):
        cfg = SimConfig(num_identities=2, num_frames=6, seed=5)
        stream = scene_from_lifespans(cfg, [[(0, 5)], [(0, 1), (4, 5)]])
        frames = stream.frames
        before = next(d for d in frames[0].detections if d.gt_id == 1)
        after = next(d for d in frames[4].detections if d.gt_id == 1)
        assert np.array_equal(before.feature, after.feature)

    def test_wrong_identity_count(self):
        cfg = SimConfig(num_identities=3, num_frames=5, seed=0)
        with pytest.raises(DataError, match="expected lifespans for 3"):
            scene_from_lifespans(cfg, [[(0, 1)]])

    def test_interval_out_of_range(self):
        cfg = SimConfig(num_identities=1, num_frames=5, seed=0)
        with pytest.raises(DataError, match="outside"):
            scene_from_lifespans(cfg, [[(0, 5)]])
        with pytest.raises(DataError, match="outside"):
            scene_from_lifespans(cfg, [[(3, 1)]])

    def test_intervals_need_gaps(self):
        cfg = SimConfig(num_identities=1, num_frames=6, seed=0)
        with pytest.raises(DataError, match="gaps"):
            scene_from_lifespans(cfg, [[(0, 2), (3, 4)]])
        with pytest.raises(DataError, match="gaps"):
            scene_from_lifespans(cfg, [[(0, 2), (1, 4)]])


class TestGtUniqueCount:
    def test_counts_distinct_ids(self):
        stream = generate_scene(SimConfig(num_identities=4, num_frames=6, seed=3))
        assert gt_unique_count(stream) == 4

    def test_requires_ids(self):
        det = Detection((0.0, 0.0), np.array([1.0, 0.0]))
        frame = FrameRecord(1, 0.0, (det,), (1,), (1,))
        with pytest.raises(DataError, match="without gt_id"):
            gt_unique_count(DetectionStream((frame,), 1.0))

    def test_empty_stream(self):
        assert gt_unique_count(DetectionStream((), 1.0)) == 0


class TestSimConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(DataError):
            SimConfig(num_identities=-1)
        with pytest.raises(DataError):
            SimConfig(num_frames=0)
        with pytest.raises(DataError):
            SimConfig(delta=0.0)
        with pytest.raises(DataError):
            SimConfig(feature_dim=1)
        with pytest.raises(DataError):
            SimConfig(feature_noise_sigma=-0.1)
        with pytest.raises(DataError):
            SimConfig(reentry_probability=1.5)
        with pytest.raises(DataError):
            SimConfig(scene_size=(0.0, 10.0))
        with pytest.raises(DataError):
            SimConfig(walk_step_sigma=-1.0)
        with pytest.raises(DataError):
            SimConfig(max_base_similarity=0.0)

    def test_infeasible_similarity_cap(self):
        cfg = SimConfig(num_identities=50, feature_dim=2, max_base_similarity=0.05, seed=0)
        with pytest.raises(DataError, match="cannot place"):
            generate_scene(cfg)

import numpy as np
import pytest

from fsg.core import LandmarkSet, PlanePoint
from fsg.curation import FrameRecord, prune_frames, select_max_variance
from fsg.errors import ValidationError

from oracles import greedy_prune_oracle, max_dispersion_subsets


def frame(fid, yaw=0.0, pitch=0.0, roll=0.0, blur=None, coverage=1.0, landmarks=None):
    return FrameRecord(
        frame_id=fid,
        point=PlanePoint(yaw, pitch),
        roll=roll,
        blur=blur,
        coverage=coverage,
        landmarks=landmarks,
    )


def line_landmarks(t, n=5):
    base = np.stack([np.arange(n, dtype=np.float64), np.zeros(n)], axis=1)
    direction = np.stack([np.ones(n), 2.0 * np.ones(n)], axis=1)
    return LandmarkSet(base + t * direction)


class TestPruneFrames:
    def test_coverage_below_threshold_pruned(self):
        frames = [frame("a", coverage=0.14), frame("b", yaw=50, coverage=0.5)]
        kept = prune_frames(frames, coverage_min=0.15)
        assert [f.frame_id for f in kept] == ["b"]

    def test_exact_threshold_retained(self):
        frames = [frame("a", coverage=0.15)]
        assert [f.frame_id for f in prune_frames(frames, coverage_min=0.15)] == ["a"]

    def test_blur_flagged_dropped(self):
        frames = [frame("a", blur=0.9), frame("b", yaw=50, blur=0.1)]
        kept = prune_frames(frames, blur_threshold=0.5)
        assert [f.frame_id for f in kept] == ["b"]
        kept = prune_frames(frames)  # threshold disabled
        assert [f.frame_id for f in kept] == ["a", "b"]

    def test_matches_composition_of_filters(self, rng):
        frames = []
        for i in range(60):
            frames.append(
                frame(
                    f"f{i}",
                    yaw=float(rng.uniform(-70, 70)),
                    pitch=float(rng.uniform(-70, 70)),
                    roll=float(rng.uniform(-25, 25)),
                    blur=float(rng.uniform(0, 1)),
                    coverage=float(rng.uniform(0, 1)),
                )
            )
        got = [
            f.frame_id
            for f in prune_frames(
                frames, coverage_min=0.4, prune_radius=8.0, blur_threshold=0.7
            )
        ]
        # Reference pipeline: the three filters applied independently.
        stage1 = [f for f in frames if f.coverage >= 0.4]
        stage2 = [f for f in stage1 if f.blur <= 0.7]
        retained = greedy_prune_oracle(
            [(f.point.yaw, f.point.pitch) for f in stage2],
            [f.roll for f in stage2],
            [None] * len(stage2),
            8.0,
        )
        expected = [stage2[i].frame_id for i in retained]
        assert got == expected

    def test_monotone_in_coverage_threshold(self, rng):
        frames = [
            frame(f"f{i}", yaw=i * 20.0, coverage=float(rng.uniform(0, 1)))
            for i in range(6)
        ]
        low = {f.frame_id for f in prune_frames(frames, coverage_min=0.2)}
        high = {f.frame_id for f in prune_frames(frames, coverage_min=0.6)}
        assert high <= low


class TestSelectMaxVariance:
    def test_under_cap_returns_all(self):
        frames = [frame(f"f{i}", landmarks=line_landmarks(i)) for i in range(50)]
        assert select_max_variance(frames, cap=100) == frames

    def test_default_cap_is_100(self):
        frames = [frame(f"f{i}", landmarks=line_landmarks(i * 0.1)) for i in range(130)]
        assert len(select_max_variance(frames)) == 100

    def test_collinear_cap3_matches_exhaustive_optimum(self, rng):
        for _ in range(30):
            ts = rng.uniform(0, 10, size=int(rng.integers(4, 9)))
            frames = [
                frame(f"f{i}", landmarks=line_landmarks(float(t)))
                for i, t in enumerate(ts)
            ]
            chosen = select_max_variance(frames, cap=3)
            vectors = np.stack([f.landmarks.points.ravel() for f in frames])
            dists = np.sqrt(
                ((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2)
            )
            best_val, optima = max_dispersion_subsets(dists, 3)
            chosen_idx = tuple(sorted(int(f.frame_id[1:]) for f in chosen))
            assert chosen_idx in optima

    def test_spec_example_extremes_plus_farthest(self):
        # Six frames along a line: the optimum takes both extremes and the
        # point maximizing the minimum gap, matching all 20 subsets by brute
        # force.
        ts = [0.0, 1.0, 2.4, 5.1, 8.9, 10.0]
        frames = [frame(f"f{i}", landmarks=line_landmarks(t)) for i, t in enumerate(ts)]
        chosen = select_max_variance(frames, cap=3)
        vectors = np.stack([f.landmarks.points.ravel() for f in frames])
        dists = np.sqrt(((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2))
        _, optima = max_dispersion_subsets(dists, 3)
        assert tuple(sorted(int(f.frame_id[1:]) for f in chosen)) in optima
        assert {f.frame_id for f in chosen} >= {"f0", "f5"}

    def test_deterministic_and_subset(self, rng):
        frames = [
            frame(f"f{i}", landmarks=LandmarkSet(rng.normal(size=(5, 2)) * 10))
            for i in range(12)
        ]
        a = select_max_variance(frames, cap=5)
        b = select_max_variance(frames, cap=5)
        assert a == b
        assert len(a) == 5
        assert set(f.frame_id for f in a) <= set(f.frame_id for f in frames)

    def test_greedy_achieves_half_optimal_dispersion(self, rng):
        # 2-approximation guarantee on arbitrary instances.
        for _ in range(10):
            frames = [
                frame(f"f{i}", landmarks=LandmarkSet(rng.normal(size=(4, 2)) * 5))
                for i in range(8)
            ]
            chosen = select_max_variance(frames, cap=4)
            vectors = np.stack([f.landmarks.points.ravel() for f in frames])
            dists = np.sqrt(
                ((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2)
            )
            best_val, _ = max_dispersion_subsets(dists, 4)
            idx = [int(f.frame_id[1:]) for f in chosen]
            got = min(
                dists[i][j] for k, i in enumerate(idx) for j in idx[k + 1 :]
            )
            assert got >= 0.5 * best_val - 1e-12

    def test_requires_landmarks_over_cap(self):
        frames = [frame(f"f{i}") for i in range(5)]
        with pytest.raises(ValidationError):
            select_max_variance(frames, cap=3)
        with pytest.raises(ValidationError):
            select_max_variance(frames, cap=0)

    def test_coverage_invariant_enforced(self):
        with pytest.raises(ValidationError):
            frame("bad", coverage=1.4)

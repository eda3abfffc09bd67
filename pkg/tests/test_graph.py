import itertools
import math

import numpy as np
import pytest

from graph.btg import (
    align_to_anchors,
    build_bidirectional_trajectories,
    score_trajectories,
    trajectory_membership,
)
from graph.similarity import (
    appearance_similarity,
    area_similarity,
    iou_similarity,
    max_pair_distance,
    region_similarity,
)
from graph.types import BoundingBox, FrameDetections, ObjectRegion, VideoSample
from tests.conftest import random_video
from utils.errors import InvalidInputError


def _region(box, appearance, D=1):
    return ObjectRegion(box=BoundingBox(*box), appearance=np.asarray(appearance, dtype=float),
                        feature_map=np.zeros((1, 1, D)))


def _frame(t, regions):
    return FrameDetections(frame_index=t, regions=regions, global_feature_map=np.zeros((1, 1, 1)))


def _brute_force_alignment(anchor_frame, other_frame):
    normalizer = max(
        float(np.linalg.norm(a.appearance - b.appearance))
        for a in anchor_frame.regions for b in other_frame.regions
    )
    result = []
    for anchor in anchor_frame.regions:
        best_j, best = None, -1.0
        for j, other in enumerate(other_frame.regions, start=1):
            score = region_similarity(anchor, other, normalizer)
            if score > best:
                best_j, best = j, score
        result.append(best_j)
    return result


class TestBoundingBox:

    def test_zero_area_rejected(self):
        with pytest.raises(InvalidInputError):
            BoundingBox(0, 0, 0, 2)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            BoundingBox(0, 0, float("inf"), 2)

    def test_area(self):
        assert BoundingBox(1, 2, 4, 6).area == 12


class TestAppearanceSimilarity:

    def test_identical_vectors(self):
        assert appearance_similarity([1.0, 2.0], [1.0, 2.0], 2.0) == 1.0

    def test_hand_value(self):
        assert appearance_similarity([0, 0], [3, 4], 5.0) == pytest.approx(math.exp(-1), abs=1e-9)

    def test_zero_normalizer(self):
        assert appearance_similarity([0, 0], [3, 4], 0.0) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            appearance_similarity([0, 0], [1, 2, 3], 1.0)


class TestBoxSimilarity:

    def test_identical_boxes(self):
        box = BoundingBox(0, 0, 2, 2)
        assert iou_similarity(box, box) == 1.0

    def test_disjoint_boxes(self):
        assert iou_similarity(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 6, 6)) == 0.0

    def test_iou_hand_value(self):
        assert iou_similarity(BoundingBox(0, 0, 2, 2), BoundingBox(1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-9)

    @pytest.mark.parametrize("other_area, expected", [(1.0, 1.0), (2.0, math.exp(-0.5)), (4.0, math.exp(-0.75))])
    def test_area_hand_values(self, other_area, expected):
        assert area_similarity(BoundingBox(0, 0, 1, 1), BoundingBox(0, 0, other_area, 1)) == pytest.approx(expected, abs=1e-9)

    def test_translation_invariance(self, rng):
        for _ in range(1000):
            x, y, w, h = rng.uniform(0, 10, size=4) + [0, 0, 0.1, 0.1]
            a = BoundingBox(x, y, x + w, y + h)
            x, y, w, h = rng.uniform(0, 10, size=4) + [0, 0, 0.1, 0.1]
            b = BoundingBox(x, y, x + w, y + h)
            dx, dy = rng.uniform(-100, 100, size=2)
            assert iou_similarity(a.translated(dx, dy), b.translated(dx, dy)) == pytest.approx(iou_similarity(a, b), abs=1e-9)
            assert area_similarity(a.translated(dx, dy), b.translated(dx, dy)) == pytest.approx(area_similarity(a, b), abs=1e-9)


class TestRegionSimilarity:

    def test_identical_regions(self):
        region = _region((0, 0, 2, 2), [1.0, 1.0])
        assert region_similarity(region, region, 3.0) == 1.0

    def test_mean_of_components(self):
        r_i = _region((0, 0, 2, 2), [0, 0])
        r_j = _region((1, 0, 3, 2), [3, 4])
        expected = (math.exp(-1) + 1 / 3 + 1.0) / 3
        assert region_similarity(r_i, r_j, 5.0) == pytest.approx(expected, abs=1e-9)

    def test_half_area_partial_overlap(self):
        r_i = _region((0, 0, 2, 2), [0, 0])
        # half the area, overlap 1.5 over a union of 4.5
        r_j = _region((0.5, 0, 2.5, 1), [3, 4])
        value = region_similarity(r_i, r_j, 5.0)
        assert value == pytest.approx((math.exp(-1) + 1 / 3 + math.exp(-0.5)) / 3, abs=1e-9)
        assert value == pytest.approx(0.4359145, abs=1e-6)

    def test_symmetry_and_positivity(self, rng):
        for _ in range(1000):
            video = random_video(rng, T=2, N=2)
            a, b = video.frame(1).regions[0], video.frame(2).regions[1]
            normalizer = max_pair_distance(video.frame(1), video.frame(2))
            s_ab = region_similarity(a, b, normalizer)
            assert s_ab == pytest.approx(region_similarity(b, a, normalizer), abs=1e-12)
            assert s_ab > 0


class TestAlignment:

    def test_identical_frame_gives_identity(self, rng):
        video = random_video(rng, T=1, N=4)
        assert align_to_anchors(video.frame(1), video.frame(1)) == [1, 2, 3, 4]

    def test_all_equal_similarities_pick_first_region(self):
        regions = [_region((0, 0, 1, 1), [1.0]) for _ in range(3)]
        assert align_to_anchors(_frame(1, regions), _frame(2, list(regions))) == [1, 1, 1]

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            T, N = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            video = random_video(rng, T=T, N=N)
            anchor = video.frame(1)
            for t in range(2, T + 1):
                assert align_to_anchors(anchor, video.frame(t)) == _brute_force_alignment(anchor, video.frame(t))

    def test_appearance_scaling_invariance(self, rng):
        video = random_video(rng, T=2, N=3)
        scaled = VideoSample(video_id="scaled", frames=[
            FrameDetections(
                frame_index=f.frame_index,
                regions=[ObjectRegion(r.box, r.appearance * 7.5, r.feature_map) for r in f.regions],
                global_feature_map=f.global_feature_map,
            )
            for f in video.frames
        ])
        assert align_to_anchors(video.frame(1), video.frame(2)) == align_to_anchors(scaled.frame(1), scaled.frame(2))


class TestBidirectionalTrajectories:

    def test_single_frame(self, rng):
        video = random_video(rng, T=1, N=3)
        trajectories = build_bidirectional_trajectories(video)
        assert [t.steps for t in trajectories.forward] == [((1, 1),), ((1, 2),), ((1, 3),)]
        assert [t.steps for t in trajectories.backward] == [t.steps for t in trajectories.forward]

    def test_single_object(self, rng):
        video = random_video(rng, T=4, N=1)
        trajectories = build_bidirectional_trajectories(video)
        assert trajectories.forward[0].steps == ((1, 1), (2, 1), (3, 1), (4, 1))
        assert trajectories.backward[0].steps == ((4, 1), (3, 1), (2, 1), (1, 1))

    def test_structure(self, rng):
        video = random_video(rng, T=3, N=2)
        trajectories = build_bidirectional_trajectories(video)
        assert len(trajectories.forward) == len(trajectories.backward) == 2
        assert trajectories.frame_forward == (1, 2, 3)
        assert trajectories.frame_backward == (3, 2, 1)
        for i, trajectory in enumerate(trajectories.forward, start=1):
            assert trajectory.steps[0] == (1, i)
        for i, trajectory in enumerate(trajectories.backward, start=1):
            assert trajectory.steps[0] == (3, i)

    def test_matches_brute_force(self, rng):
        video = random_video(rng, T=3, N=2)
        trajectories = build_bidirectional_trajectories(video)
        for t in (2, 3):
            expected = _brute_force_alignment(video.frame(1), video.frame(t))
            assert [traj.region_at(t) for traj in trajectories.forward] == expected
        for t in (1, 2):
            expected = _brute_force_alignment(video.frame(3), video.frame(t))
            assert [traj.region_at(t) for traj in trajectories.backward] == expected

    def test_reversal_swaps_directions(self, rng):
        for _ in range(20):
            video = random_video(rng, T=int(rng.integers(1, 5)), N=int(rng.integers(1, 4)))
            T = video.T
            reversed_forward = build_bidirectional_trajectories(video.reversed()).forward
            backward = build_bidirectional_trajectories(video).backward
            renumbered = [frozenset((T + 1 - f, r) for f, r in members) for members in trajectory_membership(reversed_forward)]
            assert renumbered == trajectory_membership(backward)

    def test_deterministic(self, rng):
        video = random_video(rng, T=4, N=3)
        assert build_bidirectional_trajectories(video) == build_bidirectional_trajectories(video)

    def test_planted_corpus_recovered_exactly(self, toy_corpus):
        for video in toy_corpus.videos:
            trajectories = build_bidirectional_trajectories(video)
            assert score_trajectories(trajectories, toy_corpus.ground_truth[video.video_id]) == 1.0

    def test_to_dict_layout(self, rng):
        video = random_video(rng, T=2, N=1, video_id="v")
        payload = build_bidirectional_trajectories(video).to_dict("v")
        assert payload == {
            "video_id": "v",
            "forward": [{"anchor": 1, "steps": [[1, 1], [2, 1]]}],
            "backward": [{"anchor": 1, "steps": [[2, 1], [1, 1]]}],
        }

"""Bidirectional temporal graph over detected regions.

Forward trajectories take the regions of the first frame as anchors and
align every later frame to them; backward trajectories anchor at the last
frame. Alignment is nearest-neighbour per anchor on the closed-form region
similarity, ties going to the lowest region index.
"""
from typing import Dict, List, Mapping, Sequence

import numpy as np

from graph.similarity import similarity_matrix
from graph.types import BACKWARD, FORWARD, FrameDetections, Trajectory, TrajectorySet, VideoSample
from utils.errors import InvalidInputError
from utils.logging_utils import get_logger

logger = get_logger(__name__)


def align_to_anchors(anchor_frame: FrameDetections, other_frame: FrameDetections) -> List[int]:
    """
    Nearest-neighbour alignment of ``other_frame`` regions to anchor regions.

    Args:
        anchor_frame: frame whose regions define trajectory identities
        other_frame: frame of the same video to align

    Returns:
        list: for each anchor (in order) the 1-indexed best-matching region of
        ``other_frame``; several anchors may share a region
    """
    scores = similarity_matrix(anchor_frame, other_frame)
    # np.argmax returns the first maximum, i.e. the lowest region index
    return [int(j) + 1 for j in np.argmax(scores, axis=1)]


def _extract(video: VideoSample, anchor_index: int, order: Sequence[int], direction: str) -> List[Trajectory]:
    anchor_frame = video.frame(anchor_index)
    assignments: Dict[int, List[int]] = {}
    for t in order:
        if t == anchor_index:
            assignments[t] = list(range(1, anchor_frame.N + 1))
        else:
            assignments[t] = align_to_anchors(anchor_frame, video.frame(t))
    return [
        Trajectory(
            anchor_index=i + 1,
            direction=direction,
            steps=tuple((t, assignments[t][i]) for t in order),
        )
        for i in range(anchor_frame.N)
    ]


def build_bidirectional_trajectories(video: VideoSample) -> TrajectorySet:
    """Extracts the N forward and N backward trajectories plus the two global-frame orders."""
    T = video.T
    forward_order = tuple(range(1, T + 1))
    backward_order = tuple(range(T, 0, -1))
    forward = _extract(video, 1, forward_order, FORWARD)
    backward = _extract(video, T, backward_order, BACKWARD)
    logger.debug(f"🧭 Built {len(forward) + len(backward)} trajectories for {video.video_id} (T={T}, N={video.N})")
    return TrajectorySet(
        forward=tuple(forward),
        backward=tuple(backward),
        frame_forward=forward_order,
        frame_backward=backward_order,
    )


def trajectory_membership(trajectories: Sequence[Trajectory]) -> List[frozenset]:
    """Each trajectory as its set of (frame, region) pairs, in anchor order."""
    return [frozenset(t.steps) for t in trajectories]


def score_trajectories(trajectory_set: TrajectorySet, planted: Mapping[str, Sequence[Sequence[int]]]) -> float:
    """
    Fraction of trajectory steps agreeing with planted ground truth.

    Args:
        trajectory_set: recovered trajectories
        planted: {"forward": [[region per frame 1..T] per anchor], "backward": [...]},
            regions 1-indexed and listed in temporal order for both directions

    Returns:
        float: matched steps / total steps over both directions
    """
    matched = 0
    total = 0
    for direction in (FORWARD, BACKWARD):
        truth = planted[direction]
        recovered = trajectory_set.trajectories(direction)
        if len(truth) != len(recovered):
            raise InvalidInputError(
                f"Ground truth has {len(truth)} {direction} trajectories, recovered {len(recovered)}"
            )
        for trajectory, expected in zip(recovered, truth):
            for frame, region in trajectory.steps:
                matched += int(expected[frame - 1] == region)
                total += 1
    return matched / total if total else 1.0

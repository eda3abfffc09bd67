from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from utils.errors import InvalidInputError

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates; area is (x_max - x_min) * (y_max - y_min)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(c) for c in coords):
            raise InvalidInputError(f"Box coordinates must be finite: {coords}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InvalidInputError(f"Box must have positive area: {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def translated(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass
class ObjectRegion:
    """A detected region: its box, pooled appearance vector and H x W x D local feature map."""

    box: BoundingBox
    appearance: np.ndarray
    feature_map: np.ndarray
    confidence: float = 1.0

    def __post_init__(self):
        self.appearance = np.asarray(self.appearance)
        self.feature_map = np.asarray(self.feature_map)
        if self.appearance.ndim != 1:
            raise InvalidInputError(f"Appearance must be a vector, got shape {self.appearance.shape}")
        if self.feature_map.ndim != 3:
            raise InvalidInputError(f"Feature map must be H x W x D, got shape {self.feature_map.shape}")


@dataclass
class FrameDetections:
    frame_index: int
    regions: List[ObjectRegion]
    global_feature_map: np.ndarray

    def __post_init__(self):
        self.global_feature_map = np.asarray(self.global_feature_map)
        if not self.regions:
            raise InvalidInputError(f"Frame {self.frame_index} has no regions; pad detections at ingestion")

    @property
    def N(self) -> int:
        return len(self.regions)


@dataclass
class VideoSample:
    """A video as T frames of exactly N detected regions each (frames are 1-indexed)."""

    video_id: str
    frames: List[FrameDetections]

    def __post_init__(self):
        if not self.frames:
            raise InvalidInputError(f"Video {self.video_id} has no frames")
        n = self.frames[0].N
        appearance_dim = self.frames[0].regions[0].appearance.shape
        map_shape = self.frames[0].global_feature_map.shape
        for expected, frame in enumerate(self.frames, start=1):
            if frame.frame_index != expected:
                raise InvalidInputError(
                    f"Video {self.video_id}: frames must be ordered 1..T, found {frame.frame_index} at position {expected}"
                )
            if frame.N != n:
                raise InvalidInputError(f"Video {self.video_id}: frame {expected} has {frame.N} regions, expected {n}")
            if frame.global_feature_map.shape != map_shape:
                raise InvalidInputError(f"Video {self.video_id}: inconsistent global feature map shape in frame {expected}")
            for region in frame.regions:
                if region.appearance.shape != appearance_dim:
                    raise InvalidInputError(f"Video {self.video_id}: inconsistent appearance dimension in frame {expected}")
                if region.feature_map.shape != map_shape:
                    raise InvalidInputError(f"Video {self.video_id}: inconsistent region feature map shape in frame {expected}")

    @property
    def T(self) -> int:
        return len(self.frames)

    @property
    def N(self) -> int:
        return self.frames[0].N

    @property
    def feature_shape(self) -> Tuple[int, int, int]:
        """(H, W, D) shared by every region and global feature map."""
        return tuple(self.frames[0].global_feature_map.shape)

    def frame(self, frame_index: int) -> FrameDetections:
        return self.frames[frame_index - 1]

    def reversed(self) -> "VideoSample":
        """The same video with its frame order reversed and frame indices renumbered."""
        frames = [
            FrameDetections(frame_index=t, regions=f.regions, global_feature_map=f.global_feature_map)
            for t, f in enumerate(reversed(self.frames), start=1)
        ]
        return VideoSample(video_id=self.video_id, frames=frames)


@dataclass(frozen=True)
class Trajectory:
    """One anchor object's (frame_index, region_index) pairs, both 1-indexed, in traversal order."""

    anchor_index: int
    direction: str
    steps: Tuple[Tuple[int, int], ...]

    def region_at(self, frame_index: int) -> int:
        for frame, region in self.steps:
            if frame == frame_index:
                return region
        raise KeyError(frame_index)

    def to_dict(self) -> Dict[str, Any]:
        return {"anchor": self.anchor_index, "steps": [list(step) for step in self.steps]}


@dataclass(frozen=True)
class TrajectorySet:
    forward: Tuple[Trajectory, ...]
    backward: Tuple[Trajectory, ...]
    frame_forward: Tuple[int, ...] = field(default=())
    frame_backward: Tuple[int, ...] = field(default=())

    def trajectories(self, direction: str) -> Tuple[Trajectory, ...]:
        return self.forward if direction == FORWARD else self.backward

    def frame_order(self, direction: str) -> Tuple[int, ...]:
        return self.frame_forward if direction == FORWARD else self.frame_backward

    def to_dict(self, video_id: str) -> Dict[str, Any]:
        return {
            "video_id": video_id,
            "forward": [t.to_dict() for t in self.forward],
            "backward": [t.to_dict() for t in self.backward],
        }

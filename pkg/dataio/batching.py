"""Turns videos and their trajectories into the channels-first tensors the models consume."""
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
import torch

from dataio.captions import EncodedSentences
from graph.types import TrajectorySet, VideoSample
from utils.errors import InvalidInputError


@dataclass
class VideoTensors:
    """Per direction: "objects" (N, T, D, H, W) in trajectory order and "frames" (T, D, H, W)."""

    video_id: str
    inputs: Dict[str, Dict[str, torch.Tensor]]

    def batched(self) -> Dict[str, Dict[str, torch.Tensor]]:
        return {d: {k: v.unsqueeze(0) for k, v in streams.items()} for d, streams in self.inputs.items()}


def _channels_first(feature_map: np.ndarray) -> np.ndarray:
    return np.transpose(feature_map, (2, 0, 1))


def video_tensors(
    video: VideoSample,
    trajectory_set: TrajectorySet,
    directions: Sequence[str],
    dtype: torch.dtype = torch.float32
) -> VideoTensors:
    """Gathers each trajectory step's region map and the direction-ordered global maps."""
    inputs = {}
    for direction in directions:
        objects = np.stack([
            np.stack([
                _channels_first(video.frame(frame).regions[region - 1].feature_map)
                for frame, region in trajectory.steps
            ])
            for trajectory in trajectory_set.trajectories(direction)
        ])
        frames = np.stack([
            _channels_first(video.frame(t).global_feature_map) for t in trajectory_set.frame_order(direction)
        ])
        inputs[direction] = {
            "objects": torch.from_numpy(np.ascontiguousarray(objects)).to(dtype),
            "frames": torch.from_numpy(np.ascontiguousarray(frames)).to(dtype),
        }
    return VideoTensors(video_id=video.video_id, inputs=inputs)


@dataclass
class CaptionBatch:
    video_ids: List[str]
    inputs: Dict[str, Dict[str, torch.Tensor]]  # direction -> stream -> (B, ...)
    tokens: torch.Tensor                         # (B, L) decoder inputs
    targets: torch.Tensor                        # (B, L)
    mask: torch.Tensor                           # (B, L) True on prediction positions

    def __len__(self) -> int:
        return len(self.video_ids)


def collate(rows: Sequence[int], sentences: EncodedSentences, cache: Dict[str, VideoTensors]) -> CaptionBatch:
    """Stacks the sentence rows ``rows`` with their videos' tensors."""
    if not len(rows):
        raise InvalidInputError("Cannot collate an empty batch")
    video_ids = [sentences.video_ids[i] for i in rows]
    first = cache[video_ids[0]].inputs
    inputs = {}
    for direction, streams in first.items():
        inputs[direction] = {}
        for stream in streams:
            parts = [cache[v].inputs[direction][stream] for v in video_ids]
            shapes = {tuple(p.shape) for p in parts}
            if len(shapes) != 1:
                raise InvalidInputError(f"Videos in one batch must share shapes, got {sorted(shapes)}")
            inputs[direction][stream] = torch.stack(parts)
    index = np.asarray(rows)
    return CaptionBatch(
        video_ids=video_ids,
        inputs=inputs,
        tokens=torch.from_numpy(sentences.inputs[index]),
        targets=torch.from_numpy(sentences.targets[index]),
        mask=torch.from_numpy(sentences.mask[index]),
    )

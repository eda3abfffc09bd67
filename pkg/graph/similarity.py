"""Closed-form similarity between detected regions of two frames.

The score of a region pair is the mean of an appearance term (Euclidean
distance of appearance vectors, normalised by the largest distance between
the two frames), the box IoU and an area-ratio term.
"""
import math
from typing import List

import numpy as np

from graph.types import BoundingBox, FrameDetections, ObjectRegion
from utils.errors import InvalidInputError


def appearance_similarity(g_i: np.ndarray, g_j: np.ndarray, max_pair_distance: float) -> float:
    """exp(-L2(g_i, g_j) / max_pair_distance); 1.0 when the normalizer is zero."""
    g_i = np.asarray(g_i, dtype=np.float64)
    g_j = np.asarray(g_j, dtype=np.float64)
    if g_i.shape != g_j.shape:
        raise InvalidInputError(f"Appearance dimension mismatch: {g_i.shape} vs {g_j.shape}")
    if max_pair_distance < 0:
        raise InvalidInputError(f"max_pair_distance must be non-negative, got {max_pair_distance}")
    if max_pair_distance == 0:
        return 1.0
    return math.exp(-float(np.linalg.norm(g_i - g_j)) / max_pair_distance)


def iou_similarity(a: BoundingBox, b: BoundingBox) -> float:
    inter_w = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    inter_h = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    intersection = inter_w * inter_h
    union = a.area + b.area - intersection
    return intersection / union


def area_similarity(a: BoundingBox, b: BoundingBox) -> float:
    ratio = min(a.area, b.area) / max(a.area, b.area)
    return math.exp(-abs(ratio - 1.0))


def region_similarity(r_i: ObjectRegion, r_j: ObjectRegion, max_pair_distance: float) -> float:
    s_app = appearance_similarity(r_i.appearance, r_j.appearance, max_pair_distance)
    s_iou = iou_similarity(r_i.box, r_j.box)
    s_area = area_similarity(r_i.box, r_j.box)
    return (s_app + s_iou + s_area) / 3.0


def max_pair_distance(frame_a: FrameDetections, frame_b: FrameDetections) -> float:
    """Largest appearance distance over all N x N region pairs of two frames."""
    a = np.stack([r.appearance for r in frame_a.regions]).astype(np.float64)
    b = np.stack([r.appearance for r in frame_b.regions]).astype(np.float64)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(f"Appearance dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    distances = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(distances.max())


def similarity_matrix(anchor_frame: FrameDetections, other_frame: FrameDetections) -> np.ndarray:
    """S[i, j] = region_similarity(anchor_i, other_j) with one shared normalizer."""
    normalizer = max_pair_distance(anchor_frame, other_frame)
    scores: List[List[float]] = [
        [region_similarity(anchor, other, normalizer) for other in other_frame.regions]
        for anchor in anchor_frame.regions
    ]
    return np.asarray(scores, dtype=np.float64)

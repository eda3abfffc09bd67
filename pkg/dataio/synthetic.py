"""Desk-scale synthetic corpus with planted ground truth.

Every video shows N objects drawn from a pool of identities. Each identity
has its own appearance prototype, feature-map prototype and box size; all
objects of a video drift together in one direction, which is also encoded in
the feature maps. Region order is shuffled in every frame, and the planted
(frame -> region) assignment of every anchor is written out so trajectory
extraction can be scored exactly. Captions are templated from the planted
identities and motion.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from dataio.captions import CaptionRecord, write_captions, write_split
from dataio.manifest import FLOAT, write_manifest
from graph.types import BoundingBox, FrameDetections, ObjectRegion, VideoSample
from utils.errors import InvalidInputError
from utils.logging_utils import get_logger

logger = get_logger(__name__)

FRAME_SIZE = (320.0, 240.0)
MOTIONS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "up": (0.0, -1.0), "down": (0.0, 1.0)}


@dataclass
class SyntheticVocabSpec:
    objects: Tuple[str, ...] = ("obj1", "obj2", "obj3", "obj4", "obj5", "obj6")
    motions: Tuple[str, ...] = ("left", "right", "up", "down")


@dataclass
class SyntheticCorpus:
    root: str
    manifest_path: str
    captions_path: str
    ground_truth_path: str
    videos: List[VideoSample] = field(default_factory=list)
    records: List[CaptionRecord] = field(default_factory=list)
    ground_truth: Dict[str, Dict[str, List[List[int]]]] = field(default_factory=dict)


def _caption(names: List[str], motion: str) -> str:
    if len(names) == 1:
        return f"{names[0]} moves {motion}"
    return f"{names[0]} moves {motion} with {names[1]}"


def synthesize_dataset(
    out_dir: str,
    seed: int = 0,
    num_videos: int = 5,
    T: int = 6,
    N: int = 2,
    H: int = 2,
    W: int = 2,
    D: int = 8,
    G: int = 16,
    vocab_spec: SyntheticVocabSpec = None
) -> SyntheticCorpus:
    """
    Writes a synthetic corpus (manifest, features, captions, splits, ground truth) to ``out_dir``.

    Args:
        out_dir: destination directory
        seed: controls every random draw; equal seeds give byte-identical corpora
        num_videos, T, N, H, W, D, G: corpus and feature shapes
        vocab_spec: identity names and motion words used in captions

    Returns:
        SyntheticCorpus: paths plus the in-memory videos, records and ground truth
    """
    spec = vocab_spec or SyntheticVocabSpec()
    if N > len(spec.objects):
        raise InvalidInputError(f"N={N} exceeds the {len(spec.objects)} object identities available")
    unknown = [m for m in spec.motions if m not in MOTIONS]
    if unknown:
        raise InvalidInputError(f"Unsupported motion words: {unknown}")
    for name, value in (("num_videos", num_videos), ("T", T), ("N", N), ("H", H), ("W", W), ("D", D), ("G", G)):
        if value <= 0:
            raise InvalidInputError(f"{name} must be positive, got {value}")

    rng = np.random.default_rng(seed)
    identities = len(spec.objects)
    appearance_protos = rng.normal(scale=4.0, size=(identities, G))
    map_protos = rng.normal(size=(identities, H, W, D))
    motion_patterns = rng.normal(size=(len(spec.motions), H, W, D))
    size_factors = rng.uniform(0.3, 0.6, size=identities)

    frame_w, frame_h = FRAME_SIZE
    cell_w = frame_w / N
    drift = 0.2 * cell_w / max(T - 1, 1)

    os.makedirs(out_dir, exist_ok=True)
    corpus = SyntheticCorpus(
        root=out_dir,
        manifest_path=os.path.join(out_dir, "manifest.json"),
        captions_path=os.path.join(out_dir, "captions.jsonl"),
        ground_truth_path=os.path.join(out_dir, "ground_truth.json"),
    )

    for v in range(num_videos):
        video_id = f"video{v}"
        slots = rng.choice(identities, size=N, replace=False)
        motion_index = int(rng.integers(len(spec.motions)))
        motion = spec.motions[motion_index]
        dx, dy = MOTIONS[motion]

        frames = []
        region_of_slot = []  # per frame: slot -> 1-indexed region
        for t in range(1, T + 1):
            order = rng.permutation(N)
            confidences = rng.uniform(0.5, 1.0, size=N)
            progress = (t - 1) / max(T - 1, 1)
            object_maps = []
            regions = []
            for j in range(N):
                slot = int(order[j])
                identity = int(slots[slot])
                width = cell_w * size_factors[identity]
                height = frame_h * size_factors[identity]
                cx = cell_w * (slot + 0.5) + dx * drift * (t - 1)
                cy = frame_h * 0.5 + dy * drift * (t - 1)
                box = BoundingBox(cx - width / 2, cy - height / 2, cx + width / 2, cy + height / 2)
                appearance = (appearance_protos[identity] + rng.normal(scale=0.05, size=G)).astype(FLOAT)
                feature_map = (
                    map_protos[identity]
                    + 0.5 * progress * motion_patterns[motion_index]
                    + rng.normal(scale=0.05, size=(H, W, D))
                ).astype(FLOAT)
                object_maps.append(feature_map)
                regions.append(ObjectRegion(box=box, appearance=appearance, feature_map=feature_map,
                                            confidence=float(confidences[j])))
            global_map = (np.mean(object_maps, axis=0) + progress * motion_patterns[motion_index]).astype(FLOAT)
            frames.append(FrameDetections(frame_index=t, regions=regions, global_feature_map=global_map))
            positions = {int(order[j]): j + 1 for j in range(N)}
            region_of_slot.append([positions[s] for s in range(N)])

        video = VideoSample(video_id=video_id, frames=frames)
        first_slots = [int(np.flatnonzero(np.asarray(region_of_slot[0]) == i + 1)[0]) for i in range(N)]
        last_slots = [int(np.flatnonzero(np.asarray(region_of_slot[-1]) == i + 1)[0]) for i in range(N)]
        corpus.ground_truth[video_id] = {
            "forward": [[region_of_slot[t][s] for t in range(T)] for s in first_slots],
            "backward": [[region_of_slot[t][s] for t in range(T)] for s in last_slots],
        }
        names = [spec.objects[int(slots[s])] for s in range(N)]
        corpus.records.append(CaptionRecord(video_id=video_id, sentences=[_caption(names, motion)]))
        corpus.videos.append(video)

    write_manifest(corpus.manifest_path, corpus.videos, FRAME_SIZE)
    write_captions(corpus.captions_path, corpus.records)
    video_ids = [video.video_id for video in corpus.videos]
    for split in ("train", "val", "test"):
        write_split(os.path.join(out_dir, f"{split}.txt"), video_ids)
    with open(corpus.ground_truth_path, "w", encoding="utf-8") as f:
        json.dump(corpus.ground_truth, f, indent=2, sort_keys=True)

    logger.info(f"🧪 Synthesized {num_videos} videos (T={T}, N={N}, H={H}, W={W}, D={D}, G={G}) in {out_dir}")
    return corpus

"""Feature manifest: on-disk precomputed features replacing CNN extraction.

manifest.json lists one entry per video with its declared shapes and four
files relative to the manifest directory:

- frame_features:    T x H x W x D   little-endian float32, row-major
- region_features:   R x H x W x D   every detected region, frame by frame
- region_appearance: R x G
- region_metadata:   JSON {"frames": [{"frame_index", "regions": [{"box", "confidence"}]}]}

R is the number of detections listed in the metadata. Frames with fewer than
N detections are padded on load by repeating the most confident region; a
frame without detections gets N whole-frame regions built from its global map.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from graph.types import BoundingBox, FrameDetections, ObjectRegion, VideoSample
from utils.errors import DataLoadError, InvalidInputError

FLOAT = np.dtype("<f4")
MANIFEST_VERSION = 1


@dataclass
class ManifestEntry:
    video_id: str
    T: int
    N: int
    H: int
    W: int
    D: int
    G: int
    frame_width: float
    frame_height: float
    frame_features: str
    region_features: str
    region_appearance: str
    region_metadata: str


def _read_array(path: str, shape: Tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * FLOAT.itemsize
    if not os.path.exists(path):
        raise DataLoadError(f"Feature file not found: {path}", path=path)
    actual = os.path.getsize(path)
    if actual != expected:
        raise DataLoadError(
            f"Feature file {path} holds {actual} bytes, shape {shape} declares {expected}", path=path
        )
    return np.fromfile(path, dtype=FLOAT).reshape(shape)


class FeatureDataset:
    """Validated, lazily-read access to the videos of a manifest."""

    def __init__(self, manifest_path: str, entries: Sequence[ManifestEntry]):
        self.manifest_path = manifest_path
        self.root = os.path.dirname(os.path.abspath(manifest_path))
        self.entries: Dict[str, ManifestEntry] = {e.video_id: e for e in entries}
        self.logger = logging.getLogger(self.__class__.__name__)
        self._metadata: Dict[str, dict] = {}
        for entry in entries:
            self._validate(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, video_id: str) -> bool:
        return video_id in self.entries

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    @property
    def video_ids(self) -> List[str]:
        return list(self.entries)

    def _path(self, relative: str) -> str:
        return os.path.join(self.root, relative)

    def _validate(self, entry: ManifestEntry):
        for name in ("T", "N", "H", "W", "D", "G"):
            if getattr(entry, name) <= 0:
                raise DataLoadError(f"{entry.video_id}: {name} must be positive", path=self.manifest_path)
        metadata_path = self._path(entry.region_metadata)
        try:
            with open(metadata_path, "r", encoding="utf-8") as f:
                metadata = json.load(f)
        except FileNotFoundError as e:
            raise DataLoadError(f"Region metadata not found: {metadata_path}", path=metadata_path) from e
        except json.JSONDecodeError as e:
            raise DataLoadError(f"Malformed region metadata {metadata_path}: {e}", path=metadata_path) from e
        frames = metadata.get("frames", [])
        if len(frames) != entry.T:
            raise DataLoadError(
                f"{metadata_path} lists {len(frames)} frames, manifest declares T={entry.T}", path=metadata_path
            )
        R = sum(len(frame.get("regions", [])) for frame in frames)
        checks = [
            (entry.frame_features, entry.T * entry.H * entry.W * entry.D),
            (entry.region_features, R * entry.H * entry.W * entry.D),
            (entry.region_appearance, R * entry.G),
        ]
        for relative, count in checks:
            path = self._path(relative)
            if not os.path.exists(path):
                raise DataLoadError(f"Feature file not found: {path}", path=path)
            size = os.path.getsize(path)
            if size != count * FLOAT.itemsize:
                raise DataLoadError(
                    f"Feature file {path} holds {size} bytes, declared shapes require {count * FLOAT.itemsize}",
                    path=path,
                )
        self._metadata[entry.video_id] = metadata

    def get(self, video_id: str) -> VideoSample:
        if video_id not in self.entries:
            raise DataLoadError(f"Video {video_id} is not in {self.manifest_path}", path=self.manifest_path)
        e = self.entries[video_id]
        metadata = self._metadata[video_id]
        R = sum(len(frame.get("regions", [])) for frame in metadata["frames"])
        frame_maps = _read_array(self._path(e.frame_features), (e.T, e.H, e.W, e.D))
        region_maps = _read_array(self._path(e.region_features), (R, e.H, e.W, e.D))
        appearance = _read_array(self._path(e.region_appearance), (R, e.G))

        frames = []
        cursor = 0
        for t, frame_meta in enumerate(metadata["frames"], start=1):
            detections = []
            for region_meta in frame_meta.get("regions", []):
                try:
                    box = BoundingBox(*region_meta["box"])
                except (InvalidInputError, TypeError) as err:
                    raise DataLoadError(f"{video_id} frame {t}: invalid box {region_meta.get('box')}: {err}") from err
                detections.append(ObjectRegion(
                    box=box,
                    appearance=appearance[cursor],
                    feature_map=region_maps[cursor],
                    confidence=float(region_meta.get("confidence", 1.0)),
                ))
                cursor += 1
            regions = self._pad(e, t, detections, frame_maps[t - 1])
            frames.append(FrameDetections(frame_index=t, regions=regions, global_feature_map=frame_maps[t - 1]))
        return VideoSample(video_id=video_id, frames=frames)

    def _pad(self, entry: ManifestEntry, t: int, detections: List[ObjectRegion], global_map: np.ndarray) -> List[ObjectRegion]:
        N = entry.N
        if not detections:
            if entry.G != entry.D:
                raise DataLoadError(
                    f"{entry.video_id} frame {t} has no detections and G={entry.G} != D={entry.D}; "
                    "cannot derive a whole-frame appearance vector"
                )
            self.logger.debug(f"{entry.video_id} frame {t}: no detections, using whole-frame regions")
            whole = ObjectRegion(
                box=BoundingBox(0.0, 0.0, float(entry.frame_width), float(entry.frame_height)),
                appearance=global_map.mean(axis=(0, 1)).astype(FLOAT),
                feature_map=global_map,
                confidence=0.0,
            )
            return [whole] * N
        if len(detections) > N:
            ranked = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))[:N]
            return [detections[i] for i in sorted(ranked)]
        if len(detections) < N:
            best = max(range(len(detections)), key=lambda i: (detections[i].confidence, -i))
            detections = detections + [detections[best]] * (N - len(detections))
        return detections


def load_manifest(path: str) -> FeatureDataset:
    """Reads and validates a manifest; feature arrays are read on ``get``."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise DataLoadError(f"Manifest not found: {path}", path=path) from e
    except json.JSONDecodeError as e:
        raise DataLoadError(f"Malformed manifest {path}: {e}", path=path) from e
    try:
        entries = [ManifestEntry(**video) for video in data["videos"]]
    except (KeyError, TypeError) as e:
        raise DataLoadError(f"Manifest {path} has a malformed video entry: {e}", path=path) from e
    dataset = FeatureDataset(path, entries)
    logging.getLogger("FeatureDataset").info(f"📂 Loaded manifest {path} with {len(dataset)} videos")
    return dataset


def write_manifest(
    manifest_path: str,
    videos: Sequence[VideoSample],
    frame_size: Tuple[float, float],
    feature_dir: str = "features"
) -> List[ManifestEntry]:
    """Writes videos (exactly N regions per frame) as a manifest plus feature files."""
    root = os.path.dirname(os.path.abspath(manifest_path))
    os.makedirs(os.path.join(root, feature_dir), exist_ok=True)
    entries = []
    for video in videos:
        H, W, D = video.feature_shape
        G = video.frames[0].regions[0].appearance.shape[0]
        stem = os.path.join(feature_dir, video.video_id)
        entry = ManifestEntry(
            video_id=video.video_id, T=video.T, N=video.N, H=H, W=W, D=D, G=G,
            frame_width=float(frame_size[0]), frame_height=float(frame_size[1]),
            frame_features=f"{stem}.frames.f32",
            region_features=f"{stem}.regions.f32",
            region_appearance=f"{stem}.appearance.f32",
            region_metadata=f"{stem}.regions.json",
        )
        np.stack([f.global_feature_map for f in video.frames]).astype(FLOAT).tofile(os.path.join(root, entry.frame_features))
        regions = [r for f in video.frames for r in f.regions]
        np.stack([r.feature_map for r in regions]).astype(FLOAT).tofile(os.path.join(root, entry.region_features))
        np.stack([r.appearance for r in regions]).astype(FLOAT).tofile(os.path.join(root, entry.region_appearance))
        metadata = {"frames": [
            {"frame_index": f.frame_index,
             "regions": [{"box": r.box.as_list(), "confidence": r.confidence} for r in f.regions]}
            for f in video.frames
        ]}
        with open(os.path.join(root, entry.region_metadata), "w", encoding="utf-8") as fh:
            json.dump(metadata, fh)
        entries.append(entry)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump({"version": MANIFEST_VERSION, "videos": [asdict(e) for e in entries]}, fh, indent=2)
    return entries

import json
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List

import numpy as np

from dataio.text import tokenize
from dataio.vocabulary import Vocabulary
from utils.errors import DataLoadError
from utils.logging_utils import get_logger

logger = get_logger(__name__)


@dataclass
class CaptionRecord:
    video_id: str
    sentences: List[str] = field(default_factory=list)


@dataclass
class EncodedSentences:
    """Teacher-forcing arrays, one row per kept sentence.

    inputs  = BOS w_1 .. w_n PAD ..   (length max_len + 1)
    targets = w_1 .. w_n EOS PAD ..   (length max_len + 1)
    mask    = True on the n + 1 prediction positions
    """

    video_ids: List[str]
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.video_ids)


def read_captions(path: str) -> List[CaptionRecord]:
    """Reads a JSON-lines captions file: {"video_id": ..., "sentences": [...]} per line."""
    if not os.path.exists(path):
        raise DataLoadError(f"Captions file not found: {path}", path=path)
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                records.append(CaptionRecord(video_id=str(data["video_id"]), sentences=list(data["sentences"])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise DataLoadError(f"{path}:{line_no}: malformed caption record ({e})", path=path) from e
    return records


def write_captions(path: str, records: Iterable[CaptionRecord]):
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps({"video_id": record.video_id, "sentences": record.sentences}) + "\n")


def read_split(path: str) -> List[str]:
    """Plain list of video ids, one per line."""
    if not os.path.exists(path):
        raise DataLoadError(f"Split file not found: {path}", path=path)
    with open(path, "r", encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def write_split(path: str, video_ids: Iterable[str]):
    with open(path, "w", encoding="utf-8") as f:
        for video_id in video_ids:
            f.write(f"{video_id}\n")


def references_by_video(records: Iterable[CaptionRecord]) -> Dict[str, List[List[str]]]:
    refs: Dict[str, List[List[str]]] = {}
    for record in records:
        refs.setdefault(record.video_id, []).extend(tokenize(s) for s in record.sentences)
    return refs


def prepare_training_sentences(records: Iterable[CaptionRecord], vocab: Vocabulary, max_len: int = 16) -> EncodedSentences:
    """Encodes, wraps with BOS/EOS and zero-pads every sentence of at most ``max_len`` words."""
    width = max_len + 1
    video_ids, inputs, targets, masks = [], [], [], []
    dropped = 0
    for record in records:
        for sentence in record.sentences:
            words = tokenize(sentence)
            if len(words) > max_len:
                dropped += 1
                continue
            ids = vocab.encode(words)
            row_in = [vocab.bos_index] + ids
            row_out = ids + [vocab.eos_index]
            pad = width - len(row_in)
            video_ids.append(record.video_id)
            inputs.append(row_in + [vocab.pad_index] * pad)
            targets.append(row_out + [vocab.pad_index] * pad)
            masks.append([True] * len(row_out) + [False] * pad)
    if dropped:
        logger.info(f"✂️ Dropped {dropped} sentences longer than {max_len} words")
    return EncodedSentences(
        video_ids=video_ids,
        inputs=np.asarray(inputs, dtype=np.int64).reshape(-1, width),
        targets=np.asarray(targets, dtype=np.int64).reshape(-1, width),
        mask=np.asarray(masks, dtype=bool).reshape(-1, width),
        dropped=dropped,
    )

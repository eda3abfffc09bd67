import logging
from dataclasses import dataclass, replace
from typing import List, Optional

from dataio.batching import video_tensors
from dataio.text import detokenize
from graph.btg import build_bidirectional_trajectories
from graph.types import VideoSample
from inference.beam_search import BeamSearchDecoder, encode_video
from tools.config_loader import RunConfig
from training.checkpoint import Checkpoint, build_model
from utils.errors import InvalidInputError


@dataclass
class CaptionResult:
    video_id: str
    caption: str
    score: float
    tokens: List[int]

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "caption": self.caption, "score": self.score, "tokens": self.tokens}


class Captioner:
    """
    Trajectory extraction, encoding and beam search for videos of one checkpoint.

    The model structure always comes from the checkpoint; ``config`` only
    supplies the decoding knobs (beam, fusion).
    """

    def __init__(self, checkpoint: Checkpoint, config: Optional[RunConfig] = None):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.checkpoint = checkpoint
        self.config = checkpoint.config
        if config is not None:
            self.config = replace(checkpoint.config, beam=config.beam, fusion=config.fusion)
        self.vocab = checkpoint.vocab
        self.model = build_model(checkpoint).eval()
        self.decoder = BeamSearchDecoder(
            self.model,
            self.vocab,
            beam_size=self.config.beam,
            max_len=self.config.max_sentence_len + 1,
            fusion=self.config.fusion,
        )

    def caption(self, video: VideoSample) -> CaptionResult:
        if tuple(video.feature_shape) != tuple(self.checkpoint.feature_shape):
            raise InvalidInputError(
                f"{video.video_id}: feature maps {tuple(video.feature_shape)} do not match "
                f"the checkpoint's {tuple(self.checkpoint.feature_shape)}"
            )
        trajectories = build_bidirectional_trajectories(video)
        tensors = video_tensors(video, trajectories, self.model.directions)
        best = self.decoder.search(encode_video(self.model, tensors.batched()))
        words = self.vocab.decode(best.emitted)
        result = CaptionResult(
            video_id=video.video_id,
            caption=detokenize(words),
            score=best.score,
            tokens=list(best.emitted),
        )
        self.logger.debug(f"📝 {video.video_id}: {result.caption!r} ({result.score:.4f})")
        return result


def caption_video(video: VideoSample, checkpoint: Checkpoint, config: Optional[RunConfig] = None) -> CaptionResult:
    return Captioner(checkpoint, config).caption(video)

"""Beam search over the fused forward/backward word distributions.

Every hypothesis is advanced on its own (batch of one) so that the score of a
returned sequence is reproduced exactly by ``score_sequence``. Scores are sums
of float64 log fused probabilities without length normalisation; candidates
are ranked by score, ties going to the lexicographically smaller token tuple.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from dataio.vocabulary import RESERVED, Vocabulary
from inference.fusion import fuse_word_scores
from models.captioner import CaptionModel, EncodedVideo
from models.decoder import DecoderState
from utils.errors import ConfigError, InvalidInputError


@dataclass
class BeamHypothesis:
    """``states`` hold each direction's decoder after consuming all tokens but the last."""

    tokens: Tuple[int, ...]
    score: float
    states: Dict[str, DecoderState] = field(default_factory=dict, repr=False)
    finished: bool = False

    def sort_key(self):
        return (-self.score, self.tokens)

    @property
    def emitted(self) -> Tuple[int, ...]:
        """Tokens after BOS, including a final EOS when present."""
        return self.tokens[1:]


class BeamSearchDecoder:
    """
    Decodes one encoded video with the decoders of ``directions``.

    Args:
        model: trained CaptionModel, switched to eval mode here
        vocab: vocabulary the model was trained with
        beam_size: hypotheses kept per step
        max_len: generated tokens per sequence, EOS included
        fusion: "mean" or "geometric"; a single direction uses its own distribution
        directions: subset of the model's directions to decode with
    """

    def __init__(
        self,
        model: CaptionModel,
        vocab: Vocabulary,
        beam_size: int = 5,
        max_len: int = 17,
        fusion: str = "mean",
        directions: Optional[Sequence[str]] = None
    ):
        if len(vocab) <= len(RESERVED):
            raise ConfigError("Vocabulary holds no words beyond the reserved tokens", field="vocab")
        if beam_size < 1:
            raise ConfigError(f"beam must be positive, got {beam_size}", field="beam")
        if max_len < 1:
            raise ConfigError(f"max_len must be positive, got {max_len}", field="max_sentence_len")
        self.model = model.eval()
        self.vocab = vocab
        self.beam_size = beam_size
        self.max_len = max_len
        self.fusion = fusion
        self.directions = tuple(directions or model.directions)
        unknown = [d for d in self.directions if d not in model.directions]
        if unknown:
            raise InvalidInputError(f"Model has no {unknown} direction")
        # PAD and BOS are never prediction targets
        self.emittable = np.array([i for i in range(len(vocab)) if i not in (vocab.pad_index, vocab.bos_index)])
        self.logger = logging.getLogger(self.__class__.__name__)

    def initial_hypothesis(self, encoded: Dict[str, EncodedVideo]) -> BeamHypothesis:
        states = {
            d: self.model.pipelines[d].decoder.initial_state(1, encoded[d].frame_vlads)
            for d in self.directions
        }
        return BeamHypothesis(tokens=(self.vocab.bos_index,), score=0.0, states=states)

    def next_distribution(
        self,
        encoded: Dict[str, EncodedVideo],
        states: Dict[str, DecoderState],
        token: int
    ) -> Tuple[Dict[str, DecoderState], np.ndarray]:
        """Feeds ``token`` to every direction; returns the new states and the fused next-word distribution."""
        new_states, distributions = {}, []
        with torch.no_grad():
            for d in self.directions:
                decoder = self.model.pipelines[d].decoder
                video = encoded[d]
                attended = decoder.attend(states[d].h, video.object_vlads, video.frame_vlads)
                word_in = torch.tensor([token], dtype=torch.int64)
                new_states[d], logits = decoder.step(states[d], attended.frame, attended.objects, word_in)
                distributions.append(torch.softmax(logits[0], dim=-1).double().numpy())
        if len(distributions) == 1:
            return new_states, distributions[0]
        return new_states, fuse_word_scores(distributions[0], distributions[1], self.fusion)

    def _expand(self, encoded: Dict[str, EncodedVideo], hypothesis: BeamHypothesis) -> List[BeamHypothesis]:
        states, probs = self.next_distribution(encoded, hypothesis.states, hypothesis.tokens[-1])
        with np.errstate(divide="ignore"):
            log_probs = np.log(probs)
        return [
            BeamHypothesis(
                tokens=hypothesis.tokens + (int(w),),
                score=hypothesis.score + float(log_probs[w]),
                states=states,
                finished=int(w) == self.vocab.eos_index,
            )
            for w in self.emittable
        ]

    def search(self, encoded: Dict[str, EncodedVideo]) -> BeamHypothesis:
        """Returns the best finished hypothesis, EOS-terminated or length-capped."""
        live = [self.initial_hypothesis(encoded)]
        finished: List[BeamHypothesis] = []
        for length in range(1, self.max_len + 1):
            candidates = [c for hypothesis in live for c in self._expand(encoded, hypothesis)]
            candidates.sort(key=BeamHypothesis.sort_key)
            live = []
            for candidate in candidates[:self.beam_size]:
                if candidate.finished or length == self.max_len:
                    candidate.finished = True
                    finished.append(candidate)
                else:
                    live.append(candidate)
            if not live:
                break
            best_finished = max((f.score for f in finished), default=-np.inf)
            if best_finished >= max(h.score for h in live):
                # scores never increase, no live hypothesis can overtake
                break
        best = min(finished, key=BeamHypothesis.sort_key)
        self.logger.debug(f"🔦 Beam {self.beam_size}: {len(finished)} finished, best score {best.score:.6f}")
        return best

    def score_sequence(self, encoded: Dict[str, EncodedVideo], tokens: Sequence[int]) -> float:
        """Sum of log fused probabilities of ``tokens`` (emitted tokens, BOS excluded) on the same step path."""
        hypothesis = self.initial_hypothesis(encoded)
        score = 0.0
        previous = hypothesis.tokens[-1]
        states = hypothesis.states
        for token in tokens:
            states, probs = self.next_distribution(encoded, states, previous)
            with np.errstate(divide="ignore"):
                score += float(np.log(probs[int(token)]))
            previous = int(token)
        return score


def encode_video(
    model: CaptionModel,
    inputs: Dict[str, Dict[str, torch.Tensor]],
    directions: Optional[Sequence[str]] = None
) -> Dict[str, EncodedVideo]:
    """Runs the encoders of each direction on batch-of-one ``inputs``."""
    model.eval()
    encoded = {}
    with torch.no_grad():
        for d in directions or model.directions:
            streams = inputs[d]
            objects = streams.get("objects") if model.use_objects else None
            encoded[d] = model.pipelines[d].encode(objects, streams["frames"])
    return encoded


def beam_search(
    model: CaptionModel,
    vocab: Vocabulary,
    inputs: Dict[str, Dict[str, torch.Tensor]],
    beam_size: int = 5,
    max_len: int = 17,
    fusion: str = "mean",
    directions: Optional[Sequence[str]] = None
) -> BeamHypothesis:
    """Encodes ``inputs`` and decodes the highest-scoring caption."""
    decoder = BeamSearchDecoder(model, vocab, beam_size, max_len, fusion, directions)
    return decoder.search(encode_video(model, inputs, decoder.directions))

"""Corpus BLEU@4 over tokenized captions, backed by sacrebleu's n-gram statistics."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

from sacrebleu.metrics import BLEU

from utils.errors import InvalidInputError
from utils.logging_utils import get_logger

MAX_ORDER = 4

logger = get_logger(__name__)


@dataclass
class VideoStats:
    """Clipped n-gram matches and candidate n-gram totals for n = 1..4."""

    counts: List[int]
    totals: List[int]
    sys_len: int
    ref_len: int


@dataclass
class EvalReport:
    bleu4: float
    n_videos: int
    per_video: Dict[str, VideoStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"bleu4": self.bleu4, "n_videos": self.n_videos}


class BleuEvaluator:
    """Accumulates per-video statistics and combines them at corpus level without smoothing."""

    def __init__(self):
        # captions arrive tokenized; sacrebleu only splits on spaces
        self.bleu_model = BLEU(tokenize="none", effective_order=True)

    def video_stats(self, candidate: Sequence[str], references: Sequence[Sequence[str]]) -> VideoStats:
        score = self.bleu_model.sentence_score(" ".join(candidate), [" ".join(r) for r in references])
        return VideoStats(counts=list(score.counts), totals=list(score.totals),
                          sys_len=int(score.sys_len), ref_len=int(score.ref_len))

    def corpus(self, stats: Sequence[VideoStats]) -> float:
        correct = [sum(s.counts[n] for s in stats) for n in range(MAX_ORDER)]
        total = [sum(s.totals[n] for s in stats) for n in range(MAX_ORDER)]
        sys_len = sum(s.sys_len for s in stats)
        ref_len = sum(s.ref_len for s in stats)
        score = BLEU.compute_bleu(correct, total, sys_len, ref_len, smooth_method="none")
        return score.score / 100.0


def bleu4(candidates: Mapping[str, Sequence[str]], references: Mapping[str, Sequence[Sequence[str]]]) -> EvalReport:
    """
    Corpus BLEU@4 with the closest-reference-length brevity penalty.

    Args:
        candidates: video id -> candidate tokens
        references: video id -> reference token lists

    Returns:
        EvalReport: BLEU in [0, 1] plus per-video statistics
    """
    missing = sorted(v for v in candidates if not references.get(v))
    if missing:
        raise InvalidInputError(f"No references for videos {missing[:5]}")
    evaluator = BleuEvaluator()
    per_video = {v: evaluator.video_stats(candidates[v], references[v]) for v in sorted(candidates)}
    score = evaluator.corpus(list(per_video.values())) if per_video else 0.0
    logger.info(f"📊 BLEU@4 {score:.4f} over {len(per_video)} videos")
    return EvalReport(bleu4=score, n_videos=len(per_video), per_video=per_video)

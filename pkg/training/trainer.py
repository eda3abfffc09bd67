import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from dataio.batching import CaptionBatch, VideoTensors, collate, video_tensors
from dataio.captions import CaptionRecord, EncodedSentences, prepare_training_sentences
from dataio.manifest import FeatureDataset
from dataio.vocabulary import Vocabulary
from graph.btg import build_bidirectional_trajectories
from models.captioner import CaptionModel
from tools.config_loader import RunConfig
from training.checkpoint import Checkpoint, capture, restore_optimizer, save_checkpoint
from training.losses import clip_gradients, masked_cross_entropy
from utils.errors import ConfigError, InvalidInputError, NumericError
from utils.logging_utils import JsonLinesWriter


def seed_everything(seed: int):
    """Single-threaded, deterministic torch execution seeded with ``seed``."""
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)


@dataclass
class TrainingSet:
    sentences: EncodedSentences
    tensors: Dict[str, VideoTensors]
    feature_shape: Tuple[int, int, int]

    def __len__(self) -> int:
        return len(self.sentences)


def build_training_set(
    dataset: FeatureDataset,
    records: Sequence[CaptionRecord],
    video_ids: Sequence[str],
    vocab: Vocabulary,
    config: RunConfig
) -> TrainingSet:
    """Extracts trajectories and tensors once per video and encodes the matching sentences."""
    logger = logging.getLogger("Trainer")
    wanted = set(video_ids)
    missing = sorted(wanted - set(dataset.video_ids))
    if missing:
        raise InvalidInputError(f"Split references videos absent from the manifest: {missing[:5]}")
    chosen = [r for r in records if r.video_id in wanted]
    sentences = prepare_training_sentences(chosen, vocab, config.max_sentence_len)
    tensors = {}
    feature_shape = None
    for video_id in dict.fromkeys(sentences.video_ids):
        video = dataset.get(video_id)
        if video.T != config.T or video.N != config.N:
            logger.warning(f"⚠️ {video_id} has T={video.T}, N={video.N}; config declares T={config.T}, N={config.N}")
        if feature_shape is None:
            feature_shape = video.feature_shape
        elif video.feature_shape != feature_shape:
            raise InvalidInputError(f"{video_id} feature shape {video.feature_shape} differs from {feature_shape}")
        tensors[video_id] = video_tensors(video, build_bidirectional_trajectories(video), config.directions)
    if feature_shape is None:
        raise InvalidInputError("No training sentences left after filtering")
    return TrainingSet(sentences=sentences, tensors=tensors, feature_shape=feature_shape)


@dataclass
class StepResult:
    step: int
    loss: float
    direction_losses: Dict[str, float] = field(default_factory=dict)


class Trainer:
    """Adam with elementwise gradient clipping over the summed direction losses."""

    def __init__(
        self,
        model: CaptionModel,
        vocab: Vocabulary,
        config: RunConfig,
        feature_shape: Sequence[int],
        step: int = 0
    ):
        self.model = model
        self.vocab = vocab
        self.config = config
        self.feature_shape = tuple(feature_shape)
        self.step = step
        self.logger = logging.getLogger(self.__class__.__name__)
        if config.share_direction_params and not config.joint_directions and len(config.directions) > 1:
            raise ConfigError("Independent direction training needs unshared encoders", field="joint_directions")
        self.optimizers = self._build_optimizers()

    def _adam(self, params):
        return torch.optim.Adam(params, lr=self.config.learning_rate)

    def _build_optimizers(self) -> List[Tuple[torch.optim.Optimizer, List[str]]]:
        named = list(self.model.named_parameters())
        if self.config.joint_directions or len(self.model.directions) == 1:
            return [(self._adam([p for _, p in named]), [n for n, _ in named])]
        groups = []
        for direction in self.model.directions:
            owned = {id(p) for p in self.model.pipelines[direction].parameters()}
            chosen = [(n, p) for n, p in named if id(p) in owned]
            groups.append((self._adam([p for _, p in chosen]), [f"{direction}:{n}" for n, _ in chosen]))
        return groups

    def restore(self, checkpoint: Checkpoint):
        self.step = checkpoint.step
        for optimizer, names in self.optimizers:
            restore_optimizer(optimizer, names, checkpoint)
        self.logger.info(f"⏩ Resumed from step {self.step}")

    def checkpoint(self) -> Checkpoint:
        return capture(self.model, self.vocab, self.config, self.step, self.feature_shape, self.optimizers)

    def _direction_losses(self, batch: CaptionBatch) -> Dict[str, torch.Tensor]:
        logits = self.model(batch.inputs, batch.tokens)
        return {d: masked_cross_entropy(logits[d], batch.targets, batch.mask) for d in self.model.directions}

    def train_step(self, batch: CaptionBatch) -> StepResult:
        """One optimizer update on ``batch``; returns the summed loss before the update."""
        if len(batch) == 0:
            raise InvalidInputError("Cannot train on an empty batch")
        self.model.train()
        for optimizer, _ in self.optimizers:
            optimizer.zero_grad(set_to_none=True)

        losses = self._direction_losses(batch)
        total = sum(losses.values())
        if not torch.isfinite(total):
            raise NumericError(f"Non-finite loss {float(total)} at step {self.step + 1}")

        if len(self.optimizers) == 1:
            total.backward()
            clip_gradients(self.model.parameters(), self.config.grad_clip)
            self.optimizers[0][0].step()
        else:
            for direction, (optimizer, _) in zip(self.model.directions, self.optimizers):
                losses[direction].backward()
                params = optimizer.param_groups[0]["params"]
                clip_gradients(params, self.config.grad_clip)
                optimizer.step()

        self.step += 1
        return StepResult(step=self.step, loss=float(total), direction_losses={d: float(v) for d, v in losses.items()})

    def evaluate_loss(self, data: TrainingSet) -> float:
        """Token-weighted mean of the summed direction losses, dropout off."""
        self.model.eval()
        total, tokens = 0.0, 0
        with torch.no_grad():
            for start in range(0, len(data), self.config.batch_size):
                rows = list(range(start, min(start + self.config.batch_size, len(data))))
                batch = collate(rows, data.sentences, data.tensors)
                count = int(batch.mask.sum())
                total += float(sum(self._direction_losses(batch).values())) * count
                tokens += count
        return total / max(tokens, 1)

    def _batches(self, size: int):
        """Deterministic per-epoch shuffles; the order after a resume matches an uninterrupted run."""
        per_epoch = math.ceil(size / self.config.batch_size)
        epoch, position = divmod(self.step, per_epoch)
        while True:
            generator = torch.Generator().manual_seed(self.config.seed + epoch)
            order = torch.randperm(size, generator=generator).tolist()
            for b in range(position, per_epoch):
                yield order[b * self.config.batch_size:(b + 1) * self.config.batch_size]
            epoch, position = epoch + 1, 0

    def fit(self, train: TrainingSet, val: Optional[TrainingSet] = None, checkpoint_path: Optional[str] = None) -> List[StepResult]:
        """Trains until ``max_steps`` or validation early stopping."""
        config = self.config
        if len(train) == 0:
            raise InvalidInputError("Training set is empty")
        history: List[StepResult] = []
        best_val, stale = float("inf"), 0
        started = time.time()
        self.logger.info(
            f"🚀 Training {sum(p.numel() for p in self.model.parameters())} parameters on {len(train)} sentences "
            f"(directions={','.join(self.model.directions)}, objects={config.use_objects})"
        )
        with JsonLinesWriter(config.log_file or None) as log:
            for rows in self._batches(len(train)):
                if self.step >= config.max_steps:
                    break
                result = self.train_step(collate(rows, train.sentences, train.tensors))
                history.append(result)
                log.write({"step": result.step, "loss": result.loss, "lr": config.learning_rate,
                           "wallclock": round(time.time() - started, 3)})
                if result.step % config.log_every == 0:
                    self.logger.info(f"📉 step {result.step}: loss {result.loss:.4f}")
                if checkpoint_path and result.step % config.checkpoint_every == 0:
                    save_checkpoint(checkpoint_path, self.checkpoint())
                if val is not None and len(val) and result.step % config.eval_every == 0:
                    val_loss = self.evaluate_loss(val)
                    self.logger.info(f"🔎 step {result.step}: validation loss {val_loss:.4f}")
                    if val_loss < best_val:
                        best_val, stale = val_loss, 0
                    else:
                        stale += 1
                        if stale >= config.patience:
                            self.logger.info(f"🛑 Early stopping after {stale} evaluations without improvement")
                            break
        if checkpoint_path:
            save_checkpoint(checkpoint_path, self.checkpoint())
        return history


def init_model(vocab: Vocabulary, feature_shape: Sequence[int], config: RunConfig) -> CaptionModel:
    """Builds and seeds a fresh model for features of shape (H, W, D)."""
    model = CaptionModel(len(vocab), int(feature_shape[2]), config)
    model.reset_parameters(config.seed)
    return model


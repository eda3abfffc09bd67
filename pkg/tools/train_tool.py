import os
from dataclasses import replace

import torch

from dataio.vocabulary import build_vocabulary
from tools.base_tool import BaseTool
from training.checkpoint import build_model, load_checkpoint
from training.trainer import Trainer, build_training_set, init_model, seed_everything


class TrainTool(BaseTool):
    """Trains the captioner on the train split, validating on the val split when one is available."""

    def run(self):
        config = self.config
        seed_everything(config.seed)
        dataset = self.load_dataset()
        records = self.load_captions()
        train_ids = self.split_ids("train_split", dataset)

        resume_from = None
        if config.resume and os.path.exists(config.checkpoint):
            resume_from = load_checkpoint(config.checkpoint)
        elif config.resume:
            self.logger.warning(f"⚠️ --resume given but {config.checkpoint} does not exist; starting fresh")

        if resume_from is not None:
            # structure and vocabulary come from the checkpoint; schedule knobs from this run
            config = replace(
                config,
                **{k: getattr(resume_from.config, k) for k in
                   ("T", "N", "K", "hidden", "embed", "attention", "kernel_size", "max_sentence_len",
                    "direction", "use_objects", "assignment_softmax", "share_direction_params")}
            )
            vocab = resume_from.vocab
        else:
            vocab = build_vocabulary([r for r in records if r.video_id in set(train_ids)], config.min_count)

        train = build_training_set(dataset, records, train_ids, vocab, config)
        val = None
        val_path = config.resolve("val_split")
        if config.val_split or os.path.exists(val_path):
            val = build_training_set(dataset, records, self.split_ids("val_split"), vocab, config)

        if resume_from is not None:
            model = build_model(resume_from, config)
            trainer = Trainer(model, vocab, config, resume_from.feature_shape)
            trainer.restore(resume_from)
            # dropout masks continue from a step-dependent stream
            torch.manual_seed(config.seed + trainer.step)
        else:
            model = init_model(vocab, train.feature_shape, config)
            trainer = Trainer(model, vocab, config, train.feature_shape)

        history = trainer.fit(train, val, checkpoint_path=config.checkpoint)
        summary = {
            "checkpoint": config.checkpoint,
            "step": trainer.step,
            "loss": history[-1].loss if history else None,
            "vocab_size": len(vocab),
            "sentences": len(train),
        }
        self.write_json(summary)
        return summary

"""Checkpoint container.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header
(config, vocabulary, feature shape, step, array table, Adam step counts),
then every array in header order as raw little-endian float32.
"""
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from dataio.vocabulary import Vocabulary
from models.captioner import CaptionModel
from tools.config_loader import RunConfig, run_config_from_dict
from utils.errors import DataLoadError, InvalidInputError
from utils.logging_utils import get_logger

MAGIC = b"CFCKPT01"
FLOAT = np.dtype("<f4")
ADAM_PREFIX = "adam/"

logger = get_logger(__name__)


@dataclass
class Checkpoint:
    config: RunConfig
    vocab: Vocabulary
    step: int
    feature_shape: Tuple[int, int, int]
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_steps: Dict[str, int] = field(default_factory=dict)

    @property
    def parameters(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.arrays.items() if not k.startswith(ADAM_PREFIX)}

    def header(self) -> dict:
        return {
            "format_version": 1,
            "config": self.config.to_dict(),
            "vocab": self.vocab.tokens,
            "step": self.step,
            "feature_shape": list(self.feature_shape),
            "arrays": [{"name": name, "shape": list(array.shape)} for name, array in self.arrays.items()],
            "adam_steps": self.adam_steps,
        }

    def to_bytes(self) -> bytes:
        header = json.dumps(self.header(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        chunks = [MAGIC, struct.pack("<Q", len(header)), header]
        chunks.extend(np.ascontiguousarray(array, dtype=FLOAT).tobytes() for array in self.arrays.values())
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "Checkpoint":
        if data[:len(MAGIC)] != MAGIC:
            raise DataLoadError(f"{source} is not a CaptionFlow checkpoint", path=source)
        offset = len(MAGIC)
        (header_len,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        try:
            header = json.loads(data[offset:offset + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataLoadError(f"{source}: corrupt checkpoint header ({e})", path=source) from e
        offset += header_len
        arrays = {}
        for item in header["arrays"]:
            shape = tuple(item["shape"])
            count = int(np.prod(shape))
            end = offset + count * FLOAT.itemsize
            if end > len(data):
                raise DataLoadError(f"{source}: truncated array {item['name']}", path=source)
            arrays[item["name"]] = np.frombuffer(data, dtype=FLOAT, count=count, offset=offset).reshape(shape).copy()
            offset = end
        if offset != len(data):
            raise DataLoadError(f"{source}: {len(data) - offset} trailing bytes after the last array", path=source)
        return cls(
            config=run_config_from_dict(header["config"]),
            vocab=Vocabulary(header["vocab"]),
            step=int(header["step"]),
            feature_shape=tuple(header["feature_shape"]),
            arrays=arrays,
            adam_steps={k: int(v) for k, v in header.get("adam_steps", {}).items()},
        )


def capture(
    model: CaptionModel,
    vocab: Vocabulary,
    config: RunConfig,
    step: int,
    feature_shape: Sequence[int],
    optimizers: Sequence[Tuple[torch.optim.Optimizer, List[str]]] = ()
) -> Checkpoint:
    """Snapshots model parameters and, when given, Adam moments keyed by parameter name."""
    arrays = {name: p.detach().cpu().numpy().astype(FLOAT) for name, p in model.named_parameters()}
    adam_steps = {}
    for optimizer, names in optimizers:
        params = optimizer.param_groups[0]["params"]
        for name, param in zip(names, params):
            state = optimizer.state.get(param)
            if not state:
                continue
            arrays[f"{ADAM_PREFIX}{name}/exp_avg"] = state["exp_avg"].detach().cpu().numpy().astype(FLOAT)
            arrays[f"{ADAM_PREFIX}{name}/exp_avg_sq"] = state["exp_avg_sq"].detach().cpu().numpy().astype(FLOAT)
            adam_steps[name] = int(state["step"])
    return Checkpoint(config=config, vocab=vocab, step=step, feature_shape=tuple(int(s) for s in feature_shape),
                      arrays=arrays, adam_steps=adam_steps)


def save_checkpoint(path: str, checkpoint: Checkpoint):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as f:
        f.write(checkpoint.to_bytes())
    os.replace(tmp_path, path)
    logger.info(f"💾 Saved checkpoint at step {checkpoint.step} to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise DataLoadError(f"Checkpoint not found: {path}", path=path)
    with open(path, "rb") as f:
        return Checkpoint.from_bytes(f.read(), source=path)


def build_model(checkpoint: Checkpoint, config: Optional[RunConfig] = None) -> CaptionModel:
    """Rebuilds the model stored in ``checkpoint``; ``config`` may change runtime-only fields."""
    config = config or checkpoint.config
    model = CaptionModel(len(checkpoint.vocab), checkpoint.feature_shape[2], config)
    params = dict(model.named_parameters())
    stored = checkpoint.parameters
    missing = sorted(set(params) - set(stored))
    if missing:
        raise InvalidInputError(f"Checkpoint lacks parameters {missing[:5]}; model structure differs")
    with torch.no_grad():
        for name, param in params.items():
            if tuple(param.shape) != stored[name].shape:
                raise InvalidInputError(f"Parameter {name}: checkpoint shape {stored[name].shape}, model {tuple(param.shape)}")
            param.copy_(torch.from_numpy(stored[name]))
    return model


def restore_optimizer(optimizer: torch.optim.Optimizer, names: List[str], checkpoint: Checkpoint):
    """Loads Adam moments saved by ``capture`` into an optimizer built over the same named parameters."""
    params = optimizer.param_groups[0]["params"]
    for name, param in zip(names, params):
        if name not in checkpoint.adam_steps:
            continue
        optimizer.state[param] = {
            "step": torch.tensor(float(checkpoint.adam_steps[name])),
            "exp_avg": torch.from_numpy(checkpoint.arrays[f"{ADAM_PREFIX}{name}/exp_avg"]).to(param.dtype),
            "exp_avg_sq": torch.from_numpy(checkpoint.arrays[f"{ADAM_PREFIX}{name}/exp_avg_sq"]).to(param.dtype),
        }

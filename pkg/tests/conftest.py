import os

import numpy as np
import pytest
import torch

from dataio.synthetic import synthesize_dataset
from graph.types import BoundingBox, FrameDetections, ObjectRegion, VideoSample
from tools.config_loader import RunConfig
from training.trainer import seed_everything


@pytest.fixture(autouse=True)
def deterministic_torch():
    seed_everything(0)
    yield


@pytest.fixture
def toy_corpus(tmp_path):
    """The default 5-video planted corpus with T=6, N=2 and 2x2x8 feature maps."""
    return synthesize_dataset(str(tmp_path / "toy"), seed=0, num_videos=5, T=6, N=2, H=2, W=2, D=8, G=16)


@pytest.fixture
def tiny_config(toy_corpus):
    """A fast configuration pointed at ``toy_corpus``."""
    return RunConfig(
        T=6, N=2, K=2, hidden=8, embed=8, attention=4, dropout=0.0,
        learning_rate=1e-3, batch_size=5, max_steps=3, log_every=1, eval_every=1000,
        checkpoint_every=1000, data_root=toy_corpus.root,
        checkpoint=os.path.join(toy_corpus.root, "model.ckpt"),
    )


def random_video(rng, T=3, N=2, H=2, W=2, D=3, G=4, video_id="random"):
    """A VideoSample with random boxes, appearances and feature maps."""
    frames = []
    for t in range(1, T + 1):
        regions = []
        for _ in range(N):
            x, y = rng.uniform(0, 50, size=2)
            w, h = rng.uniform(5, 30, size=2)
            regions.append(ObjectRegion(
                box=BoundingBox(x, y, x + w, y + h),
                appearance=rng.normal(size=G),
                feature_map=rng.normal(size=(H, W, D)),
                confidence=float(rng.uniform(0.1, 1.0)),
            ))
        frames.append(FrameDetections(frame_index=t, regions=regions, global_feature_map=rng.normal(size=(H, W, D))))
    return VideoSample(video_id=video_id, frames=frames)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def double_tensor(array) -> torch.Tensor:
    return torch.as_tensor(np.asarray(array), dtype=torch.float64)

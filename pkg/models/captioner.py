"""The assembled captioner: per direction an object VLAD encoder, a frame VLAD
encoder and a hierarchical-attention decoder."""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import torch
import torch.nn as nn

from models.aggregation import VladEncoder
from models.decoder import CaptionDecoder
from tools.config_loader import RunConfig

# ModuleDict keys; "forward" would shadow nn.Module.forward
PIPELINE_KEYS = {"forward": "fwd", "backward": "bwd"}


@dataclass
class EncodedVideo:
    object_vlads: Optional[torch.Tensor]  # (B, N, T, K*D)
    frame_vlads: torch.Tensor             # (B, T, K*D)

    def expand(self, batch_size: int) -> "EncodedVideo":
        objects = None if self.object_vlads is None else self.object_vlads.expand(batch_size, *self.object_vlads.shape[1:])
        return EncodedVideo(objects, self.frame_vlads.expand(batch_size, *self.frame_vlads.shape[1:]))


class DirectionalCaptioner(nn.Module):
    """Encoders and decoder for one temporal direction."""

    def __init__(self, object_encoder: Optional[VladEncoder], frame_encoder: VladEncoder, decoder: CaptionDecoder):
        super().__init__()
        self.object_encoder = object_encoder
        self.frame_encoder = frame_encoder
        self.decoder = decoder

    def encode(self, object_feats: Optional[torch.Tensor], frame_feats: torch.Tensor) -> EncodedVideo:
        """
        Args:
            object_feats: (B, N, T, D, H, W) trajectory-ordered region maps, or None
            frame_feats: (B, T, D, H, W) direction-ordered global maps
        """
        frame_vlads = self.frame_encoder(frame_feats)
        object_vlads = None
        if self.object_encoder is not None and object_feats is not None:
            B, N = object_feats.shape[:2]
            flat = self.object_encoder(object_feats.reshape(B * N, *object_feats.shape[2:]))
            object_vlads = flat.reshape(B, N, *flat.shape[1:])
        return EncodedVideo(object_vlads=object_vlads, frame_vlads=frame_vlads)

    def forward(self, object_feats: Optional[torch.Tensor], frame_feats: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
        encoded = self.encode(object_feats, frame_feats)
        return self.decoder(encoded.object_vlads, encoded.frame_vlads, tokens)


class CaptionModel(nn.Module):
    """One DirectionalCaptioner per configured direction ("forward", "backward")."""

    def __init__(self, vocab_size: int, feature_channels: int, config: RunConfig):
        super().__init__()
        self.logger = logging.getLogger(self.__class__.__name__)
        self.vocab_size = vocab_size
        self.feature_channels = feature_channels
        self.directions = tuple(config.directions)
        self.use_objects = config.use_objects

        def encoder():
            return VladEncoder(feature_channels, config.K, config.kernel_size, config.assignment_softmax)

        shared_objects = encoder() if config.share_direction_params and config.use_objects else None
        shared_frames = encoder() if config.share_direction_params else None
        vlad_size = config.K * feature_channels

        pipelines = {}
        for direction in self.directions:
            object_encoder = None
            if config.use_objects:
                object_encoder = shared_objects if shared_objects is not None else encoder()
            frame_encoder = shared_frames if shared_frames is not None else encoder()
            decoder = CaptionDecoder(
                vocab_size=vocab_size,
                frame_feature_size=vlad_size,
                object_feature_size=vlad_size,
                hidden_size=config.hidden,
                embed_size=config.embed,
                attention_size=config.attention,
                dropout=config.dropout,
                max_steps=config.max_sentence_len + 1,
                use_objects=config.use_objects,
            )
            pipelines[PIPELINE_KEYS[direction]] = DirectionalCaptioner(object_encoder, frame_encoder, decoder)
        self.directional = nn.ModuleDict(pipelines)

    @property
    def pipelines(self) -> Dict[str, DirectionalCaptioner]:
        """Direction name -> its DirectionalCaptioner."""
        return {d: self.directional[PIPELINE_KEYS[d]] for d in self.directions}

    def reset_parameters(self, seed: int):
        generator = torch.Generator().manual_seed(seed)
        for direction in self.directions:
            pipeline = self.pipelines[direction]
            if pipeline.object_encoder is not None:
                pipeline.object_encoder.reset_parameters(generator)
            pipeline.frame_encoder.reset_parameters(generator)
            pipeline.decoder.reset_parameters(generator)
        self.logger.debug(f"🎲 Initialized {sum(p.numel() for p in self.parameters())} parameters (seed {seed})")

    def forward(self, inputs: Dict[str, Dict[str, torch.Tensor]], tokens: torch.Tensor) -> Dict[str, torch.Tensor]:
        """Teacher-forced logits per direction; ``inputs[direction]`` holds "objects" and "frames"."""
        return {
            direction: self.pipelines[direction](
                inputs[direction]["objects"] if self.use_objects else None,
                inputs[direction]["frames"],
                tokens,
            )
            for direction in self.directions
        }

"""Hierarchically attentive GRU caption decoder.

At every step the previous hidden state drives three independent additive
attention blocks: temporal attention over each object's VLAD sequence,
object attention over the N merged object vectors, and temporal attention
over the global-frame VLAD sequence. The two attended vectors and the input
word embedding feed a bias-free GRU update.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from dataio.vocabulary import Vocabulary
from models.aggregation import uniform_
from utils.errors import InvalidInputError


class AttentionBlock(nn.Module):
    """e_m = w^T tanh(W h + U f_m + b), normalised with a softmax over m."""

    def __init__(self, hidden_size: int, feature_size: int, attention_size: int):
        super().__init__()
        self.W_att = nn.Linear(hidden_size, attention_size, bias=False)
        self.U_att = nn.Linear(feature_size, attention_size, bias=False)
        self.b_att = nn.Parameter(torch.zeros(attention_size))
        self.w_att = nn.Linear(attention_size, 1, bias=False)

    def scores(self, h_prev: torch.Tensor, feats: torch.Tensor) -> torch.Tensor:
        """(B, H), (B, M, F) -> (B, M) relevance scores."""
        projected = torch.tanh(self.W_att(h_prev).unsqueeze(1) + self.U_att(feats) + self.b_att)
        return self.w_att(projected).squeeze(-1)

    def forward(self, h_prev: torch.Tensor, feats: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        if feats.shape[1] < 1:
            raise InvalidInputError("Attention needs at least one feature")
        weights = F.softmax(self.scores(h_prev, feats), dim=1)
        merged = torch.bmm(weights.unsqueeze(1), feats).squeeze(1)
        return weights, merged


def attention_weights(block: AttentionBlock, h_prev: torch.Tensor, feats: torch.Tensor) -> torch.Tensor:
    return block(h_prev, feats)[0]


def temporal_attend(block: AttentionBlock, h_prev: torch.Tensor, vlads: torch.Tensor) -> torch.Tensor:
    """Merges T per-step vectors (B, T, F) into one (B, F)."""
    return block(h_prev, vlads)[1]


def object_attend(block: AttentionBlock, h_prev: torch.Tensor, phis: torch.Tensor) -> torch.Tensor:
    """Merges N per-object vectors (B, N, F) into one (B, F)."""
    return block(h_prev, phis)[1]


@dataclass
class DecoderState:
    h: torch.Tensor
    step_index: int = 0


@dataclass
class AttendedFeatures:
    frame: torch.Tensor
    objects: Optional[torch.Tensor]
    frame_weights: torch.Tensor
    object_weights: Optional[torch.Tensor] = None


class CaptionDecoder(nn.Module):

    def __init__(
        self,
        vocab_size: int,
        frame_feature_size: int,
        object_feature_size: int,
        hidden_size: int = 512,
        embed_size: int = 512,
        attention_size: int = 100,
        dropout: float = 0.5,
        max_steps: int = 17,
        use_objects: bool = True
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.object_feature_size = object_feature_size
        self.max_steps = max_steps
        self.use_objects = use_objects

        self.embedding = nn.Embedding(vocab_size, embed_size)

        def lin(n_in):
            return nn.Linear(n_in, hidden_size, bias=False)

        self.W_vz, self.W_dz, self.U_dz = lin(frame_feature_size), lin(embed_size), lin(hidden_size)
        self.W_vr, self.W_dr, self.U_dr = lin(frame_feature_size), lin(embed_size), lin(hidden_size)
        self.W_vh, self.U_dh = lin(frame_feature_size), lin(hidden_size)

        self.output = nn.Linear(hidden_size, vocab_size)
        self.dropout = nn.Dropout(dropout)

        self.frame_attention = AttentionBlock(hidden_size, frame_feature_size, attention_size)
        # the frame-only baseline carries no object parameters at all
        if use_objects:
            self.W_oz, self.W_or, self.W_oh = lin(object_feature_size), lin(object_feature_size), lin(object_feature_size)
            self.object_temporal_attention = AttentionBlock(hidden_size, object_feature_size, attention_size)
            self.object_attention = AttentionBlock(hidden_size, object_feature_size, attention_size)
        else:
            self.W_oz = self.W_or = self.W_oh = None
            self.object_temporal_attention = self.object_attention = None

    def reset_parameters(self, generator: torch.Generator = None):
        for param in self.parameters():
            fan_in = param.shape[1] if param.dim() == 2 else self.hidden_size
            uniform_(param, 1.0 / fan_in ** 0.5, generator)

    def initial_state(self, batch_size: int, like: torch.Tensor) -> DecoderState:
        return DecoderState(h=like.new_zeros(batch_size, self.hidden_size), step_index=0)

    def attend(self, h_prev: torch.Tensor, object_vlads: Optional[torch.Tensor], frame_vlads: torch.Tensor) -> AttendedFeatures:
        """
        Hierarchical attention for one decoding step.

        Args:
            h_prev: (B, hidden)
            object_vlads: (B, N, T, F_o); ignored by the frame-only baseline
            frame_vlads: (B, T, F_f)
        """
        frame_weights, phi_f = self.frame_attention(h_prev, frame_vlads)
        if not self.use_objects:
            return AttendedFeatures(frame=phi_f, objects=None, frame_weights=frame_weights)
        if object_vlads is None:
            raise InvalidInputError("Object VLADs are required when the decoder attends to objects")

        B, N, T, F_o = object_vlads.shape
        h_rep = h_prev.unsqueeze(1).expand(B, N, h_prev.shape[1]).reshape(B * N, -1)
        per_object = temporal_attend(self.object_temporal_attention, h_rep, object_vlads.reshape(B * N, T, F_o))
        object_weights, phi_o = self.object_attention(h_prev, per_object.reshape(B, N, F_o))
        return AttendedFeatures(frame=phi_f, objects=phi_o, frame_weights=frame_weights, object_weights=object_weights)

    def gru_update(self, h_prev: torch.Tensor, phi_f: torch.Tensor, phi_o: Optional[torch.Tensor], x_w: torch.Tensor) -> torch.Tensor:
        z_in = self.W_vz(phi_f) + self.W_dz(x_w) + self.U_dz(h_prev)
        r_in = self.W_vr(phi_f) + self.W_dr(x_w) + self.U_dr(h_prev)
        h_in = self.W_vh(phi_f)
        if self.use_objects:
            if phi_o is None:
                raise InvalidInputError("phi_o is required when the decoder attends to objects")
            z_in = z_in + self.W_oz(phi_o)
            r_in = r_in + self.W_or(phi_o)
            h_in = h_in + self.W_oh(phi_o)
        z = torch.sigmoid(z_in)
        r = torch.sigmoid(r_in)
        # the word embedding enters only the gates
        candidate = torch.tanh(h_in + self.U_dh(r * h_prev))
        return (1 - z) * h_prev + z * candidate

    def step(
        self,
        state: DecoderState,
        phi_f: torch.Tensor,
        phi_o: Optional[torch.Tensor],
        word_in: torch.Tensor
    ) -> Tuple[DecoderState, torch.Tensor]:
        """Advances the decoder by one word; returns the new state and (B, |V|) logits."""
        if word_in.dtype not in (torch.int64, torch.int32):
            raise InvalidInputError("word_in must hold integer token indices")
        if word_in.numel() and (int(word_in.min()) < 0 or int(word_in.max()) >= self.vocab_size):
            raise InvalidInputError(f"Token index out of range [0, {self.vocab_size})")
        x_w = self.embedding(word_in)
        h = self.gru_update(state.h, phi_f, phi_o, x_w)
        logits = self.output(self.dropout(h))
        return DecoderState(h=h, step_index=state.step_index + 1), logits

    def forward(self, object_vlads: Optional[torch.Tensor], frame_vlads: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
        """
        Teacher-forced decoding.

        Args:
            object_vlads: (B, N, T, F_o), or None for the frame-only baseline
            frame_vlads: (B, T, F_f)
            tokens: (B, L) gold input tokens starting with BOS

        Returns:
            torch.Tensor: (B, L, |V|) logits
        """
        if tokens.dim() != 2 or tokens.shape[1] < 1:
            raise InvalidInputError(f"tokens must be (B, L) with L >= 1, got {tuple(tokens.shape)}")
        if tokens.shape[1] > self.max_steps:
            raise InvalidInputError(f"Sequence of {tokens.shape[1]} steps exceeds the limit of {self.max_steps}")
        if bool((tokens[:, 0] != Vocabulary.bos_index).any()):
            raise InvalidInputError(f"Every input sequence must start with BOS ({Vocabulary.bos_index})")
        state = self.initial_state(tokens.shape[0], frame_vlads)
        logits = []
        for l in range(tokens.shape[1]):
            attended = self.attend(state.h, object_vlads, frame_vlads)
            state, step_logits = self.step(state, attended.frame, attended.objects, tokens[:, l])
            logits.append(step_logits)
        return torch.stack(logits, dim=1)


def decoder_step(
    decoder: CaptionDecoder,
    state: DecoderState,
    phi_f: torch.Tensor,
    phi_o: torch.Tensor,
    word_in: torch.Tensor
) -> Tuple[DecoderState, torch.Tensor]:
    return decoder.step(state, phi_f, phi_o, word_in)


def word_distribution(logits: torch.Tensor) -> torch.Tensor:
    return F.softmax(logits, dim=-1)


def decode_train_sequence(
    decoder: CaptionDecoder,
    object_vlads: Optional[torch.Tensor],
    frame_vlads: torch.Tensor,
    tokens: torch.Tensor
) -> torch.Tensor:
    return decoder(object_vlads, frame_vlads, tokens)

"""Learnable VLAD aggregation driven by a convolutional GRU.

Feature maps are channels-first inside the models: a step is (B, D, H, W),
a sequence (B, T, D, H, W). The C-GRU hidden state (B, K, H, W) is used
directly as the soft assignment of every location to the K cluster centers.
"""
import math
from typing import List, Sequence, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from utils.errors import InvalidInputError


def uniform_(tensor: torch.Tensor, half_width: float, generator: torch.Generator = None) -> torch.Tensor:
    with torch.no_grad():
        return tensor.uniform_(-half_width, half_width, generator=generator)


class ConvGRUCell(nn.Module):
    """C-GRU without biases: z, r gates and a tanh candidate computed by same-padded 2-D convolutions."""

    def __init__(self, in_channels: int, num_clusters: int, kernel_size: int = 3):
        super().__init__()
        if kernel_size % 2 == 0:
            raise InvalidInputError(f"kernel_size must be odd for same-padding, got {kernel_size}")
        self.in_channels = in_channels
        self.num_clusters = num_clusters
        self.kernel_size = kernel_size
        padding = kernel_size // 2

        def conv(c_in):
            return nn.Conv2d(c_in, num_clusters, kernel_size, padding=padding, bias=False)

        self.W_z, self.W_r, self.W_a = conv(in_channels), conv(in_channels), conv(in_channels)
        self.U_z, self.U_r, self.U_a = conv(num_clusters), conv(num_clusters), conv(num_clusters)

    def reset_parameters(self, generator: torch.Generator = None):
        for conv in (self.W_z, self.W_r, self.W_a, self.U_z, self.U_r, self.U_a):
            fan_in = conv.in_channels * self.kernel_size * self.kernel_size
            uniform_(conv.weight, 1.0 / math.sqrt(fan_in), generator)

    def forward(self, x: torch.Tensor, a_prev: torch.Tensor) -> torch.Tensor:
        z = torch.sigmoid(self.W_z(x) + self.U_z(a_prev))
        r = torch.sigmoid(self.W_r(x) + self.U_r(a_prev))
        candidate = torch.tanh(self.W_a(x) + self.U_a(r * a_prev))
        return (1 - z) * a_prev + z * candidate


def _check_step_shapes(cell: ConvGRUCell, x: torch.Tensor, a_prev: torch.Tensor):
    if x.dim() != 4 or x.shape[1] != cell.in_channels:
        raise InvalidInputError(f"Expected x of shape (B, {cell.in_channels}, H, W), got {tuple(x.shape)}")
    expected = (x.shape[0], cell.num_clusters, x.shape[2], x.shape[3])
    if tuple(a_prev.shape) != expected:
        raise InvalidInputError(f"Expected a_prev of shape {expected}, got {tuple(a_prev.shape)}")


def cgru_step(cell: ConvGRUCell, x_t: torch.Tensor, a_prev: torch.Tensor) -> torch.Tensor:
    """One C-GRU update; H x W is preserved."""
    _check_step_shapes(cell, x_t, a_prev)
    return cell(x_t, a_prev)


def assign_sequence(cell: ConvGRUCell, xs: Union[torch.Tensor, Sequence[torch.Tensor]]) -> torch.Tensor:
    """
    Runs the C-GRU over a sequence from a zero initial state.

    Args:
        cell: the C-GRU
        xs: (B, T, D, H, W) tensor or a list of T (B, D, H, W) tensors

    Returns:
        torch.Tensor: (B, T, K, H, W) hidden states a_1..a_T
    """
    steps = list(xs.unbind(1)) if isinstance(xs, torch.Tensor) else list(xs)
    if not steps:
        raise InvalidInputError("assign_sequence needs at least one feature map")
    first = steps[0]
    if first.dim() != 4:
        raise InvalidInputError(f"Expected (B, D, H, W) feature maps, got {tuple(first.shape)}")
    a = first.new_zeros(first.shape[0], cell.num_clusters, first.shape[2], first.shape[3])
    states: List[torch.Tensor] = []
    for x_t in steps:
        a = cgru_step(cell, x_t, a)
        states.append(a)
    return torch.stack(states, dim=1)


def vlad_encode_step(
    x_t: torch.Tensor,
    a_t: torch.Tensor,
    centers: torch.Tensor,
    assignment_softmax: bool = False
) -> torch.Tensor:
    """
    Soft-assignment VLAD: vl[k] = sum_{h,w} a(h, w, k) * (x(h, w) - c_k).

    Args:
        x_t: (B, D, H, W) local features
        a_t: (B, K, H, W) assignments, used raw unless ``assignment_softmax``
        centers: (K, D) cluster centers

    Returns:
        torch.Tensor: (B, K, D) descriptor
    """
    if x_t.dim() != 4 or a_t.dim() != 4 or centers.dim() != 2:
        raise InvalidInputError("vlad_encode_step expects x (B,D,H,W), a (B,K,H,W), centers (K,D)")
    B, D, H, W = x_t.shape
    K = centers.shape[0]
    if tuple(a_t.shape) != (B, K, H, W) or centers.shape[1] != D:
        raise InvalidInputError(
            f"Shape mismatch: x {tuple(x_t.shape)}, a {tuple(a_t.shape)}, centers {tuple(centers.shape)}"
        )
    if assignment_softmax:
        a_t = F.softmax(a_t, dim=1)
    weighted = torch.einsum("bkhw,bdhw->bkd", a_t, x_t)
    mass = a_t.sum(dim=(2, 3))
    return weighted - mass.unsqueeze(-1) * centers.unsqueeze(0)


class VladEncoder(nn.Module):
    """C-GRU assignments plus K learnable centers; one instance per (stream, direction)."""

    def __init__(self, in_channels: int, num_clusters: int, kernel_size: int = 3, assignment_softmax: bool = False):
        super().__init__()
        self.cgru = ConvGRUCell(in_channels, num_clusters, kernel_size)
        self.centers = nn.Parameter(torch.empty(num_clusters, in_channels))
        self.assignment_softmax = assignment_softmax

    @property
    def output_size(self) -> int:
        return self.centers.shape[0] * self.centers.shape[1]

    def reset_parameters(self, generator: torch.Generator = None):
        self.cgru.reset_parameters(generator)
        uniform_(self.centers, 1.0 / math.sqrt(self.centers.shape[1]), generator)

    def forward(self, xs: torch.Tensor) -> torch.Tensor:
        """(B, T, D, H, W) -> (B, T, K*D), descriptors flattened k-major."""
        assignments = assign_sequence(self.cgru, xs)
        descriptors = [
            vlad_encode_step(xs[:, t], assignments[:, t], self.centers, self.assignment_softmax)
            for t in range(xs.shape[1])
        ]
        stacked = torch.stack(descriptors, dim=1)
        return stacked.reshape(stacked.shape[0], stacked.shape[1], -1)


def encode_trajectory(features: torch.Tensor, encoder: VladEncoder) -> torch.Tensor:
    """
    Encodes one or many sequences of feature maps into per-step VLAD vectors.

    Object trajectories share the encoder: pass (B*N, T, D, H, W) and reshape.
    """
    if features.dim() == 4:
        return encoder(features.unsqueeze(0)).squeeze(0)
    if features.dim() != 5:
        raise InvalidInputError(f"Expected (T, D, H, W) or (B, T, D, H, W) features, got {tuple(features.shape)}")
    if features.shape[1] == 0:
        raise InvalidInputError("encode_trajectory needs at least one feature map")
    return encoder(features)

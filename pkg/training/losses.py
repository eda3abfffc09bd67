from typing import Iterable, Union

import torch
import torch.nn.functional as F

from utils.errors import InvalidInputError


def masked_cross_entropy(logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """
    Mean of -log p(gold) over the positions where ``mask`` is True.

    Args:
        logits: (B, L, |V|)
        targets: (B, L) gold token indices
        mask: (B, L) True on real prediction positions, False on padding
    """
    if logits.shape[:2] != targets.shape or targets.shape != mask.shape:
        raise InvalidInputError(
            f"Shape mismatch: logits {tuple(logits.shape)}, targets {tuple(targets.shape)}, mask {tuple(mask.shape)}"
        )
    mask = mask.bool()
    count = int(mask.sum())
    if count == 0:
        raise InvalidInputError("Every position is masked; the loss is undefined")
    per_token = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), reduction="none")
    return (per_token * mask.reshape(-1).to(per_token.dtype)).sum() / count


def clip_gradients(
    grads: Union[torch.Tensor, Iterable[torch.nn.Parameter]],
    limit: float = 10.0
):
    """Clamps gradients elementwise to [-limit, limit].

    A tensor is clamped and returned; an iterable of parameters has its
    ``.grad`` fields clipped in place.
    """
    if isinstance(grads, torch.Tensor):
        return grads.clamp(-limit, limit)
    params = [p for p in grads if p.grad is not None]
    torch.nn.utils.clip_grad_value_(params, limit)
    return params

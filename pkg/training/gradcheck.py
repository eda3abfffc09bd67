"""Central finite differences against autograd, grouped by parameter role."""
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import torch
import torch.nn as nn

from dataio.vocabulary import RESERVED, Vocabulary
from models.captioner import CaptionModel
from tools.config_loader import RunConfig
from training.losses import masked_cross_entropy
from utils.logging_utils import get_logger

logger = get_logger(__name__)

GROUPS = (
    "cgru_kernels",
    "codebook",
    "frame_attention",
    "object_temporal_attention",
    "object_attention",
    "decoder_gru",
    "embedding",
    "output_projection",
)

# floor on the denominator so entries with near-zero gradients compare absolutely
RELATIVE_FLOOR = 1e-3


def parameter_group(name: str) -> str:
    """Maps a CaptionModel parameter name to its gradient-check group."""
    if ".cgru." in name:
        return "cgru_kernels"
    if name.endswith("centers"):
        return "codebook"
    for attention in ("frame_attention", "object_temporal_attention", "object_attention"):
        if f".{attention}." in name:
            return attention
    if ".embedding." in name:
        return "embedding"
    if ".output." in name:
        return "output_projection"
    return "decoder_gru"


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


@dataclass
class GradCheckReport:
    tolerance: float
    eps: float
    max_errors: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)

    @property
    def offenders(self) -> List[str]:
        return [group for group, error in self.max_errors.items() if error >= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.offenders

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "offenders": self.offenders,
            "groups": {g: {"max_relative_error": e, "entries": self.checked[g]} for g, e in self.max_errors.items()},
        }


def finite_difference_check(
    model: nn.Module,
    loss_fn: Callable[[], torch.Tensor],
    eps: float = 1e-6,
    tolerance: float = 1e-4,
    group_of: Callable[[str], str] = parameter_group
) -> GradCheckReport:
    """
    Compares autograd gradients with central differences, entry by entry.

    Args:
        model: module already converted to float64; it is put in eval mode
        loss_fn: closure evaluating the scalar loss of ``model``
        eps: finite-difference step
        tolerance: a group fails when its max relative error reaches this value
        group_of: maps parameter names to report groups

    Returns:
        GradCheckReport: max relative error and entry count per group
    """
    model.eval()
    report = GradCheckReport(tolerance=tolerance, eps=eps)
    named = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    if not named:
        return report
    for param in model.parameters():
        param.grad = None
    loss = loss_fn()
    if loss.requires_grad:
        loss.backward()
    analytic = {n: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)) for n, p in named}

    with torch.no_grad():
        for name, param in named:
            group = group_of(name)
            flat = param.view(-1)
            grad = analytic[name].view(-1)
            worst = report.max_errors.get(group, 0.0)
            for i in range(flat.numel()):
                original = float(flat[i])
                flat[i] = original + eps
                plus = float(loss_fn())
                flat[i] = original - eps
                minus = float(loss_fn())
                flat[i] = original
                numeric = (plus - minus) / (2 * eps)
                worst = max(worst, relative_error(float(grad[i]), numeric))
            report.max_errors[group] = worst
            report.checked[group] = report.checked.get(group, 0) + flat.numel()
            logger.debug(f"🧮 {name}: {flat.numel()} entries, group {group} max error {worst:.3e}")
    return report


@dataclass
class GradCheckInstance:
    model: CaptionModel
    inputs: Dict[str, Dict[str, torch.Tensor]]
    tokens: torch.Tensor
    targets: torch.Tensor
    mask: torch.Tensor

    def loss(self) -> torch.Tensor:
        logits = self.model(self.inputs, self.tokens)
        return sum(masked_cross_entropy(logits[d], self.targets, self.mask) for d in self.model.directions)


def small_instance(config: Optional[RunConfig] = None, seed: Optional[int] = None) -> GradCheckInstance:
    """
    A double-precision instance with T=2, H=W=2, D=3, K=2, hidden=3, |V|=5, N=2.

    Mode flags (direction, objects, softmax assignments, sharing) are taken from ``config``.
    """
    config = config or RunConfig()
    seed = config.seed if seed is None else seed
    small = replace(config, T=2, N=2, K=2, hidden=3, embed=3, attention=2, dropout=0.0, max_sentence_len=3)
    vocab = Vocabulary(list(RESERVED) + ["word"])
    D, H, W = 3, 2, 2

    model = CaptionModel(len(vocab), D, small)
    model.reset_parameters(seed)
    model.double()

    generator = torch.Generator().manual_seed(seed)
    inputs = {
        direction: {
            "objects": torch.randn(1, small.N, small.T, D, H, W, generator=generator, dtype=torch.float64),
            "frames": torch.randn(1, small.T, D, H, W, generator=generator, dtype=torch.float64),
        }
        for direction in small.directions
    }
    word = vocab.index("word")
    tokens = torch.tensor([[vocab.bos_index, word, vocab.unk_index]])
    targets = torch.tensor([[word, vocab.unk_index, vocab.eos_index]])
    mask = torch.ones_like(tokens, dtype=torch.bool)
    return GradCheckInstance(model=model, inputs=inputs, tokens=tokens, targets=targets, mask=mask)

"""Per-step combination of the forward-graph and backward-graph word distributions."""
import numpy as np

from utils.errors import InvalidInputError

FUSION_METHODS = ("mean", "geometric")


def fuse_word_scores(p_fwd: np.ndarray, p_bwd: np.ndarray, method: str = "mean") -> np.ndarray:
    """
    Fuses two word distributions into one.

    Args:
        p_fwd: probability vector of the forward-graph decoder
        p_bwd: probability vector of the backward-graph decoder
        method: "mean" for the elementwise arithmetic mean, "geometric" for the
            renormalised elementwise geometric mean

    Returns:
        np.ndarray: float64 probability vector summing to 1
    """
    p_fwd = np.asarray(p_fwd, dtype=np.float64)
    p_bwd = np.asarray(p_bwd, dtype=np.float64)
    if p_fwd.ndim != 1 or p_fwd.shape != p_bwd.shape:
        raise InvalidInputError(f"Cannot fuse distributions of shapes {p_fwd.shape} and {p_bwd.shape}")
    if method == "mean":
        return (p_fwd + p_bwd) / 2.0
    if method == "geometric":
        with np.errstate(divide="ignore"):
            log_mean = (np.log(p_fwd) + np.log(p_bwd)) / 2.0
        fused = np.exp(log_mean - np.max(log_mean))
        total = fused.sum()
        if not np.isfinite(total) or total <= 0:
            raise InvalidInputError("Distributions share no support; geometric fusion is undefined")
        return fused / total
    raise InvalidInputError(f"Unknown fusion method {method!r}; expected one of {FUSION_METHODS}")

"""Label bootstrapping: confidence-gated pseudo labels and agreement refinement.

Both routines are pure tensor arithmetic on probability maps; they hold
the two places where an IGNORE class enters training data after synthesis.
"""

from __future__ import annotations

import torch

from .data import IGNORE


def generate_pseudo_labels(prob: torch.Tensor, tau: float) -> torch.Tensor:
    """Argmax class where the winning probability exceeds tau, IGNORE elsewhere.

    prob: (B, 2, H, W) post-softmax. The gate is strict (> tau), so with
    tau >= 0.5 a tied 0.5/0.5 pixel is always IGNORE. Returns (B, H, W) uint8.
    """
    if prob.ndim != 4 or prob.shape[1] != 2:
        raise ValueError(f"prob must be (B, 2, H, W), got {tuple(prob.shape)}")
    if not (0.5 < tau < 1.0):
        raise ValueError(f"tau must lie in (0.5, 1), got {tau}")
    conf, cls = prob.max(dim=1)
    out = torch.where(conf > tau, cls, torch.full_like(cls, IGNORE))
    return out.to(torch.uint8)


def refine_synth_labels(label: torch.Tensor, prob: torch.Tensor) -> torch.Tensor:
    """Keep synthetic labels the current model agrees with; IGNORE the rest.

    A pixel survives only where label == argmax(prob). Synthetic labels are
    binary, so any pixel already IGNORE can never match an argmax in {0, 1}
    and stays IGNORE. Returns (B, H, W) uint8.
    """
    if prob.ndim != 4 or prob.shape[1] != 2:
        raise ValueError(f"prob must be (B, 2, H, W), got {tuple(prob.shape)}")
    if label.shape != (prob.shape[0], prob.shape[2], prob.shape[3]):
        raise ValueError(
            f"label shape {tuple(label.shape)} does not match prob {tuple(prob.shape)}"
        )
    cls = prob.argmax(dim=1)
    keep = label.long() == cls
    out = torch.where(keep, label.long(), torch.full_like(cls, IGNORE))
    return out.to(torch.uint8)

"""Cross-entropy over valid pixels and its temporally symmetric sum.

Losses here take post-softmax probability maps, not logits: the model's
public output is a probability map and both the pseudo-labeling step and
the loss consume the same tensor. Probabilities are clamped away from
zero before the log purely as float armor; with softmax outputs the clamp
is inactive in practice.
"""

from __future__ import annotations

import torch

from .data import IGNORE

_EPS = 1e-12


def masked_cross_entropy(prob: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """Mean negative log-probability of the true class over non-IGNORE pixels.

    prob: (B, 2, H, W) post-softmax. label: (B, H, W) integer {0, 1, 2};
    pixels labelled IGNORE contribute nothing, to the mean's numerator or
    denominator. Raises if every pixel is IGNORE, since a silently zero
    loss there would poison a training average.
    """
    if prob.ndim != 4 or prob.shape[1] != 2:
        raise ValueError(f"prob must be (B, 2, H, W), got {tuple(prob.shape)}")
    if label.shape != (prob.shape[0], prob.shape[2], prob.shape[3]):
        raise ValueError(
            f"label shape {tuple(label.shape)} does not match prob {tuple(prob.shape)}"
        )
    valid = label != IGNORE
    if not bool(valid.any()):
        raise ValueError("all pixels are IGNORE; cross-entropy undefined")
    target = label.clone()
    target[~valid] = 0  # placeholder class for the gather; masked out below
    picked = prob.gather(1, target.unsqueeze(1).long()).squeeze(1)
    nll = -torch.log(picked.clamp_min(_EPS))
    return nll[valid].mean()


def temporal_symmetric_loss(model, t1: torch.Tensor, t2: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """CE for the (t1, t2) ordering plus CE for (t2, t1), same label.

    Change is undirected here, so the decoder must answer identically no
    matter which date comes first; training both orderings against one
    label enforces that. Encoder features are shared across the two terms.
    """
    p_fwd, p_bwd = model.forward_both(t1, t2)
    return masked_cross_entropy(p_fwd, label) + masked_cross_entropy(p_bwd, label)

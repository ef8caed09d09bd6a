"""Change-label codec.

In memory a label map is a uint8 array over {0, 1, 2} = {unchanged,
changed, ignore}. On disk it is a single-channel PNG over {0, 255, 128}
so labels are eyeballable in any image viewer.
"""

from __future__ import annotations

from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image


class ChangeLabel(IntEnum):
    UNCHANGED = 0
    CHANGED = 1
    IGNORE = 2


_MEM_TO_FILE = np.zeros(256, dtype=np.uint8)
_MEM_TO_FILE[ChangeLabel.UNCHANGED] = 0
_MEM_TO_FILE[ChangeLabel.CHANGED] = 255
_MEM_TO_FILE[ChangeLabel.IGNORE] = 128

_FILE_TO_MEM = np.full(256, 255, dtype=np.uint8)  # 255 = invalid sentinel
_FILE_TO_MEM[0] = ChangeLabel.UNCHANGED
_FILE_TO_MEM[255] = ChangeLabel.CHANGED
_FILE_TO_MEM[128] = ChangeLabel.IGNORE


class CorruptLabelError(ValueError):
    """A label raster contains pixel values outside the codec."""


def encode_label(label: np.ndarray, path: str | Path) -> None:
    """Write a {0,1,2} label map as a {0,255,128} grayscale PNG."""
    label = np.asarray(label)
    if label.ndim != 2 or label.dtype != np.uint8:
        raise ValueError(f"label must be 2-d uint8, got {label.dtype} shape {label.shape}")
    if label.max(initial=0) > 2:
        bad = np.unique(label[label > 2])
        raise CorruptLabelError(f"label values outside {{0,1,2}}: {bad.tolist()}")
    Image.fromarray(_MEM_TO_FILE[label], mode="L").save(path)


def decode_label(path: str | Path) -> np.ndarray:
    """Read a label PNG back to {0,1,2}; rejects any other pixel value."""
    with Image.open(path) as im:
        raw = np.asarray(im.convert("L"))
    mem = _FILE_TO_MEM[raw]
    if (mem == 255).any():
        bad = np.unique(raw[mem == 255])
        raise CorruptLabelError(f"{path}: pixel values {bad.tolist()} are not in {{0,128,255}}")
    return mem


def xor_labels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Change map between two semantic maps: changed where they differ.

    Inputs are integer class maps over any label set; output is a {0,1}
    uint8 map. Shapes must match.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (a != b).astype(np.uint8)

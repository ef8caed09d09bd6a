"""Readers for synthesis-run files and batch assembly.

The trainer couples to the synthesis engine through files only: a JSONL
manifest whose first line is a header record, plus PNG rasters for the
two dates and the label. This module re-reads that format independently
rather than importing the producer, so either side can move as long as
the bytes stay compatible.

Label PNG byte values: 0 = unchanged, 255 = changed, 128 = ignore.
In memory those become class ids 0 / 1 / 2 (IGNORE = 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

IGNORE = 2

HEADER_RECORD_TYPE = "patchex-manifest-header"

ENTRY_KEYS = (
    "sample_id",
    "t1_path",
    "t2_path",
    "label_path",
    "method",
    "sigma",
    "ratio",
    "seed",
    "source_tile_ids",
)

_LABEL_FROM_BYTE = {0: 0, 255: 1, 128: IGNORE}
_BYTE_FROM_LABEL = {0: 0, 1: 255, IGNORE: 128}


def read_manifest(path: str | Path) -> tuple[dict, list[dict]]:
    """Parse a run manifest into (header, entries).

    Line 1 must be the header record; every following non-blank line must
    carry exactly ENTRY_KEYS.
    """
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(first)
        if header.get("record_type") != HEADER_RECORD_TYPE:
            raise ValueError(f"{path}: line 1 is not a manifest header")
        entries = []
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            extra = set(d) - set(ENTRY_KEYS)
            missing = set(ENTRY_KEYS) - set(d)
            if extra or missing:
                raise ValueError(
                    f"{path}: bad entry: extra {sorted(extra)}, missing {sorted(missing)}"
                )
            entries.append(d)
    return header, entries


def load_image(path: str | Path) -> np.ndarray:
    """PNG -> uint8 HWC array (grayscale becomes a single channel)."""
    arr = np.asarray(Image.open(path))
    if arr.dtype != np.uint8:
        raise ValueError(f"{path}: expected uint8 pixels, got {arr.dtype}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def decode_label_png(path: str | Path) -> np.ndarray:
    """Label PNG -> uint8 HxW of class ids {0, 1, 2}."""
    arr = np.asarray(Image.open(path))
    if arr.ndim != 2:
        raise ValueError(f"{path}: label raster must be single channel")
    out = np.full(arr.shape, 255, dtype=np.uint8)
    for byte, cls in _LABEL_FROM_BYTE.items():
        out[arr == byte] = cls
    if (out == 255).any():
        bad = sorted(int(v) for v in np.unique(arr) if int(v) not in _LABEL_FROM_BYTE)
        raise ValueError(f"{path}: unexpected label byte values {bad}")
    return out


def encode_label_png(label: np.ndarray, path: str | Path) -> None:
    """Class-id HxW array {0, 1, 2} -> label PNG on disk."""
    label = np.asarray(label)
    if label.ndim != 2:
        raise ValueError("label must be HxW")
    bad = set(np.unique(label).tolist()) - set(_BYTE_FROM_LABEL)
    if bad:
        raise ValueError(f"label contains non-class values {sorted(bad)}")
    out = np.zeros(label.shape, dtype=np.uint8)
    for cls, byte in _BYTE_FROM_LABEL.items():
        out[label == cls] = byte
    Image.fromarray(out).save(path)


@dataclass(frozen=True)
class Normalizer:
    """Per-channel standardisation using pool statistics from a run header.

    Stats live on the raw 0..255 intensity scale; applying them after the
    [0, 1] rescale is the same affine map, so we fold both steps into one:
    (x - mean) / std.
    """

    mean: np.ndarray  # (C,) float32
    std: np.ndarray  # (C,) float32

    @classmethod
    def from_header(cls, header: dict) -> "Normalizer":
        mean = np.asarray(header["channel_mean"], dtype=np.float32)
        std = np.asarray(header["channel_std"], dtype=np.float32)
        if mean.ndim != 1 or mean.shape != std.shape:
            raise ValueError("channel_mean / channel_std must be equal-length vectors")
        std = np.where(std <= 0, 1.0, std)
        return cls(mean=mean, std=std)

    def apply(self, batch: np.ndarray) -> torch.Tensor:
        """uint8 (B, H, W, C) -> float32 tensor (B, C, H, W)."""
        x = (batch.astype(np.float32) - self.mean) / self.std
        return torch.from_numpy(np.ascontiguousarray(x.transpose(0, 3, 1, 2)))


class SampleDataset:
    """All rasters of a synthesis run held in RAM as uint8.

    Run sizes in scope here (a few thousand 128 px tiles) fit comfortably;
    keeping raw bytes and normalising per batch avoids a float copy of the
    whole corpus.
    """

    def __init__(self, manifest_path: str | Path):
        manifest_path = Path(manifest_path)
        self.header, entries = read_manifest(manifest_path)
        root = manifest_path.parent
        self.normalizer = Normalizer.from_header(self.header)
        t1, t2, labels = [], [], []
        for e in entries:
            t1.append(load_image(root / e["t1_path"]))
            t2.append(load_image(root / e["t2_path"]))
            labels.append(decode_label_png(root / e["label_path"]))
        if not t1:
            raise ValueError(f"{manifest_path}: no samples")
        self.t1 = np.stack(t1)
        self.t2 = np.stack(t2)
        self.labels = np.stack(labels)

    def __len__(self) -> int:
        return self.t1.shape[0]

    def batch(self, idx: np.ndarray) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        x1 = self.normalizer.apply(self.t1[idx])
        x2 = self.normalizer.apply(self.t2[idx])
        y = torch.from_numpy(self.labels[idx].astype(np.int64))
        return x1, x2, y


class PairDataset:
    """Bi-temporal image pairs outside a synthesis run (real or simulated).

    Matches t1/t2 (and optionally label) files by sorted filename. The
    normalizer still comes from a run header so train and test inputs share
    one standardisation.
    """

    def __init__(
        self,
        t1_dir: str | Path,
        t2_dir: str | Path,
        normalizer: Normalizer,
        labels_dir: str | Path | None = None,
    ):
        t1_files = sorted(Path(t1_dir).glob("*.png"))
        t2_files = sorted(Path(t2_dir).glob("*.png"))
        if not t1_files or len(t1_files) != len(t2_files):
            raise ValueError(
                f"pair mismatch: {len(t1_files)} t1 files vs {len(t2_files)} t2 files"
            )
        self.names = [p.name for p in t1_files]
        self.normalizer = normalizer
        self.t1 = np.stack([load_image(p) for p in t1_files])
        self.t2 = np.stack([load_image(p) for p in t2_files])
        self.labels: np.ndarray | None = None
        if labels_dir is not None:
            label_files = sorted(Path(labels_dir).glob("*.png"))
            if len(label_files) != len(t1_files):
                raise ValueError("labels_dir file count does not match pairs")
            self.labels = np.stack([decode_label_png(p) for p in label_files])

    def __len__(self) -> int:
        return self.t1.shape[0]

    def batch(self, idx: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        return self.normalizer.apply(self.t1[idx]), self.normalizer.apply(self.t2[idx])


def batch_indices(n: int, batch_size: int, rng: np.random.Generator | None) -> list[np.ndarray]:
    """Index batches for one epoch; shuffled when an rng is given."""
    order = np.arange(n) if rng is None else rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]

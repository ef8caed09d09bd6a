"""Siamese change detector: shared residual encoder, difference decoder.

Both dates pass through one weight-shared encoder that exposes five
feature maps (stem plus four residual stages, strides 2..32). The deepest
pair is fused by channel concat + 1x1 conv; four detail-recovery blocks
then walk back up the pyramid, each fusing the matching skip pair and
adding it to the 2x-upsampled coarse path. A final 2x upsample and 1x1
classifier produce per-pixel 2-class probabilities at input resolution.

The decoder sees both orderings of its two inputs during training (see
losses.temporal_symmetric_loss), so nothing here may bake in a direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

PRESETS = ("small", "medium")


@dataclass
class DetectorConfig:
    preset: str = "small"
    in_channels: int = 3
    batch_size: int = 16
    epochs: int = 20
    tau: float = 0.95  # pseudo-label confidence gate, must sit in (0.5, 1)
    lr_initial: float = 1e-3  # phase 1: SGD
    momentum: float = 0.9
    lr_selftrain: float = 1e-4  # phase 2: AdamW
    weight_decay: float = 5e-4
    selftrain_rounds: int = 3
    seed: int = 0
    deterministic: bool = True  # pin torch to one thread; off trades repro for speed

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if not (0.5 < self.tau < 1.0):
            raise ValueError(f"tau must lie in (0.5, 1), got {self.tau}")
        if self.in_channels < 1:
            raise ValueError("in_channels must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        for name in ("lr_initial", "lr_selftrain", "weight_decay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _conv_bn_relu(c_in: int, c_out: int, k: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, k, stride=stride, padding=k // 2, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


class BasicBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.shortcut: nn.Module = nn.Identity()
        if c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, bias=False), nn.BatchNorm2d(c_out)
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.bn1(self.conv1(x)))
        h = self.bn2(self.conv2(h))
        return F.relu(h + self.shortcut(x))


class Bottleneck(nn.Module):
    """1x1 reduce, 3x3, 1x1 expand; mid width is out / 4."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        mid = max(c_out // 4, 1)
        self.conv1 = nn.Conv2d(c_in, mid, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(mid)
        self.conv2 = nn.Conv2d(mid, mid, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(mid)
        self.conv3 = nn.Conv2d(mid, c_out, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(c_out)
        self.shortcut: nn.Module = nn.Identity()
        if c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv2d(c_in, c_out, 1, bias=False), nn.BatchNorm2d(c_out)
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.bn1(self.conv1(x)))
        h = F.relu(self.bn2(self.conv2(h)))
        h = self.bn3(self.conv3(h))
        return F.relu(h + self.shortcut(x))


# preset -> (stem width, stage output widths, units per stage, block type)
_ARCH = {
    "small": (16, (16, 32, 64, 128), (1, 1, 1, 1), BasicBlock),
    "medium": (64, (64, 128, 256, 512), (3, 4, 6, 3), Bottleneck),
}


class DetailRecoveryBlock(nn.Module):
    """Fuse one skip pair and fold it into the upsampled coarse path.

    concat(skip_a, skip_b) -> 1x1 conv; coarse -> 1x1 projection to the
    skip width, nearest 2x upsample, elementwise add, 3x3 smoothing conv.
    """

    def __init__(self, skip_c: int, coarse_c: int):
        super().__init__()
        self.fuse = _conv_bn_relu(2 * skip_c, skip_c, 1)
        self.proj = nn.Sequential(
            nn.Conv2d(coarse_c, skip_c, 1, bias=False), nn.BatchNorm2d(skip_c)
        )
        self.smooth = _conv_bn_relu(skip_c, skip_c, 3)

    def forward(
        self, skip_a: torch.Tensor, skip_b: torch.Tensor, coarse: torch.Tensor
    ) -> torch.Tensor:
        fused = self.fuse(torch.cat([skip_a, skip_b], dim=1))
        up = F.interpolate(self.proj(coarse), scale_factor=2, mode="nearest")
        return self.smooth(fused + up)


class SiameseDetector(nn.Module):
    def __init__(self, config: DetectorConfig):
        super().__init__()
        self.config = config
        stem_c, widths, units, block = _ARCH[config.preset]
        self.stem = _conv_bn_relu(config.in_channels, stem_c, 3, stride=2)
        stages = []
        c_in = stem_c
        for c_out, n in zip(widths, units):
            layers: list[nn.Module] = [nn.MaxPool2d(2)]
            for i in range(n):
                layers.append(block(c_in if i == 0 else c_out, c_out))
            stages.append(nn.Sequential(*layers))
            c_in = c_out
        self.stages = nn.ModuleList(stages)
        self.skip_channels = (stem_c, *widths)  # strides 2, 4, 8, 16, 32

        deep = widths[-1]
        self.fusion = _conv_bn_relu(2 * deep, deep, 1)
        # decoder walks 1/32 -> 1/2, consuming skips deepest-but-one first
        recover = []
        coarse_c = deep
        for skip_c in (widths[2], widths[1], widths[0], stem_c):
            recover.append(DetailRecoveryBlock(skip_c, coarse_c))
            coarse_c = skip_c
        self.recover = nn.ModuleList(recover)
        self.classifier = nn.Conv2d(coarse_c, 2, 1)

    def encode(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Five feature maps, shallowest first."""
        feats = [self.stem(x)]
        for stage in self.stages:
            feats.append(stage(feats[-1]))
        return feats

    def decode(self, feats_a: list[torch.Tensor], feats_b: list[torch.Tensor]) -> torch.Tensor:
        h = self.fusion(torch.cat([feats_a[-1], feats_b[-1]], dim=1))
        for block, level in zip(self.recover, (3, 2, 1, 0)):
            h = block(feats_a[level], feats_b[level], h)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        return torch.softmax(self.classifier(h), dim=1)

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4:
            raise ValueError(f"expected (B, C, H, W) input, got {tuple(x.shape)}")
        if x.shape[1] != self.config.in_channels:
            raise ValueError(
                f"expected {self.config.in_channels} channels, got {x.shape[1]}"
            )
        h, w = x.shape[2], x.shape[3]
        if h % 32 or w % 32:
            raise ValueError(f"spatial dims must be divisible by 32, got {h}x{w}")

    def forward(self, t1: torch.Tensor, t2: torch.Tensor) -> torch.Tensor:
        """Per-pixel change probabilities (B, 2, H, W) for the order t1 -> t2."""
        self._check_input(t1)
        self._check_input(t2)
        if t1.shape != t2.shape:
            raise ValueError(f"date shapes differ: {tuple(t1.shape)} vs {tuple(t2.shape)}")
        return self.decode(self.encode(t1), self.encode(t2))

    def forward_both(self, t1: torch.Tensor, t2: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Probability maps for both temporal orderings, one encoder pass each."""
        self._check_input(t1)
        self._check_input(t2)
        if t1.shape != t2.shape:
            raise ValueError(f"date shapes differ: {tuple(t1.shape)} vs {tuple(t2.shape)}")
        fa, fb = self.encode(t1), self.encode(t2)
        return self.decode(fa, fb), self.decode(fb, fa)

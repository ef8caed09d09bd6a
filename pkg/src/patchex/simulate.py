"""Imaging-condition simulation for the pseudo-post-event image.

Four enhancement steps run in a fixed order: color balance, brightness,
contrast, sharpness. Each fires independently with a configured
probability and a factor drawn uniformly from its range; factor 1.0 is
the identity for every step. Arithmetic is float64 on the [0,255]
scale with a clamp after each step, and a single round-half-to-even
quantisation at the end.

The rng draw sequence is fixed regardless of which steps fire (one gate
and one factor draw per step, the color step drawing one gain per
channel), so a sample's stream stays aligned with its recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .tiles import Tile


def _check_range(name: str, rng_pair: tuple[float, float]) -> None:
    lo, hi = rng_pair
    if not lo <= 1.0 <= hi:
        raise ValueError(f"{name} must contain the identity factor 1.0, got {rng_pair}")
    if lo > hi:
        raise ValueError(f"{name} is inverted: {rng_pair}")


@dataclass(frozen=True)
class SimConfig:
    apply_probability: float = 0.8
    color_gain_range: tuple[float, float] = (0.85, 1.15)
    brightness_range: tuple[float, float] = (0.7, 1.3)
    contrast_range: tuple[float, float] = (0.7, 1.3)
    sharpness_range: tuple[float, float] = (0.5, 1.5)
    enabled: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ValueError("apply_probability must be in [0, 1]")
        _check_range("color_gain_range", self.color_gain_range)
        _check_range("brightness_range", self.brightness_range)
        _check_range("contrast_range", self.contrast_range)
        _check_range("sharpness_range", self.sharpness_range)


def _blur(x: np.ndarray) -> np.ndarray:
    # 3x3 gaussian per channel (sigma 1 truncated at radius 1), replicate edges
    return gaussian_filter(x, sigma=(1.0, 1.0, 0.0), truncate=1.0, mode="nearest")


def simulate_image(image: np.ndarray, config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Apply the simulation chain to one uint8 (H, W, C) raster."""
    if image.dtype != np.uint8 or image.ndim != 3:
        raise ValueError(f"expected uint8 (H, W, C) raster, got {image.dtype} shape {image.shape}")
    if not config.enabled:
        return image.copy()
    c = image.shape[2]
    x = image.astype(np.float64)

    gate = rng.random() < config.apply_probability
    gains = rng.uniform(config.color_gain_range[0], config.color_gain_range[1], size=c)
    if gate:
        x = np.clip(x * gains[None, None, :], 0.0, 255.0)

    gate = rng.random() < config.apply_probability
    f = rng.uniform(config.brightness_range[0], config.brightness_range[1])
    if gate:
        x = np.clip(x * f, 0.0, 255.0)

    gate = rng.random() < config.apply_probability
    f = rng.uniform(config.contrast_range[0], config.contrast_range[1])
    if gate:
        m = x.mean()
        x = np.clip(m + f * (x - m), 0.0, 255.0)

    gate = rng.random() < config.apply_probability
    f = rng.uniform(config.sharpness_range[0], config.sharpness_range[1])
    if gate:
        blur = _blur(x)
        x = np.clip(blur + f * (x - blur), 0.0, 255.0)

    return np.rint(x).astype(np.uint8)


def simulate(tile: Tile, config: SimConfig, rng: np.random.Generator) -> Tile:
    return Tile(tile_id=tile.tile_id, image=simulate_image(tile.image, config, rng))

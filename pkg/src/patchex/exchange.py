"""Patch grids, exchange plans, and xor label synthesis.

A tile is partitioned into an axis-aligned grid of sigma x sigma
patches, indexed row-major. Intra-image exchange swaps patch pairs
inside one tile; inter-image exchange copies co-located patches from a
second tile. In both cases the same swaps are applied to the cluster
map, and the change label is the pixelwise xor of the original and the
swapped cluster maps, so a moved patch only produces CHANGED pixels
where the cluster content actually differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterMap
from .labels import xor_labels
from .manifest import SampleManifestEntry
from .rng import fisher_yates
from .tiles import DimensionMismatchError, Tile


class LabelDomainError(ValueError):
    """Cluster maps passed to inter_exchange come from different clustering calls."""


@dataclass(frozen=True)
class GridSpec:
    sigma: int
    patches_per_row: int  # patch count along x (W / sigma)
    patches_per_col: int  # patch count along y (H / sigma)

    @property
    def n_patches(self) -> int:
        return self.patches_per_row * self.patches_per_col

    @classmethod
    def for_shape(cls, h: int, w: int, sigma: int) -> "GridSpec":
        if sigma < 1:
            raise ValueError(f"sigma must be >= 1, got {sigma}")
        if h % sigma or w % sigma:
            raise ValueError(f"sigma {sigma} does not divide tile shape ({h}, {w})")
        return cls(sigma=sigma, patches_per_row=w // sigma, patches_per_col=h // sigma)

    def patch_slices(self, index: int) -> tuple[slice, slice]:
        if not 0 <= index < self.n_patches:
            raise IndexError(f"patch index {index} out of range [0, {self.n_patches})")
        r, c = divmod(index, self.patches_per_row)
        return (
            slice(r * self.sigma, (r + 1) * self.sigma),
            slice(c * self.sigma, (c + 1) * self.sigma),
        )


@dataclass(frozen=True)
class ScaleSchedule:
    scales: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.scales:
            raise ValueError("scale schedule is empty")
        if any(s < 1 for s in self.scales):
            raise ValueError(f"scales must be positive, got {self.scales}")

    def filtered(self, h: int, w: int) -> "ScaleSchedule":
        keep = tuple(s for s in self.scales if h % s == 0 and w % s == 0)
        if not keep:
            raise ValueError(f"no configured scale divides tile shape ({h}, {w}): {self.scales}")
        return ScaleSchedule(scales=keep)


@dataclass(frozen=True)
class IntraPlan:
    grid: GridSpec
    tuples: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class InterPlan:
    grid: GridSpec
    indices: tuple[int, ...]


@dataclass(frozen=True)
class SynthSample:
    t1: Tile
    t2: Tile
    label: np.ndarray  # (H, W) uint8 over {UNCHANGED, CHANGED}
    provenance: SampleManifestEntry | None = None


def make_intra_plan(grid: GridSpec, r_intra: float, rng: np.random.Generator) -> IntraPlan:
    """Shuffle patch indices, pair adjacent entries, keep floor(r*n/2) pairs."""
    if not 0.0 <= r_intra <= 1.0:
        raise ValueError(f"r_intra must be in [0, 1], got {r_intra}")
    perm = fisher_yates(rng, grid.n_patches)
    n_tuples = math.floor(r_intra * grid.n_patches / 2)
    tuples = tuple((int(perm[2 * i]), int(perm[2 * i + 1])) for i in range(n_tuples))
    return IntraPlan(grid=grid, tuples=tuples)


def make_inter_plan(grid: GridSpec, r_inter: float, rng: np.random.Generator) -> InterPlan:
    """Shuffle patch indices, keep the first floor(r*n) as the swap set."""
    if not 0.0 <= r_inter <= 1.0:
        raise ValueError(f"r_inter must be in [0, 1], got {r_inter}")
    perm = fisher_yates(rng, grid.n_patches)
    n_idx = math.floor(r_inter * grid.n_patches)
    return InterPlan(grid=grid, indices=tuple(int(i) for i in perm[:n_idx]))


def apply_intra_swaps(raster: np.ndarray, plan: IntraPlan) -> np.ndarray:
    """Swap each planned patch pair; works on (H, W) and (H, W, C) rasters."""
    out = raster.copy()
    for a, b in plan.tuples:
        ra, ca = plan.grid.patch_slices(a)
        rb, cb = plan.grid.patch_slices(b)
        out[ra, ca] = raster[rb, cb]
        out[rb, cb] = raster[ra, ca]
    return out


def intra_exchange(tile: Tile, cluster_map: ClusterMap, plan: IntraPlan) -> SynthSample:
    h, w = tile.image.shape[:2]
    if cluster_map.labels.shape != (h, w):
        raise DimensionMismatchError(f"cluster map {cluster_map.labels.shape} does not match tile ({h}, {w})")
    if plan.grid.patches_per_col * plan.grid.sigma != h or plan.grid.patches_per_row * plan.grid.sigma != w:
        raise ValueError(f"plan grid {plan.grid} does not tile shape ({h}, {w})")
    t2_image = apply_intra_swaps(tile.image, plan)
    y2 = apply_intra_swaps(cluster_map.labels, plan)
    label = xor_labels(cluster_map.labels, y2)
    return SynthSample(t1=tile, t2=Tile(tile_id=tile.tile_id + "+intra", image=t2_image), label=label)


def inter_exchange(
    tile_a: Tile,
    tile_b: Tile,
    cmap_a: ClusterMap,
    cmap_b: ClusterMap,
    plan: InterPlan,
) -> SynthSample:
    if cmap_a.domain != cmap_b.domain:
        raise LabelDomainError(
            "cluster maps come from different clustering calls; inter exchange needs one joint label domain"
        )
    if tile_a.image.shape != tile_b.image.shape:
        raise DimensionMismatchError(f"tile shapes differ: {tile_a.image.shape} vs {tile_b.image.shape}")
    h, w = tile_a.image.shape[:2]
    if cmap_a.labels.shape != (h, w) or cmap_b.labels.shape != (h, w):
        raise DimensionMismatchError("cluster map shape does not match tiles")
    t2_image = tile_a.image.copy()
    y2 = cmap_a.labels.copy()
    for idx in plan.indices:
        rs, cs = plan.grid.patch_slices(idx)
        t2_image[rs, cs] = tile_b.image[rs, cs]
        y2[rs, cs] = cmap_b.labels[rs, cs]
    label = xor_labels(cmap_a.labels, y2)
    return SynthSample(t1=tile_a, t2=Tile(tile_id=tile_a.tile_id + "+inter", image=t2_image), label=label)

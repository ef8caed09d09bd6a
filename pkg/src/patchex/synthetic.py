"""Procedural synthetic corpus: single-date mosaics and true-change pairs.

Mosaics are Voronoi blob maps over a handful of "materials" (mean color
plus gaussian texture noise). Because the blob geometry and the noise
are drawn separately, the generator can also emit exact-ground-truth
bi-temporal pairs: keep the geometry, reassign materials inside some
blobs, redraw the noise independently per date.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import fisher_yates
from .tiles import Tile

_MAX_RESAMPLE = 64


@dataclass(frozen=True)
class Material:
    name: str
    mean_color: tuple[float, ...]
    noise_amp: float = 6.0

    def __post_init__(self) -> None:
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be >= 0")
        if not all(0.0 <= v <= 255.0 for v in self.mean_color):
            raise ValueError(f"mean_color out of [0,255]: {self.mean_color}")


# noise amplitudes differ per material on purpose: the object features are
# per-channel mean AND std, and a corpus where every class has identical
# texture would leave the std features carrying nothing but sampling noise
_PALETTE: tuple[tuple[str, tuple[float, float, float], float], ...] = (
    ("vegetation", (52.0, 110.0, 48.0), 9.0),
    ("soil", (176.0, 142.0, 96.0), 5.0),
    ("water", (38.0, 64.0, 140.0), 2.5),
    ("pavement", (128.0, 128.0, 132.0), 7.0),
    ("roof", (170.0, 60.0, 52.0), 4.0),
    ("sand", (222.0, 204.0, 160.0), 11.0),
)


def default_materials(n: int, channels: int = 3) -> tuple[Material, ...]:
    if not 1 <= n <= len(_PALETTE):
        raise ValueError(f"n must be in [1, {len(_PALETTE)}]")
    mats = []
    for name, color, amp in _PALETTE[:n]:
        if channels == 3:
            mean = color
        else:
            gray = sum(color) / 3.0
            mean = tuple(gray for _ in range(channels))
        mats.append(Material(name=name, mean_color=mean, noise_amp=amp))
    return tuple(mats)


@dataclass(frozen=True)
class MosaicSpec:
    h: int
    w: int
    c: int
    materials: tuple[Material, ...]
    blob_scale: int = 48
    min_class_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.h < 8 or self.w < 8:
            raise ValueError("mosaic must be at least 8x8")
        if len(self.materials) < 1:
            raise ValueError("need at least one material")
        if any(len(m.mean_color) != self.c for m in self.materials):
            raise ValueError("material color length must equal channel count")
        if self.blob_scale < 4:
            raise ValueError("blob_scale must be >= 4")
        if not 0.0 <= self.min_class_fraction < 1.0 / max(1, len(self.materials)):
            raise ValueError("min_class_fraction infeasible for the material count")
        amp = max(m.noise_amp for m in self.materials)
        for i, a in enumerate(self.materials):
            for b in self.materials[i + 1 :]:
                d = np.linalg.norm(np.subtract(a.mean_color, b.mean_color))
                if d < 4.0 * amp:
                    raise ValueError(
                        f"materials {a.name!r} and {b.name!r} are {d:.1f} apart, "
                        f"need >= {4.0 * amp:.1f} (4x noise amplitude) for clusterability"
                    )


def _voronoi_assignment(spec: MosaicSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw sites and per-site materials until every material holds at
    least min_class_fraction of pixels. Returns (site_mat, nearest_site)."""
    n_mat = len(spec.materials)
    n_sites = max(n_mat, round(spec.h * spec.w / spec.blob_scale**2))
    ys = np.arange(spec.h, dtype=np.float64)[:, None]
    xs = np.arange(spec.w, dtype=np.float64)[None, :]
    for _ in range(_MAX_RESAMPLE):
        sites = np.stack(
            [rng.uniform(0, spec.h, size=n_sites), rng.uniform(0, spec.w, size=n_sites)],
            axis=1,
        )
        site_mat = rng.integers(0, n_mat, size=n_sites)
        d2 = (ys[:, :, None] - sites[:, 0]) ** 2 + (xs[:, :, None] - sites[:, 1]) ** 2
        nearest = np.argmin(d2, axis=2)
        class_map = site_mat[nearest]
        frac = np.bincount(class_map.ravel(), minlength=n_mat) / (spec.h * spec.w)
        if (frac >= spec.min_class_fraction).all():
            return site_mat, nearest
    raise RuntimeError(f"could not place all {n_mat} materials above {spec.min_class_fraction:.0%} in {_MAX_RESAMPLE} draws")


def _render(spec: MosaicSpec, class_map: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    colors = np.array([m.mean_color for m in spec.materials], dtype=np.float64)
    amps = np.array([m.noise_amp for m in spec.materials], dtype=np.float64)
    img = colors[class_map] + rng.standard_normal((spec.h, spec.w, spec.c)) * amps[class_map][:, :, None]
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def gen_mosaic(spec: MosaicSpec, rng: np.random.Generator, tile_id: str = "mosaic") -> tuple[Tile, np.ndarray]:
    """One single-date mosaic plus its exact material-class raster."""
    site_mat, nearest = _voronoi_assignment(spec, rng)
    class_map = site_mat[nearest].astype(np.int32)
    image = _render(spec, class_map, rng)
    return Tile(tile_id=tile_id, image=image), class_map


def gen_true_change_pair(
    spec: MosaicSpec,
    change_fraction: float,
    rng: np.random.Generator,
    tile_id: str = "pair",
) -> tuple[Tile, Tile, np.ndarray]:
    """Bi-temporal pair with exact ground truth.

    The same blob geometry renders both dates; a greedy pass over
    shuffled blobs reassigns materials until the changed-pixel count is
    as close as it can get to change_fraction without drifting further
    away, and each date gets independent texture noise.
    """
    if not 0.0 < change_fraction < 1.0:
        raise ValueError(f"change_fraction must be in (0, 1), got {change_fraction}")
    n_mat = len(spec.materials)
    if n_mat < 2:
        raise ValueError("true-change pairs need at least 2 materials")
    site_mat, nearest = _voronoi_assignment(spec, rng)
    class1 = site_mat[nearest].astype(np.int32)
    site_sizes = np.bincount(nearest.ravel(), minlength=len(site_mat))

    target = change_fraction * spec.h * spec.w
    site_mat2 = site_mat.copy()
    visit = fisher_yates(rng, len(site_mat))
    changed_px = 0.0
    for s in visit:
        s = int(s)
        gain = float(site_sizes[s])
        shift = int(rng.integers(1, n_mat))  # drawn unconditionally to keep the stream shape fixed
        if abs(changed_px + gain - target) < abs(changed_px - target):
            changed_px += gain
            site_mat2[s] = (site_mat[s] + shift) % n_mat

    class2 = site_mat2[nearest].astype(np.int32)
    label = (class1 != class2).astype(np.uint8)
    t1 = Tile(tile_id=tile_id + "_t1", image=_render(spec, class1, rng))
    t2 = Tile(tile_id=tile_id + "_t2", image=_render(spec, class2, rng))
    return t1, t2, label

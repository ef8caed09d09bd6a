"""Single-date tile pool.

The synthesis engine draws unpaired tiles from a pool directory of
same-shaped rasters. Tiles are identified by filename stem, ordered by
sorted stem so pool indexing is stable across filesystems.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

_RASTER_SUFFIXES = {".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp"}


class DimensionMismatchError(ValueError):
    """Tiles in one pool disagree on height, width, or band count."""


class EmptyPoolError(ValueError):
    """No loadable raster found in the pool directory."""


@dataclass(frozen=True)
class Tile:
    tile_id: str
    image: np.ndarray  # uint8, (H, W, C)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.image.shape  # type: ignore[return-value]


class TilePool:
    """Immutable ordered collection of same-shaped tiles."""

    def __init__(self, tiles: list[Tile]):
        if not tiles:
            raise EmptyPoolError("tile pool is empty")
        ref = tiles[0].image.shape
        for t in tiles:
            if t.image.shape != ref:
                raise DimensionMismatchError(
                    f"tile {t.tile_id!r} has shape {t.image.shape}, expected {ref} "
                    f"(from {tiles[0].tile_id!r})"
                )
            if t.image.dtype != np.uint8:
                raise DimensionMismatchError(f"tile {t.tile_id!r} is {t.image.dtype}, expected uint8")
        self._tiles = list(tiles)
        self._by_id = {t.tile_id: t for t in self._tiles}
        if len(self._by_id) != len(self._tiles):
            seen: set[str] = set()
            dup = next(t.tile_id for t in self._tiles if t.tile_id in seen or seen.add(t.tile_id))
            raise ValueError(f"duplicate tile_id {dup!r}")

    def __len__(self) -> int:
        return len(self._tiles)

    def __getitem__(self, index: int) -> Tile:
        return self._tiles[index]

    def get(self, tile_id: str) -> Tile:
        return self._by_id[tile_id]

    @property
    def tile_shape(self) -> tuple[int, int, int]:
        return self._tiles[0].image.shape  # type: ignore[return-value]

    def channel_stats(self) -> tuple[list[float], list[float]]:
        """Pool-wide per-channel mean and std on the [0,255] scale.

        Accumulated in float64 over all tiles; std is population std.
        Written into the manifest header so consumers can normalise
        without rescanning the rasters.
        """
        c = self.tile_shape[2]
        n = 0
        s = np.zeros(c, dtype=np.float64)
        ss = np.zeros(c, dtype=np.float64)
        for t in self._tiles:
            flat = t.image.reshape(-1, c).astype(np.float64)
            n += flat.shape[0]
            s += flat.sum(axis=0)
            ss += (flat * flat).sum(axis=0)
        mean = s / n
        var = np.maximum(ss / n - mean * mean, 0.0)
        return mean.tolist(), np.sqrt(var).tolist()


def load_tile(path: str | Path) -> Tile:
    path = Path(path)
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.dtype != np.uint8:
        raise DimensionMismatchError(f"{path}: dtype {arr.dtype}, expected uint8")
    return Tile(tile_id=path.stem, image=np.ascontiguousarray(arr))


def load_pool(pool_dir: str | Path) -> TilePool:
    """Load every raster in a directory, ordered by filename stem."""
    pool_dir = Path(pool_dir)
    paths = sorted(
        (p for p in pool_dir.iterdir() if p.suffix.lower() in _RASTER_SUFFIXES),
        key=lambda p: p.stem,
    )
    if not paths:
        raise EmptyPoolError(f"no rasters in {pool_dir}")
    return TilePool([load_tile(p) for p in paths])

"""Run configuration: one JSON file governs every knob.

The effective config is echoed into the run directory, and its
synthesis-determining subset (everything except worker count and
output/cache locations) goes into the manifest header together with the
pool's channel statistics, so a manifest is reproducible and
relocatable and its bytes never depend on how many workers produced it.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .clustering import DbscanParams
from .exchange import ScaleSchedule
from .simulate import SimConfig
from .slic import SlicParams
from .tiles import TilePool


@dataclass
class RunConfig:
    pool_dir: str
    output_dir: str
    sample_count: int
    global_seed: int = 0
    worker_count: int = 1
    intra_fraction: float = 0.5
    scales: tuple[int, ...] = (16, 32, 64, 128)
    r_intra: float = 0.75
    r_inter: float = 0.75
    n_objects: int = 1000
    n_objects_joint: int | None = None  # defaults to 2x n_objects
    compactness: float = 0.1
    slic_iterations: int = 10
    min_region_fraction: float = 0.25
    eps: float = 0.5
    min_pts: int = 4
    sim: SimConfig = field(default_factory=SimConfig)
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if self.sample_count < 0:
            raise ValueError("sample_count must be >= 0")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if not 0.0 <= self.intra_fraction <= 1.0:
            raise ValueError("intra_fraction must be in [0, 1]")
        if not 0.0 <= self.r_intra <= 1.0 or not 0.0 <= self.r_inter <= 1.0:
            raise ValueError("exchange ratios must be in [0, 1]")
        self.scales = tuple(int(s) for s in self.scales)
        ScaleSchedule(self.scales)  # validates non-empty, positive
        # constructing the params eagerly surfaces invariant violations here
        self.slic_params_intra()
        self.slic_params_joint()
        self.dbscan_params()

    @property
    def joint_objects(self) -> int:
        return self.n_objects_joint if self.n_objects_joint is not None else 2 * self.n_objects

    def slic_params_intra(self) -> SlicParams:
        return SlicParams(
            n_objects=self.n_objects,
            compactness=self.compactness,
            max_iterations=self.slic_iterations,
            min_region_fraction=self.min_region_fraction,
        )

    def slic_params_joint(self) -> SlicParams:
        return SlicParams(
            n_objects=self.joint_objects,
            compactness=self.compactness,
            max_iterations=self.slic_iterations,
            min_region_fraction=self.min_region_fraction,
        )

    def dbscan_params(self) -> DbscanParams:
        return DbscanParams(eps=self.eps, min_pts=self.min_pts)

    def schedule_for(self, h: int, w: int) -> ScaleSchedule:
        return ScaleSchedule(self.scales).filtered(h, w)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["scales"] = list(self.scales)
        d["sim"] = dataclasses.asdict(self.sim)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "sim" in d and isinstance(d["sim"], dict):
            sim = dict(d["sim"])
            for key in ("color_gain_range", "brightness_range", "contrast_range", "sharpness_range"):
                if key in sim:
                    sim[key] = tuple(sim[key])
            d["sim"] = SimConfig(**sim)
        if "scales" in d:
            d["scales"] = tuple(d["scales"])
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def echo_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def manifest_header(self, pool: TilePool) -> dict[str, Any]:
        """Synthesis-determining fields plus pool statistics.

        worker_count, output_dir, and cache_dir are operational knobs
        that must not influence manifest bytes, so they stay out.
        """
        mean, std = pool.channel_stats()
        d = self.to_dict()
        for key in ("worker_count", "output_dir", "cache_dir"):
            d.pop(key)
        d["n_objects_joint"] = self.joint_objects
        d["pool_size"] = len(pool)
        d["tile_shape"] = list(pool.tile_shape)
        d["channel_mean"] = mean
        d["channel_std"] = std
        return d

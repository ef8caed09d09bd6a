"""Sample synthesis pipeline and the parallel run driver.

Every sample is a pure function of (pool, config, sample_index): an rng
derived from (global_seed, sample_index) drives every draw, so any
worker layout produces byte-identical outputs. The recipe draws
(method, scale, tiles) are factored out so distribution tests can
sample recipes without running segmentation.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .clustering import (
    ClusterMap,
    FeatureMatrix,
    build_cluster_map,
    dbscan,
    extract_object_features,
    new_domain_token,
    resolve_noise,
    standardize,
)
from .config import RunConfig
from .exchange import GridSpec, SynthSample, inter_exchange, intra_exchange, make_inter_plan, make_intra_plan
from .labels import encode_label
from .manifest import SampleManifestEntry, write_manifest
from .rng import derive_seed, rng_from_seed
from .simulate import simulate
from .slic import slic_segment, slic_segment_joint
from .tiles import Tile, TilePool, load_pool

STAGES = ("segment", "cluster", "exchange", "sim", "write")


@dataclass(frozen=True)
class SampleRecipe:
    sample_index: int
    seed: int
    method: str  # "intra" | "inter"
    sigma: int
    tile_indices: tuple[int, ...]


@dataclass(frozen=True)
class RunResult:
    run_dir: Path
    manifest_path: Path
    sample_count: int
    wall_s: float
    timings: dict


def _draw_recipe(
    rng: np.random.Generator,
    config: RunConfig,
    pool_size: int,
    scales: tuple[int, ...],
    sample_index: int,
    seed: int,
) -> SampleRecipe:
    method = "intra" if rng.random() < config.intra_fraction else "inter"
    sigma = scales[int(rng.integers(0, len(scales)))]
    if method == "intra":
        tiles = (int(rng.integers(0, pool_size)),)
    else:
        if pool_size < 2:
            raise ValueError("inter exchange needs a pool of at least 2 tiles")
        a = int(rng.integers(0, pool_size))
        b = int(rng.integers(0, pool_size - 1))
        if b >= a:
            b += 1
        tiles = (a, b)
    return SampleRecipe(sample_index=sample_index, seed=seed, method=method, sigma=sigma, tile_indices=tiles)


def draw_sample_recipe(config: RunConfig, pool_size: int, tile_shape: tuple[int, int, int], sample_index: int) -> SampleRecipe:
    """The cheap prefix of synthesize: method, scale, and tile choices."""
    seed = derive_seed(config.global_seed, sample_index)
    rng = rng_from_seed(seed)
    scales = config.schedule_for(tile_shape[0], tile_shape[1]).scales
    return _draw_recipe(rng, config, pool_size, scales, sample_index, seed)


def _cache_key(tile_id: str, shape: tuple[int, int, int], config: RunConfig) -> str:
    payload = json.dumps(
        {
            "tile_id": tile_id,
            "shape": list(shape),
            "n_objects": config.n_objects,
            "compactness": config.compactness,
            "iterations": config.slic_iterations,
            "min_region_fraction": config.min_region_fraction,
            "eps": config.eps,
            "min_pts": config.min_pts,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:32]


def _cluster_tile_cached(tile: Tile, config: RunConfig) -> tuple[ClusterMap, float, float, bool]:
    """Single-tile cluster map with optional on-disk memoisation.

    Returns (map, segment_seconds, cluster_seconds, cache_hit). Cache
    files are created once and never rewritten (create-then-rename), so
    concurrent workers either recompute identically or read a complete
    file; cached runs produce the same bytes as uncached ones.
    """
    cache_path = None
    if config.cache_dir is not None:
        cache_path = Path(config.cache_dir) / (_cache_key(tile.tile_id, tile.shape, config) + ".npz")
        if cache_path.exists():
            t0 = time.perf_counter()
            with np.load(cache_path) as z:
                cmap = ClusterMap(
                    labels=z["labels"],
                    n_clusters=int(z["n_clusters"]),
                    domain=new_domain_token(),
                )
            return cmap, 0.0, time.perf_counter() - t0, True

    t0 = time.perf_counter()
    omap = slic_segment(tile, config.slic_params_intra())
    t1 = time.perf_counter()
    feats = standardize(extract_object_features(tile, omap))
    assignment = resolve_noise(dbscan(feats, config.dbscan_params()), feats)
    cmap = build_cluster_map(omap, assignment)
    t2 = time.perf_counter()

    if cache_path is not None:
        # tmp keeps the .npz suffix: np.savez appends it to any other name
        tmp = cache_path.with_name(cache_path.stem + f".tmp{os.getpid()}.npz")
        np.savez(tmp, labels=cmap.labels, n_clusters=np.int64(cmap.n_clusters))
        os.replace(tmp, cache_path)
    return cmap, t1 - t0, t2 - t1, False


def synthesize(pool: TilePool, config: RunConfig, sample_index: int) -> tuple[SynthSample, dict]:
    """Produce one sample; deterministic in (pool, config, sample_index)."""
    seed = derive_seed(config.global_seed, sample_index)
    return synthesize_from_seed(pool, config, seed, f"{sample_index:06d}", sample_index)


def synthesize_from_seed(
    pool: TilePool,
    config: RunConfig,
    seed: int,
    sample_id: str,
    sample_index: int = -1,
) -> tuple[SynthSample, dict]:
    """Reproduce a sample from its recorded 64-bit seed.

    This is the reproduction path a manifest entry promises: the seed
    alone (plus the pool and config) rebuilds identical rasters.
    """
    rng = rng_from_seed(seed)
    h, w, _ = pool.tile_shape
    scales = config.schedule_for(h, w).scales
    recipe = _draw_recipe(rng, config, len(pool), scales, sample_index, seed)
    timings = dict.fromkeys(STAGES, 0.0)
    cache_hit = False

    if recipe.method == "intra":
        tile = pool[recipe.tile_indices[0]]
        cmap, seg_s, clu_s, cache_hit = _cluster_tile_cached(tile, config)
        timings["segment"] = seg_s
        timings["cluster"] = clu_s
        t0 = time.perf_counter()
        grid = GridSpec.for_shape(h, w, recipe.sigma)
        plan = make_intra_plan(grid, config.r_intra, rng)
        sample = intra_exchange(tile, cmap, plan)
        timings["exchange"] = time.perf_counter() - t0
        ratio = config.r_intra
        sources = [tile.tile_id]
    else:
        tile_a = pool[recipe.tile_indices[0]]
        tile_b = pool[recipe.tile_indices[1]]
        t0 = time.perf_counter()
        om_a, om_b = slic_segment_joint(tile_a, tile_b, config.slic_params_joint())
        timings["segment"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        pooled = standardize(
            FeatureMatrix(
                rows=np.vstack(
                    [
                        extract_object_features(tile_a, om_a).rows,
                        extract_object_features(tile_b, om_b).rows,
                    ]
                )
            )
        )
        assignment = resolve_noise(dbscan(pooled, config.dbscan_params()), pooled)
        token = new_domain_token()
        cmap_a = build_cluster_map(om_a, assignment, domain=token)
        cmap_b = build_cluster_map(om_b, assignment, domain=token)
        timings["cluster"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        grid = GridSpec.for_shape(h, w, recipe.sigma)
        plan = make_inter_plan(grid, config.r_inter, rng)
        sample = inter_exchange(tile_a, tile_b, cmap_a, cmap_b, plan)
        timings["exchange"] = time.perf_counter() - t0
        ratio = config.r_inter
        sources = [tile_a.tile_id, tile_b.tile_id]

    t0 = time.perf_counter()
    t2 = simulate(sample.t2, config.sim, rng)
    timings["sim"] = time.perf_counter() - t0

    entry = SampleManifestEntry(
        sample_id=sample_id,
        t1_path=f"samples/{sample_id}_t1.png",
        t2_path=f"samples/{sample_id}_t2.png",
        label_path=f"labels/{sample_id}.png",
        method=recipe.method,
        sigma=recipe.sigma,
        ratio=ratio,
        seed=seed,
        source_tile_ids=sources,
    )
    out = SynthSample(t1=sample.t1, t2=t2, label=sample.label, provenance=entry)
    timings["cache_hit"] = cache_hit
    return out, timings


def _writable(img: np.ndarray) -> np.ndarray:
    return img[:, :, 0] if img.shape[2] == 1 else img


def write_sample(sample: SynthSample, run_dir: Path) -> None:
    entry = sample.provenance
    if entry is None:
        raise ValueError("sample has no provenance entry")
    Image.fromarray(_writable(sample.t1.image)).save(run_dir / entry.t1_path, compress_level=1)
    Image.fromarray(_writable(sample.t2.image)).save(run_dir / entry.t2_path, compress_level=1)
    encode_label(sample.label, run_dir / entry.label_path)


_WORK: dict = {}


def _init_worker(pool: TilePool, config: RunConfig, run_dir: Path) -> None:
    _WORK["pool"] = pool
    _WORK["config"] = config
    _WORK["run_dir"] = run_dir


def _run_one(sample_index: int) -> tuple[int, SampleManifestEntry, dict]:
    sample, timings = synthesize(_WORK["pool"], _WORK["config"], sample_index)
    t0 = time.perf_counter()
    write_sample(sample, _WORK["run_dir"])
    timings["write"] = time.perf_counter() - t0
    return sample_index, sample.provenance, timings


def _aggregate_timings(per_sample: list[dict], wall_s: float, methods: list[str]) -> dict:
    n = len(per_sample)
    totals = {s: sum(t[s] for t in per_sample) * 1000.0 for s in STAGES}
    return {
        "sample_count": n,
        "wall_s": wall_s,
        "stage_ms_total": {s: round(v, 3) for s, v in totals.items()},
        "stage_ms_mean": {s: round(v / n, 3) if n else 0.0 for s, v in totals.items()},
        "cache_hits": sum(1 for t in per_sample if t.get("cache_hit")),
        "method_counts": {m: methods.count(m) for m in ("intra", "inter")},
    }


def run_synthesis(config: RunConfig, progress: bool = False) -> RunResult:
    """Drive a full synthesis run: samples, labels, manifest, timings."""
    started = time.perf_counter()
    pool = load_pool(config.pool_dir)
    h, w, _ = pool.tile_shape
    config.schedule_for(h, w)  # fail fast if no scale fits

    run_dir = Path(config.output_dir)
    (run_dir / "samples").mkdir(parents=True, exist_ok=True)
    (run_dir / "labels").mkdir(parents=True, exist_ok=True)
    if config.cache_dir is not None:
        Path(config.cache_dir).mkdir(parents=True, exist_ok=True)
    (run_dir / "config.echo").write_text(config.echo_json())

    indices = range(config.sample_count)
    results: list[tuple[int, SampleManifestEntry, dict]] = []
    if config.worker_count == 1 or config.sample_count == 0:
        _init_worker(pool, config, run_dir)
        for i in indices:
            results.append(_run_one(i))
            if progress and (i + 1) % max(1, config.sample_count // 10) == 0:
                print(f"synth {i + 1}/{config.sample_count}", flush=True)
    else:
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, config.sample_count // (config.worker_count * 8))
        with ctx.Pool(config.worker_count, initializer=_init_worker, initargs=(pool, config, run_dir)) as workers:
            done = 0
            for item in workers.imap_unordered(_run_one, indices, chunksize=chunk):
                results.append(item)
                done += 1
                if progress and done % max(1, config.sample_count // 10) == 0:
                    print(f"synth {done}/{config.sample_count}", flush=True)

    results.sort(key=lambda r: r[0])
    entries = [r[1] for r in results]
    per_sample = [r[2] for r in results]

    manifest_path = run_dir / "manifest.jsonl"
    write_manifest(manifest_path, config.manifest_header(pool), entries)

    wall = time.perf_counter() - started
    timings = _aggregate_timings(per_sample, wall, [e.method for e in entries])
    (run_dir / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    return RunResult(
        run_dir=run_dir,
        manifest_path=manifest_path,
        sample_count=len(entries),
        wall_s=wall,
        timings=timings,
    )

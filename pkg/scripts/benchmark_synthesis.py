#!/usr/bin/env python3
"""Per-stage synthesis timing across object counts and tile sizes.

Times single-sample synthesis (no disk writes, no workers) so the
numbers isolate the algorithmic cost: segmentation dominates, then
clustering; exchange and simulation are noise. Useful for picking
n_objects against a wall-clock budget before a big run.

    python3 scripts/benchmark_synthesis.py --sizes 128,256 --objects 500,1000
"""

import argparse
import sys
import time

from patchex.config import RunConfig
from patchex.pipeline import synthesize
from patchex.rng import derive_rng
from patchex.synthetic import MosaicSpec, default_materials, gen_mosaic
from patchex.tiles import TilePool


def bench(size: int, n_objects: int, reps: int, intra: bool) -> dict:
    spec = MosaicSpec(h=size, w=size, c=3, materials=default_materials(4),
                      blob_scale=max(16, size // 6))
    tiles = [gen_mosaic(spec, derive_rng(99, i), tile_id=f"b{i}")[0] for i in range(4)]
    pool = TilePool(tiles)
    cfg = RunConfig(
        pool_dir="unused",
        output_dir="unused",
        sample_count=reps,
        intra_fraction=1.0 if intra else 0.0,
        scales=tuple(s for s in (16, 32, 64, 128) if size % s == 0),
        n_objects=n_objects,
    )
    stages: dict[str, float] = {}
    t0 = time.perf_counter()
    for i in range(reps):
        _, timings = synthesize(pool, cfg, i)
        for k, v in timings.items():
            if isinstance(v, float):
                stages[k] = stages.get(k, 0.0) + v
    wall = time.perf_counter() - t0
    out = {k: 1000.0 * v / reps for k, v in stages.items()}
    out["total"] = 1000.0 * wall / reps
    return out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="128,256")
    ap.add_argument("--objects", default="500,1000")
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    objects = [int(s) for s in args.objects.split(",")]

    header = f"{'mode':<6} {'size':>5} {'K':>6} {'segment':>9} {'cluster':>9} {'exchange':>9} {'sim':>7} {'total':>8}"
    print(header)
    print("-" * len(header))
    for intra in (True, False):
        mode = "intra" if intra else "inter"
        for size in sizes:
            for k in objects:
                r = bench(size, k, args.reps, intra)
                print(
                    f"{mode:<6} {size:>5} {k:>6} "
                    f"{r.get('segment', 0):>7.1f}ms {r.get('cluster', 0):>7.1f}ms "
                    f"{r.get('exchange', 0):>7.1f}ms {r.get('sim', 0):>5.1f}ms {r['total']:>6.1f}ms"
                )
    return 0


if __name__ == "__main__":
    sys.exit(main())

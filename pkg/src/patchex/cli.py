"""Command-line surface.

Subcommands: synth (run the synthesis pipeline), eval (aggregate
metrics over prediction/reference label directories), pcc (baseline
change map for one pair), gen-synthetic (procedural pool and test
pairs), cluster-debug (object boundary / cluster map dumps). A JSON
config file drives synth; every flag overrides its config key. The
PATCHEX_WORKERS environment variable supplies the default worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .clustering import DbscanParams, cluster_tile
from .config import RunConfig
from .labels import decode_label, encode_label
from .metrics import UndefinedMetricsError, accumulate, metrics_json, pcc_detect
from .pipeline import run_synthesis
from .rng import derive_rng
from .simulate import SimConfig, simulate
from .slic import SlicParams, slic_segment
from .synthetic import MosaicSpec, default_materials, gen_mosaic, gen_true_change_pair
from .tiles import load_tile


def _default_workers() -> int:
    return int(os.environ.get("PATCHEX_WORKERS", "1"))


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        if not (args.pool and args.out and args.count is not None):
            print("synth needs --config or all of --pool/--out/--count", file=sys.stderr)
            return 2
        config = RunConfig(pool_dir=args.pool, output_dir=args.out, sample_count=args.count)
    overrides = {
        "pool_dir": args.pool,
        "output_dir": args.out,
        "sample_count": args.count,
        "global_seed": args.seed,
        "worker_count": args.workers,
        "intra_fraction": args.intra_fraction,
        "r_intra": args.r_intra,
        "r_inter": args.r_inter,
        "n_objects": args.n_objects,
        "n_objects_joint": args.n_objects_joint,
        "eps": args.eps,
        "min_pts": args.min_pts,
        "cache_dir": args.cache_dir,
    }
    d = config.to_dict()
    for key, val in overrides.items():
        if val is not None:
            d[key] = val
    if args.scales:
        d["scales"] = [int(s) for s in args.scales.split(",")]
    if args.sim is not None:
        d["sim"]["enabled"] = args.sim
    if args.workers is None and "PATCHEX_WORKERS" in os.environ:
        d["worker_count"] = _default_workers()
    config = RunConfig.from_dict(d)

    result = run_synthesis(config, progress=not args.quiet)
    if not args.quiet:
        stages = result.timings["stage_ms_mean"]
        per_stage = ", ".join(f"{k} {v:.1f}ms" for k, v in stages.items())
        print(f"wrote {result.sample_count} samples to {result.run_dir} in {result.wall_s:.1f}s")
        print(f"mean per-sample: {per_stage}")
    return 0


def _label_files(d: Path) -> dict[str, Path]:
    return {p.name: p for p in sorted(d.iterdir()) if p.suffix.lower() == ".png"}


def _cmd_eval(args: argparse.Namespace) -> int:
    pred_dir, ref_dir = Path(args.pred), Path(args.ref)
    preds, refs = _label_files(pred_dir), _label_files(ref_dir)
    missing_ref = sorted(set(preds) - set(refs))
    missing_pred = sorted(set(refs) - set(preds))
    if missing_ref or missing_pred:
        if missing_ref:
            print(f"missing in {ref_dir}: {', '.join(missing_ref)}", file=sys.stderr)
        if missing_pred:
            print(f"missing in {pred_dir}: {', '.join(missing_pred)}", file=sys.stderr)
        return 1
    counts = None
    for name, ppath in preds.items():
        counts = accumulate(decode_label(ppath), decode_label(refs[name]), counts)
    try:
        if counts is None:
            raise UndefinedMetricsError("no label pairs found")
        doc = metrics_json(counts)
    except UndefinedMetricsError as exc:
        print(f"undefined metrics: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _cmd_pcc(args: argparse.Namespace) -> int:
    t1 = load_tile(args.t1)
    t2 = load_tile(args.t2)
    label = pcc_detect(
        t1,
        t2,
        SlicParams(n_objects=args.n_objects),
        DbscanParams(eps=args.eps, min_pts=args.min_pts),
    )
    encode_label(label, args.out)
    print(f"wrote {args.out} (changed fraction {label.mean():.3f})")
    return 0


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    out = Path(args.out)
    pool_dir = out / "pool"
    pool_dir.mkdir(parents=True, exist_ok=True)
    materials = default_materials(args.materials)
    spec = MosaicSpec(h=args.size, w=args.size, c=3, materials=materials, blob_scale=args.blob_scale)
    sim_cfg = SimConfig()
    for i in range(args.tiles):
        rng = derive_rng(args.seed, i)
        tile, _ = gen_mosaic(spec, rng, tile_id=f"tile{i:05d}")
        Image.fromarray(tile.image).save(pool_dir / f"tile{i:05d}.png")
    if args.pairs:
        for sub in ("t1", "t2", "labels"):
            (out / "pairs" / sub).mkdir(parents=True, exist_ok=True)
        for i in range(args.pairs):
            rng = derive_rng(args.seed + 1_000_003, i)
            t1, t2, label = gen_true_change_pair(spec, args.change_fraction, rng, tile_id=f"pair{i:05d}")
            t2_img = t2.image
            if args.sim_pairs:
                t2_img = simulate(t2, sim_cfg, rng).image
            name = f"pair{i:05d}.png"
            Image.fromarray(t1.image).save(out / "pairs" / "t1" / name)
            Image.fromarray(t2_img).save(out / "pairs" / "t2" / name)
            encode_label(label, out / "pairs" / "labels" / name)
    print(f"wrote {args.tiles} pool tiles and {args.pairs} pairs under {out}")
    return 0


def _cmd_cluster_debug(args: argparse.Namespace) -> int:
    tile = load_tile(args.image)
    params = SlicParams(n_objects=args.n_objects)
    omap = slic_segment(tile, params)
    cmap = cluster_tile(tile, params, DbscanParams(eps=args.eps, min_pts=args.min_pts), object_map=omap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    boundary = np.zeros(omap.labels.shape, dtype=bool)
    boundary[:, 1:] |= omap.labels[:, 1:] != omap.labels[:, :-1]
    boundary[1:, :] |= omap.labels[1:, :] != omap.labels[:-1, :]
    overlay = tile.image.copy()
    if overlay.shape[2] == 1:
        overlay = np.repeat(overlay, 3, axis=2)
    overlay[boundary] = (255, 255, 0)
    Image.fromarray(overlay).save(out / "boundaries.png")

    palette_rng = np.random.Generator(np.random.PCG64(7))
    colors = palette_rng.integers(40, 255, size=(max(cmap.n_clusters, 1), 3), dtype=np.uint8)
    Image.fromarray(colors[cmap.labels]).save(out / "clusters.png")
    print(
        json.dumps(
            {"n_objects": omap.n_objects, "n_clusters": cmap.n_clusters, "image": str(args.image)},
            indent=2,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchex", description="Pseudo-bi-temporal change-detection sample synthesis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a sample set from a tile pool")
    p.add_argument("--config", help="JSON run config; flags below override its keys")
    p.add_argument("--pool", help="tile pool directory")
    p.add_argument("--out", help="run output directory")
    p.add_argument("--count", type=int, help="number of samples")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--workers", type=int, help=f"worker processes (default from PATCHEX_WORKERS, currently {_default_workers()})")
    p.add_argument("--intra-fraction", dest="intra_fraction", type=float, help="share of intra-exchange samples")
    p.add_argument("--scales", help="comma-separated sigma list, e.g. 16,32,64,128")
    p.add_argument("--r-intra", dest="r_intra", type=float)
    p.add_argument("--r-inter", dest="r_inter", type=float)
    p.add_argument("--n-objects", dest="n_objects", type=int)
    p.add_argument("--n-objects-joint", dest="n_objects_joint", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", dest="min_pts", type=int)
    p.add_argument("--cache-dir", dest="cache_dir", help="cluster-map cache directory (intra mode)")
    sim_group = p.add_mutually_exclusive_group()
    sim_group.add_argument("--sim", dest="sim", action="store_true", default=None, help="enable imaging simulation")
    sim_group.add_argument("--no-sim", dest="sim", action="store_false", help="disable imaging simulation")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="aggregate metrics over matching label directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", help="also write the metrics JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pcc", help="post-classification-comparison change map for one pair")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-objects", dest="n_objects", type=int, default=2000, help="joint object count")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--min-pts", dest="min_pts", type=int, default=4)
    p.set_defaults(func=_cmd_pcc)

    p = sub.add_parser("gen-synthetic", help="generate a procedural pool and test pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--tiles", type=int, default=50)
    p.add_argument("--pairs", type=int, default=0)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--materials", type=int, default=3)
    p.add_argument("--blob-scale", dest="blob_scale", type=int, default=48)
    p.add_argument("--change-fraction", dest="change_fraction", type=float, default=0.2)
    p.add_argument("--sim-pairs", dest="sim_pairs", action="store_true", help="apply imaging simulation to each pair's t2")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("cluster-debug", help="dump object boundaries and the cluster map for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-objects", dest="n_objects", type=int, default=1000)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--min-pts", dest="min_pts", type=int, default=4)
    p.set_defaults(func=_cmd_cluster_debug)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""patchex-train command line: train / eval / infer on synthesis-run files."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .data import Normalizer, PairDataset, batch_indices, encode_label_png, load_image, read_manifest
from .model import DetectorConfig
from .train import infer, load_checkpoint, predict_probs, train_semisupervised, train_unsupervised


def _add_train(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("train", help="fit a detector on a synthesis run")
    p.add_argument("--manifest", required=True, help="run manifest.jsonl")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--preset", default="small", choices=("small", "medium"))
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--selftrain-rounds", type=int, default=3)
    p.add_argument("--unlabeled-t1", help="dir of t1 PNGs for self-training phase")
    p.add_argument("--unlabeled-t2", help="dir of t2 PNGs for self-training phase")
    p.add_argument("--phase1-out", help="also snapshot the checkpoint before self-training")
    p.add_argument("--labeled-t1", help="dir of labeled-pair t1 PNGs (semi-supervised)")
    p.add_argument("--labeled-t2", help="dir of labeled-pair t2 PNGs (semi-supervised)")
    p.add_argument("--labeled-ref", help="dir of labeled-pair reference PNGs")


def _cmd_train(args: argparse.Namespace) -> int:
    header, _ = read_manifest(args.manifest)
    in_channels = int(header["tile_shape"][2])
    config = DetectorConfig(
        preset=args.preset,
        in_channels=in_channels,
        batch_size=args.batch_size,
        epochs=args.epochs,
        tau=args.tau,
        seed=args.seed,
        selftrain_rounds=args.selftrain_rounds,
    )
    normalizer = Normalizer.from_header(header)
    labeled_flags = (args.labeled_t1, args.labeled_t2, args.labeled_ref)
    if any(labeled_flags):
        if not all(labeled_flags):
            raise ValueError("semi-supervised mode needs --labeled-t1, --labeled-t2, --labeled-ref")
        labeled = PairDataset(args.labeled_t1, args.labeled_t2, normalizer, labels_dir=args.labeled_ref)
        result = train_semisupervised(args.manifest, labeled, config, args.out)
    else:
        unlabeled = None
        if args.unlabeled_t1 or args.unlabeled_t2:
            if not (args.unlabeled_t1 and args.unlabeled_t2):
                raise ValueError("self-training needs both --unlabeled-t1 and --unlabeled-t2")
            unlabeled = PairDataset(args.unlabeled_t1, args.unlabeled_t2, normalizer)
        result = train_unsupervised(
            args.manifest, config, args.out, unlabeled=unlabeled, phase1_out=args.phase1_out
        )
    for entry in result.log:
        slim = {k: v for k, v in entry.items() if k != "steps"}
        print(json.dumps(slim))
    print(f"checkpoint written to {result.checkpoint}")
    return 0


def _add_eval(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("eval", help="score a checkpoint against labeled pairs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--t1-dir", required=True)
    p.add_argument("--t2-dir", required=True)
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--out", help="metrics JSON path (defaults to stdout only)")
    p.add_argument("--pred-dir", help="also write predicted label PNGs here")
    p.add_argument("--batch-size", type=int, default=8)


def _cmd_eval(args: argparse.Namespace) -> int:
    model, normalizer, _ = load_checkpoint(args.checkpoint)
    pairs = PairDataset(args.t1_dir, args.t2_dir, normalizer, labels_dir=args.ref_dir)
    probs = predict_probs(model, pairs, args.batch_size)
    preds = probs.argmax(dim=1).numpy().astype(np.uint8)
    counts = metrics.Counts()
    for i in range(len(pairs)):
        counts = metrics.accumulate(preds[i], pairs.labels[i], counts)
    doc = metrics.metrics_json(counts)
    if args.pred_dir:
        out_dir = Path(args.pred_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, name in enumerate(pairs.names):
            encode_label_png(preds[i], out_dir / name)
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _add_infer(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("infer", help="predict a change map for one pair")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--out", required=True, help="prediction PNG path")


def _cmd_infer(args: argparse.Namespace) -> int:
    model, normalizer, _ = load_checkpoint(args.checkpoint)
    x1 = normalizer.apply(load_image(args.t1)[None])
    x2 = normalizer.apply(load_image(args.t2)[None])
    pred = infer(model, x1, x2)[0]
    encode_label_png(pred, args.out)
    print(f"prediction written to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="patchex-train")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_train(sub)
    _add_eval(sub)
    _add_infer(sub)
    args = parser.parse_args(argv)
    handler = {"train": _cmd_train, "eval": _cmd_eval, "infer": _cmd_infer}[args.command]
    try:
        return handler(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Training drivers, inference, and checkpoint round-tripping.

Unsupervised: phase 1 fits the detector to synthesis-run samples with the
temporally symmetric loss under SGD; an optional phase 2 alternates
confidence-gated pseudo-labeling of unlabeled real pairs with continued
training under AdamW. Semi-supervised alternates batches of truly labeled
pairs with synthesis batches whose labels are first refined by model
agreement.

Steps run sequentially under a fixed seed. config.deterministic pins torch
to one thread so reductions are reproducible; turning it off trades that
for throughput on multi-core hosts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import IGNORE, Normalizer, PairDataset, SampleDataset, batch_indices
from .losses import temporal_symmetric_loss
from .model import DetectorConfig, SiameseDetector
from .pseudo import generate_pseudo_labels, refine_synth_labels


@dataclass
class TrainResult:
    checkpoint: Path
    log: list[dict]


def _seed_all(config: DetectorConfig) -> np.random.Generator:
    torch.manual_seed(config.seed)
    if config.deterministic:
        torch.set_num_threads(1)
    return np.random.default_rng(config.seed)


def save_checkpoint(
    model: SiameseDetector, normalizer: Normalizer, path: str | Path, log: list[dict] | None = None
) -> Path:
    path = Path(path)
    payload = {
        "state_dict": model.state_dict(),
        "config": model.config.to_dict(),
        "channel_mean": normalizer.mean.tolist(),
        "channel_std": normalizer.std.tolist(),
        "log": log or [],
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[SiameseDetector, Normalizer, list[dict]]:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    config = DetectorConfig(**payload["config"])
    model = SiameseDetector(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    normalizer = Normalizer(
        mean=np.asarray(payload["channel_mean"], dtype=np.float32),
        std=np.asarray(payload["channel_std"], dtype=np.float32),
    )
    return model, normalizer, payload.get("log", [])


def infer(model: SiameseDetector, x1: torch.Tensor, x2: torch.Tensor) -> np.ndarray:
    """Binary change map (B, H, W) uint8 by probability argmax; never IGNORE."""
    model.eval()
    with torch.no_grad():
        prob = model(x1, x2)
    return prob.argmax(dim=1).to(torch.uint8).numpy()


def predict_probs(model: SiameseDetector, pairs: PairDataset, batch_size: int) -> torch.Tensor:
    """Stacked probability maps for every pair, eval mode, fixed order."""
    model.eval()
    chunks = []
    with torch.no_grad():
        for idx in batch_indices(len(pairs), batch_size, rng=None):
            x1, x2 = pairs.batch(idx)
            chunks.append(model(x1, x2))
    return torch.cat(chunks, dim=0)


def _run_epoch(model, optimizer, batches) -> list[float]:
    """One pass over (x1, x2, y) batches; returns per-step losses."""
    model.train()
    losses = []
    for x1, x2, y in batches:
        optimizer.zero_grad()
        loss = temporal_symmetric_loss(model, x1, x2, y)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    return losses


def train_unsupervised(
    manifest_path: str | Path,
    config: DetectorConfig,
    out_path: str | Path,
    unlabeled: PairDataset | None = None,
    phase1_out: str | Path | None = None,
) -> TrainResult:
    """Phase 1 on synthesis samples; optional phase 2 self-training on pairs.

    phase1_out, when given, snapshots the model between the phases so the
    effect of self-training can be measured against the same starting point.
    """
    rng = _seed_all(config)
    dataset = SampleDataset(manifest_path)
    model = SiameseDetector(config)
    log: list[dict] = []

    opt = torch.optim.SGD(
        model.parameters(),
        lr=config.lr_initial,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    for epoch in range(config.epochs):
        batches = (dataset.batch(idx) for idx in batch_indices(len(dataset), config.batch_size, rng))
        losses = _run_epoch(model, opt, batches)
        log.append({"phase": 1, "epoch": epoch, "loss": float(np.mean(losses)), "steps": losses})

    if phase1_out is not None:
        save_checkpoint(model, dataset.normalizer, phase1_out, log)

    if unlabeled is not None:
        opt = torch.optim.AdamW(
            model.parameters(), lr=config.lr_selftrain, weight_decay=config.weight_decay
        )
        for rnd in range(config.selftrain_rounds):
            probs = predict_probs(model, unlabeled, config.batch_size)
            pseudo = generate_pseudo_labels(probs, config.tau)
            ignored = float((pseudo == IGNORE).float().mean())
            model.train()
            losses = []
            for idx in batch_indices(len(unlabeled), config.batch_size, rng):
                y = pseudo[idx].long()
                if not bool((y != IGNORE).any()):
                    continue  # nothing confident in this batch; skip rather than error
                x1, x2 = unlabeled.batch(idx)
                opt.zero_grad()
                loss = temporal_symmetric_loss(model, x1, x2, y)
                loss.backward()
                opt.step()
                losses.append(float(loss.detach()))
            log.append(
                {
                    "phase": 2,
                    "round": rnd,
                    "ignored_fraction": ignored,
                    "loss": float(np.mean(losses)) if losses else None,
                }
            )

    normalizer = dataset.normalizer
    ckpt = save_checkpoint(model, normalizer, out_path, log)
    return TrainResult(checkpoint=ckpt, log=log)


def train_semisupervised(
    manifest_path: str | Path,
    labeled: PairDataset,
    config: DetectorConfig,
    out_path: str | Path,
) -> TrainResult:
    """Alternate truly labeled batches with agreement-refined synthesis batches."""
    if labeled.labels is None:
        raise ValueError("labeled PairDataset must carry labels")
    rng = _seed_all(config)
    dataset = SampleDataset(manifest_path)
    model = SiameseDetector(config)
    log: list[dict] = []

    opt = torch.optim.SGD(
        model.parameters(),
        lr=config.lr_initial,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    real_labels = torch.from_numpy(labeled.labels.astype(np.int64))
    for epoch in range(config.epochs):
        synth_batches = batch_indices(len(dataset), config.batch_size, rng)
        real_batches = batch_indices(len(labeled), config.batch_size, rng)
        losses_real, losses_synth, ignored_fracs = [], [], []
        for step, sidx in enumerate(synth_batches):
            # real batch first, cycling when the labeled set is the smaller one
            ridx = real_batches[step % len(real_batches)]
            x1, x2 = labeled.batch(ridx)
            y = real_labels[ridx]
            opt.zero_grad()
            loss = temporal_symmetric_loss(model, x1, x2, y)
            loss.backward()
            opt.step()
            losses_real.append(float(loss.detach()))

            s1, s2, sy = dataset.batch(sidx)
            model.eval()
            with torch.no_grad():
                prob = model(s1, s2)
            refined = refine_synth_labels(sy, prob).long()
            ignored_fracs.append(float((refined == IGNORE).float().mean()))
            model.train()
            if not bool((refined != IGNORE).any()):
                continue
            opt.zero_grad()
            loss = temporal_symmetric_loss(model, s1, s2, refined)
            loss.backward()
            opt.step()
            losses_synth.append(float(loss.detach()))
        log.append(
            {
                "epoch": epoch,
                "loss_real": float(np.mean(losses_real)),
                "loss_synth": float(np.mean(losses_synth)) if losses_synth else None,
                "refined_ignored_fraction": float(np.mean(ignored_fracs)),
            }
        )

    ckpt = save_checkpoint(model, dataset.normalizer, out_path, log)
    return TrainResult(checkpoint=ckpt, log=log)

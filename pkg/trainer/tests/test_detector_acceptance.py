"""Acceptance checks for the detector trainer.

Each test prints one [accept] line. The end-to-end test drives the sample
producer exclusively through its command line and reads only its published
file formats, which is the same coupling surface real training jobs use.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from patchex_trainer import metrics
from patchex_trainer.data import IGNORE, Normalizer, PairDataset, read_manifest
from patchex_trainer.losses import masked_cross_entropy, temporal_symmetric_loss
from patchex_trainer.model import DetectorConfig, SiameseDetector
from patchex_trainer.pseudo import generate_pseudo_labels, refine_synth_labels
from patchex_trainer.train import load_checkpoint, predict_probs, train_unsupervised


def _producer(*args, timeout=900):
    """Invoke the sample-synthesis CLI in a child process."""
    res = subprocess.run(
        [sys.executable, "-m", "patchex.cli", *map(str, args)],
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    assert res.returncode == 0, f"patchex {args[0]} failed:\n{res.stderr}"
    return res


class _MiniDecoder(torch.nn.Module):
    """Two-conv miniature of the decoder path: fuse, upsample+add, smooth,
    classify. Batch norm is left out so the function stays C1 almost
    everywhere and finite differences are meaningful."""

    def __init__(self):
        super().__init__()
        self.fuse = torch.nn.Conv2d(8, 4, 1).double()
        self.smooth = torch.nn.Conv2d(4, 4, 3, padding=1).double()
        self.classify = torch.nn.Conv2d(4, 2, 1).double()

    def forward(self, skip_a, skip_b, coarse):
        fused = F.relu(self.fuse(torch.cat([skip_a, skip_b], dim=1)))
        up = F.interpolate(coarse, scale_factor=2, mode="nearest")
        h = F.relu(self.smooth(fused + up))
        return torch.softmax(self.classify(h), dim=1)


def test_gradient_check_decoder_miniature():
    torch.manual_seed(0)
    net = _MiniDecoder()
    skip_a = torch.randn(1, 4, 8, 8, dtype=torch.float64)
    skip_b = torch.randn(1, 4, 8, 8, dtype=torch.float64)
    coarse = torch.randn(1, 4, 4, 4, dtype=torch.float64)
    label = torch.randint(0, 3, (1, 8, 8))  # includes IGNORE pixels

    def loss_value() -> torch.Tensor:
        return masked_cross_entropy(net(skip_a, skip_b, coarse), label)

    loss = loss_value()
    loss.backward()
    h = 1e-6
    worst = 0.0
    n_checked = 0
    for param in net.parameters():
        grad = param.grad.reshape(-1)
        flat = param.data.reshape(-1)
        for k in range(flat.numel()):
            orig = float(flat[k])
            with torch.no_grad():
                flat[k] = orig + h
                up = float(loss_value())
                flat[k] = orig - h
                down = float(loss_value())
                flat[k] = orig
            numeric = (up - down) / (2 * h)
            analytic = float(grad[k])
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, rel)
            n_checked += 1
    assert worst <= 1e-3, f"worst relative gradient error {worst:.2e}"
    print(f"\n[accept] gradient check: PASS ({n_checked} coords, worst rel err {worst:.2e})")


def test_symmetric_loss_decomposition():
    torch.manual_seed(1)
    model = SiameseDetector(DetectorConfig()).eval()
    rng = np.random.default_rng(1)
    t1 = torch.from_numpy(rng.normal(size=(2, 3, 32, 32)).astype(np.float32))
    t2 = torch.from_numpy(rng.normal(size=(2, 3, 32, 32)).astype(np.float32))
    label = torch.from_numpy(rng.integers(0, 3, size=(2, 32, 32)))
    with torch.no_grad():
        combined = float(temporal_symmetric_loss(model, t1, t2, label))
        separate = float(masked_cross_entropy(model(t1, t2), label)) + float(
            masked_cross_entropy(model(t2, t1), label)
        )
    assert combined == pytest.approx(separate, abs=1e-6)
    print(f"\n[accept] symmetric-loss decomposition: PASS (|delta|={abs(combined - separate):.2e})")


def test_pseudo_label_equivalence():
    rng = np.random.default_rng(2)
    mismatches = 0
    for _ in range(20):
        p1 = rng.uniform(size=(2, 9, 11)).astype(np.float32)
        prob = torch.from_numpy(np.stack([1.0 - p1, p1], axis=1))
        tau = float(rng.uniform(0.55, 0.95))
        got = generate_pseudo_labels(prob, tau).numpy()
        conf = prob.numpy().max(axis=1)
        cls = prob.numpy().argmax(axis=1)
        expect = np.where(conf > tau, cls, IGNORE)
        mismatches += int((got != expect).sum())
    assert mismatches == 0
    print("\n[accept] pseudo-label rule equivalence: PASS (20 random maps, exact)")


def test_refinement_equivalence():
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(20):
        p1 = rng.uniform(size=(2, 9, 11)).astype(np.float32)
        prob = torch.from_numpy(np.stack([1.0 - p1, p1], axis=1))
        label = torch.from_numpy(rng.integers(0, 2, size=(2, 9, 11)))
        got = refine_synth_labels(label, prob).numpy()
        cls = prob.numpy().argmax(axis=1)
        expect = np.where(label.numpy() == cls, label.numpy(), IGNORE)
        mismatches += int((got != expect).sum())
    assert mismatches == 0
    print("\n[accept] label-refinement rule equivalence: PASS (20 random maps, exact)")


def test_ignore_exclusion_invariance():
    rng = np.random.default_rng(4)
    logits = torch.from_numpy(rng.normal(size=(2, 2, 8, 8)).astype(np.float32))
    prob = torch.softmax(logits, dim=1)
    label = torch.from_numpy(rng.integers(0, 2, size=(2, 8, 8)))
    label[:, ::2, :] = IGNORE
    base = float(masked_cross_entropy(prob, label))
    tampered = prob.clone()
    tampered[:, :, ::2, :] = torch.tensor([0.01, 0.99]).view(1, 2, 1, 1)
    after = float(masked_cross_entropy(tampered, label))
    assert after == base  # bitwise: ignored pixels contribute nothing at all
    print("\n[accept] IGNORE-exclusion invariance: PASS (loss bit-identical)")


def _evaluate(ckpt_path: Path, pairs_root: Path, batch_size: int = 16):
    """Score a checkpoint on labeled pairs; returns (metrics doc, preds)."""
    model, norm, _ = load_checkpoint(ckpt_path)
    pairs = PairDataset(
        pairs_root / "t1", pairs_root / "t2", norm, labels_dir=pairs_root / "labels"
    )
    probs = predict_probs(model, pairs, batch_size)
    preds = probs.argmax(dim=1).numpy().astype(np.uint8)
    counts = metrics.Counts()
    for i in range(len(pairs)):
        counts = metrics.accumulate(preds[i], pairs.labels[i], counts)
    return metrics.metrics_json(counts), preds, pairs.names


def test_end_to_end_desk_scale(tmp_path_factory):
    t_start = time.monotonic()
    work = tmp_path_factory.mktemp("e2e")

    # corpus: 200-tile pool for synthesis plus 50 labeled test pairs whose
    # second date carries a radiometric shift, the regime the simulation
    # chain in synthesis is meant to cover
    _producer(
        "gen-synthetic", "--out", work / "data", "--tiles", 200, "--size", 128,
        "--materials", 3, "--pairs", 50, "--sim-pairs", "--seed", 4242,
    )
    # a second, unlabeled pair set for the self-training phase
    _producer(
        "gen-synthetic", "--out", work / "data2", "--tiles", 0, "--pairs", 50,
        "--size", 128, "--materials", 3, "--sim-pairs", "--seed", 5151,
    )
    _producer(
        "synth", "--pool", work / "data" / "pool", "--out", work / "run",
        "--count", 2000, "--seed", 7, "--workers", 1,
        "--cache-dir", work / "cache", "--quiet",
    )
    t_synth = time.monotonic()

    manifest = work / "run" / "manifest.jsonl"
    header, _ = read_manifest(manifest)
    norm = Normalizer.from_header(header)
    unlabeled = PairDataset(work / "data2" / "pairs" / "t1", work / "data2" / "pairs" / "t2", norm)
    config = DetectorConfig(preset="small", epochs=20, batch_size=16, tau=0.95, seed=0)
    train_unsupervised(
        manifest, config, work / "det.pt",
        unlabeled=unlabeled, phase1_out=work / "det_phase1.pt",
    )
    t_train = time.monotonic()

    doc_p1, preds, names = _evaluate(work / "det_phase1.pt", work / "data" / "pairs")

    # the producer's scorer must agree with ours on the same predictions
    pred_dir = work / "det_preds"
    pred_dir.mkdir()
    from patchex_trainer.data import encode_label_png

    for i, name in enumerate(names):
        encode_label_png(preds[i], pred_dir / name)
    _producer(
        "eval", "--pred", pred_dir, "--ref", work / "data" / "pairs" / "labels",
        "--out", work / "det_metrics_producer.json",
    )
    producer_doc = json.loads((work / "det_metrics_producer.json").read_text())
    assert producer_doc["f1"] == pytest.approx(doc_p1["f1"], abs=1e-12)
    assert {k: producer_doc[k] for k in ("tp", "tn", "fp", "fn")} == {
        k: doc_p1[k] for k in ("tp", "tn", "fp", "fn")
    }

    # post-classification-comparison baseline on the identical test set
    pcc_dir = work / "pcc_preds"
    pcc_dir.mkdir()
    for name in names:
        _producer(
            "pcc", "--t1", work / "data" / "pairs" / "t1" / name,
            "--t2", work / "data" / "pairs" / "t2" / name, "--out", pcc_dir / name,
        )
    _producer(
        "eval", "--pred", pcc_dir, "--ref", work / "data" / "pairs" / "labels",
        "--out", work / "pcc_metrics.json",
    )
    pcc_f1 = json.loads((work / "pcc_metrics.json").read_text())["f1"]

    doc_p2, _, _ = _evaluate(work / "det.pt", work / "data" / "pairs")

    # identical dates must read as (almost) all unchanged
    model, norm2, _ = load_checkpoint(work / "det.pt")
    same = PairDataset(work / "data" / "pairs" / "t1", work / "data" / "pairs" / "t1", norm2)
    probs = predict_probs(model, same, 16)
    same_changed = float((probs.argmax(dim=1) == 1).float().mean())

    elapsed = time.monotonic() - t_start
    print(
        f"\n[accept] e2e timings: synth={t_synth - t_start:.0f}s "
        f"train={t_train - t_synth:.0f}s total={elapsed:.0f}s"
    )
    print(
        f"[accept] e2e F1: detector={doc_p1['f1']:.4f} pcc={pcc_f1:.4f} "
        f"self-trained={doc_p2['f1']:.4f} (t,t)-changed={same_changed:.4f}"
    )
    assert doc_p1["f1"] >= pcc_f1 + 0.05, (
        f"detector F1 {doc_p1['f1']:.4f} does not beat PCC {pcc_f1:.4f} by 0.05"
    )
    assert doc_p2["f1"] >= doc_p1["f1"] - 0.02, (
        f"self-training dropped F1 {doc_p1['f1']:.4f} -> {doc_p2['f1']:.4f}"
    )
    assert same_changed <= 0.05
    assert elapsed <= 1800, f"end-to-end took {elapsed:.0f}s, budget 1800s"
    print(
        f"[accept] e2e efficacy: PASS (margin {doc_p1['f1'] - pcc_f1:+.4f} >= 0.05, "
        f"self-training delta {doc_p2['f1'] - doc_p1['f1']:+.4f} >= -0.02, {elapsed:.0f}s <= 1800s)"
    )

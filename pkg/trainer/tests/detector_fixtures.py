"""Hand-rolled miniature synthesis runs for trainer tests.

Deliberately constructed without the producing package: PNG rasters, a
JSONL manifest with a header record, label bytes {0, 255, 128}. The change
signal (a rectangle of swapped material) is learnable so training smoke
tests have something to fit.
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image

HEADER_RECORD_TYPE = "patchex-manifest-header"

# three well-separated flat materials; change = rectangle swapped to a third
_MATERIALS = np.array(
    [[40.0, 60.0, 80.0], [150.0, 140.0, 120.0], [220.0, 200.0, 90.0]]
)


def _noisy(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.clip(img + rng.normal(0.0, 2.0, img.shape), 0, 255).astype(np.uint8)


def make_run(root: Path, n: int = 8, size: int = 64, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for sub in ("t1", "t2", "labels"):
        (root / sub).mkdir(exist_ok=True)

    t1_pool = []
    entries = []
    for i in range(n):
        a, b, c = rng.choice(3, size=3, replace=False)
        img1 = np.empty((size, size, 3))
        split = int(rng.integers(size // 4, 3 * size // 4))
        img1[:, :split] = _MATERIALS[a]
        img1[:, split:] = _MATERIALS[b]
        img2 = img1.copy()
        y0, x0 = rng.integers(0, size // 2, size=2)
        hh, ww = rng.integers(size // 4, size // 2, size=2)
        img2[y0 : y0 + hh, x0 : x0 + ww] = _MATERIALS[c]
        label = (np.abs(img2 - img1).sum(axis=2) > 0).astype(np.uint8)

        t1 = _noisy(img1, rng)
        t2 = _noisy(img2, rng)
        t1_pool.append(t1)
        name = f"s{i:05d}.png"
        Image.fromarray(t1).save(root / "t1" / name)
        Image.fromarray(t2).save(root / "t2" / name)
        label_png = np.where(label == 1, 255, 0).astype(np.uint8)
        if i == 0:
            label_png[:4, :4] = 128  # a few IGNORE pixels must be tolerated
        Image.fromarray(label_png).save(root / "labels" / name)
        entries.append(
            {
                "sample_id": f"s{i:05d}",
                "t1_path": f"t1/{name}",
                "t2_path": f"t2/{name}",
                "label_path": f"labels/{name}",
                "method": "intra" if i % 2 == 0 else "inter",
                "sigma": 16,
                "ratio": 0.75,
                "seed": int(rng.integers(0, 2**63)),
                "source_tile_ids": [f"tile{i:05d}"],
            }
        )

    stacked = np.stack(t1_pool).astype(np.float64)
    header = {
        "record_type": HEADER_RECORD_TYPE,
        "schema_version": 1,
        "global_seed": seed,
        "sample_count": n,
        "tile_shape": [size, size, 3],
        "channel_mean": stacked.mean(axis=(0, 1, 2)).tolist(),
        "channel_std": stacked.std(axis=(0, 1, 2)).tolist(),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(e) for e in entries]
    (root / "manifest.jsonl").write_text("\n".join(lines) + "\n")
    return root / "manifest.jsonl"

"""Run manifest: the external interface of a synthesis run.

A manifest is JSONL. Line 1 is a header record carrying everything a
downstream consumer needs (synthesis-determining config echo plus pool
channel statistics for input normalisation); each following line is one
sample record with exactly the keys in ENTRY_KEYS. Paths are relative
to the manifest's directory so a run directory can be moved wholesale.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterator

ENTRY_KEYS = (
    "sample_id",
    "t1_path",
    "t2_path",
    "label_path",
    "method",
    "sigma",
    "ratio",
    "seed",
    "source_tile_ids",
)

HEADER_RECORD_TYPE = "patchex-manifest-header"


@dataclass(frozen=True)
class SampleManifestEntry:
    sample_id: str
    t1_path: str
    t2_path: str
    label_path: str
    method: str  # "intra" | "inter"
    sigma: int
    ratio: float
    seed: int  # derived per-sample 64-bit seed
    source_tile_ids: list[str]

    def __post_init__(self) -> None:
        if self.method not in ("intra", "inter"):
            raise ValueError(f"method must be 'intra' or 'inter', got {self.method!r}")

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps({k: d[k] for k in ENTRY_KEYS}, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "SampleManifestEntry":
        d = json.loads(line)
        extra = set(d) - set(ENTRY_KEYS)
        missing = set(ENTRY_KEYS) - set(d)
        if extra or missing:
            raise ValueError(f"bad manifest entry: extra keys {sorted(extra)}, missing {sorted(missing)}")
        return cls(**{k: d[k] for k in ENTRY_KEYS})


def write_manifest(path: str | Path, header: dict[str, Any], entries: list[SampleManifestEntry]) -> None:
    path = Path(path)
    rec = dict(header)
    rec["record_type"] = HEADER_RECORD_TYPE
    lines = [json.dumps(rec, sort_keys=True)]
    lines.extend(e.to_json() for e in entries)
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> tuple[dict[str, Any], list[SampleManifestEntry]]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(first)
        if header.get("record_type") != HEADER_RECORD_TYPE:
            raise ValueError(f"{path}: line 1 is not a manifest header")
        entries = [SampleManifestEntry.from_json(line) for line in fh if line.strip()]
    return header, entries


def iter_manifest(path: str | Path) -> Iterator[SampleManifestEntry]:
    _, entries = read_manifest(path)
    yield from entries

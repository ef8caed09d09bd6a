"""Object features, DBSCAN, and cluster maps.

Objects are summarised by per-channel mean and standard deviation
(2C-dimensional rows), z-score standardized, and clustered with classic
DBSCAN. Noise objects are then attached to their nearest core object so
every object ends up with a cluster id, and the assignment is painted
back over the object map. joint_cluster runs the whole chain once over
the pooled objects of a tile pair, which is what puts both cluster maps
in one label domain.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .slic import ObjectMap, SlicParams, slic_segment, slic_segment_joint
from .tiles import Tile

NOISE = -1

_KDTREE_THRESHOLD = 2000

_domain_counter = itertools.count(1)


def new_domain_token() -> int:
    """Fresh provenance token for one clustering call's label domain."""
    return next(_domain_counter)


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray  # (N, 2C) float64
    standardized: bool = False

    def __post_init__(self) -> None:
        if self.rows.ndim != 2:
            raise ValueError(f"feature rows must be 2-d, got shape {self.rows.shape}")
        if not np.isfinite(self.rows).all():
            raise ValueError("non-finite feature values")


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.5
    min_pts: int = 4

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # (N,) int32, NOISE sentinel allowed pre-resolution
    core_mask: np.ndarray  # (N,) bool
    resolved: bool = False

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max(initial=-1)) + 1


@dataclass(frozen=True)
class ClusterMap:
    labels: np.ndarray  # (H, W) int32
    n_clusters: int
    domain: int  # maps are exchange-compatible iff domains match


def _as_image(tile: Tile | np.ndarray) -> np.ndarray:
    img = tile.image if isinstance(tile, Tile) else np.asarray(tile)
    if img.ndim == 2:
        img = img[:, :, None]
    return img


def extract_object_features(tile: Tile | np.ndarray, object_map: ObjectMap) -> FeatureMatrix:
    """Per-object [mean_1..mean_C, std_1..std_C] in raw intensity units."""
    img = _as_image(tile)
    h, w, c = img.shape
    if object_map.labels.shape != (h, w):
        raise ValueError(f"object map shape {object_map.labels.shape} does not match tile {(h, w)}")
    flat = object_map.labels.ravel()
    n = object_map.n_objects
    cnt = np.bincount(flat, minlength=n).astype(np.float64)
    rows = np.empty((n, 2 * c), dtype=np.float64)
    for k in range(c):
        ch = img[:, :, k].ravel().astype(np.float64)
        s = np.bincount(flat, weights=ch, minlength=n)
        ss = np.bincount(flat, weights=ch * ch, minlength=n)
        mean = s / cnt
        var = np.maximum(ss / cnt - mean * mean, 0.0)
        rows[:, k] = mean
        rows[:, c + k] = np.sqrt(var)
    return FeatureMatrix(rows=rows, standardized=False)


def standardize(features: FeatureMatrix) -> FeatureMatrix:
    """Column z-score; zero-variance columns are set to 0."""
    rows = features.rows
    mu = rows.mean(axis=0)
    sd = rows.std(axis=0)
    zero = sd == 0.0
    out = (rows - mu) / np.where(zero, 1.0, sd)
    out[:, zero] = 0.0
    return FeatureMatrix(rows=out, standardized=True)


def _neighbor_lists(x: np.ndarray, eps: float) -> list[np.ndarray]:
    n = x.shape[0]
    if n < _KDTREE_THRESHOLD:
        sq = np.einsum("ij,ij->i", x, x)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
        np.maximum(d2, 0.0, out=d2)
        within = d2 <= eps * eps
        return [np.flatnonzero(row) for row in within]
    tree = cKDTree(x)
    return [np.sort(np.asarray(lst, dtype=np.int64)) for lst in tree.query_ball_point(x, r=eps)]


def dbscan(features: FeatureMatrix, params: DbscanParams) -> ClusterAssignment:
    """Classic DBSCAN over standardized features.

    Core point: at least min_pts neighbors within eps, counting itself.
    Expansion order is deterministic: seeds scan ascending row index,
    frontier is FIFO, neighbors visit in ascending index order. Border
    points join the first cluster that reaches them; unreachable points
    stay at the NOISE sentinel.
    """
    if not features.standardized:
        raise ValueError("dbscan requires standardized features")
    x = features.rows
    n = x.shape[0]
    nbrs = _neighbor_lists(x, params.eps)
    core = np.fromiter((len(lst) >= params.min_pts for lst in nbrs), dtype=bool, count=n)
    labels = np.full(n, NOISE, dtype=np.int32)
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        frontier: deque[int] = deque([i])
        while frontier:
            p = frontier.popleft()
            if not core[p]:
                continue
            for q in nbrs[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                    frontier.append(int(q))
        cluster += 1
    return ClusterAssignment(labels=labels, core_mask=core, resolved=False)


def resolve_noise(assignment: ClusterAssignment, features: FeatureMatrix) -> ClusterAssignment:
    """Attach each noise object to its nearest core object's cluster.

    With no core objects at all, every noise object becomes its own
    singleton cluster. Labels of non-noise objects never change.
    """
    labels = assignment.labels.copy()
    noise_idx = np.flatnonzero(labels == NOISE)
    if noise_idx.size == 0:
        return ClusterAssignment(labels=labels, core_mask=assignment.core_mask, resolved=True)
    core_idx = np.flatnonzero(assignment.core_mask)
    if core_idx.size:
        x = features.rows
        d2 = ((x[noise_idx][:, None, :] - x[core_idx][None, :, :]) ** 2).sum(axis=2)
        nearest = core_idx[np.argmin(d2, axis=1)]
        labels[noise_idx] = labels[nearest]
    else:
        start = int(labels.max(initial=-1)) + 1
        labels[noise_idx] = start + np.arange(noise_idx.size, dtype=np.int32)
    return ClusterAssignment(labels=labels, core_mask=assignment.core_mask, resolved=True)


def build_cluster_map(object_map: ObjectMap, assignment: ClusterAssignment, domain: int | None = None) -> ClusterMap:
    """Paint cluster ids over a raster: pixel gets assignment[object id].

    The assignment is indexed by global object id, so joint halves look
    up through their index_base into one shared assignment.
    """
    if not assignment.resolved or (assignment.labels == NOISE).any():
        raise ValueError("assignment still carries noise; run resolve_noise first")
    lut = assignment.labels
    hi = object_map.index_base + object_map.n_objects
    if lut.shape[0] < hi:
        raise ValueError(f"assignment covers {lut.shape[0]} objects, map needs {hi}")
    labels = lut[object_map.global_labels].astype(np.int32)
    return ClusterMap(
        labels=labels,
        n_clusters=assignment.n_clusters,
        domain=new_domain_token() if domain is None else domain,
    )


def cluster_tile(
    tile: Tile | np.ndarray,
    slic_params: SlicParams,
    dbscan_params: DbscanParams,
    object_map: ObjectMap | None = None,
) -> ClusterMap:
    """Single-tile pipeline: segment, featurize, cluster, paint."""
    if object_map is None:
        object_map = slic_segment(tile, slic_params)
    feats = standardize(extract_object_features(tile, object_map))
    assignment = resolve_noise(dbscan(feats, dbscan_params), feats)
    return build_cluster_map(object_map, assignment)


def joint_cluster(
    tile_a: Tile | np.ndarray,
    tile_b: Tile | np.ndarray,
    slic_params: SlicParams,
    dbscan_params: DbscanParams,
) -> tuple[ClusterMap, ClusterMap]:
    """Two-tile pipeline with one shared label domain.

    Segments the concatenation, pools both halves' object features,
    clusters once, and paints both maps; identical materials that land
    in one DBSCAN cluster carry the same id in both maps.
    """
    om_a, om_b = slic_segment_joint(tile_a, tile_b, slic_params)
    feats_a = extract_object_features(tile_a, om_a)
    feats_b = extract_object_features(tile_b, om_b)
    pooled = standardize(FeatureMatrix(rows=np.vstack([feats_a.rows, feats_b.rows])))
    assignment = resolve_noise(dbscan(pooled, dbscan_params), pooled)
    token = new_domain_token()
    return (
        build_cluster_map(om_a, assignment, domain=token),
        build_cluster_map(om_b, assignment, domain=token),
    )

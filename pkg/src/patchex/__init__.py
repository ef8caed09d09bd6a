"""patchex: deterministic pseudo-bi-temporal change-detection sample synthesis."""

from .clustering import (
    ClusterAssignment,
    ClusterMap,
    DbscanParams,
    FeatureMatrix,
    NOISE,
    build_cluster_map,
    cluster_tile,
    dbscan,
    extract_object_features,
    joint_cluster,
    resolve_noise,
    standardize,
)
from .config import RunConfig
from .exchange import (
    GridSpec,
    InterPlan,
    IntraPlan,
    LabelDomainError,
    ScaleSchedule,
    SynthSample,
    inter_exchange,
    intra_exchange,
    make_inter_plan,
    make_intra_plan,
)
from .labels import ChangeLabel, CorruptLabelError, decode_label, encode_label, xor_labels
from .manifest import SampleManifestEntry, read_manifest, write_manifest
from .metrics import ConfusionCounts, Metrics, UndefinedMetricsError, accumulate, finalize, metrics_json, pcc_detect
from .pipeline import RunResult, draw_sample_recipe, run_synthesis, synthesize, synthesize_from_seed
from .rng import derive_rng, derive_seed, fisher_yates, mix64, rng_from_seed
from .simulate import SimConfig, simulate, simulate_image
from .slic import ObjectMap, SlicParams, slic_segment, slic_segment_joint
from .synthetic import Material, MosaicSpec, default_materials, gen_mosaic, gen_true_change_pair
from .tiles import DimensionMismatchError, EmptyPoolError, Tile, TilePool, load_pool, load_tile

__version__ = "0.1.0"

"""No-reference quality assessment for tone-mapped HDR images.

Pipeline: decode -> two-scale representation -> truncated pretrained
backbone -> per-channel mean/std pooling -> multi-scale multi-layer
descriptor -> PLSR score. The harness module reproduces the repeated
random-split evaluation protocol with SROCC/PLCC/RMSE medians.
"""

from .aggregation import (
    AggregatedFeatureVector,
    PooledStats,
    concat_layers,
    concat_scales,
    extract_descriptor,
    pool_mean_std,
)
from .backbone import BackboneGraph, FeatureMap, extract_feature_maps, load_graph
from .cache import FeatureCache, cache_features
from .dataset import DatasetManifest, Split, load_manifest, make_split
from .harness import (
    EvaluationReport,
    ExperimentConfig,
    enumerate_layer_combinations,
    layer_search,
    run_experiment,
    sweep_components,
)
from .metrics import median, plcc, rmse, srocc
from .plsr import PLSRModel, fit, predict, select_components
from .tensor_io import (
    ImageTensor,
    MultiScaleRepresentation,
    build_multiscale,
    downsample2x,
    load_image,
    normalize_for_backbone,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatedFeatureVector",
    "BackboneGraph",
    "DatasetManifest",
    "EvaluationReport",
    "ExperimentConfig",
    "FeatureCache",
    "FeatureMap",
    "ImageTensor",
    "MultiScaleRepresentation",
    "PLSRModel",
    "PooledStats",
    "Split",
    "build_multiscale",
    "cache_features",
    "concat_layers",
    "concat_scales",
    "downsample2x",
    "enumerate_layer_combinations",
    "extract_descriptor",
    "extract_feature_maps",
    "fit",
    "layer_search",
    "load_graph",
    "load_image",
    "load_manifest",
    "make_split",
    "median",
    "normalize_for_backbone",
    "plcc",
    "pool_mean_std",
    "predict",
    "rmse",
    "run_experiment",
    "select_components",
    "srocc",
    "sweep_components",
    "__version__",
]

"""Truncated-backbone loading and feature-map extraction.

A model package is a directory holding ``model.onnx`` (dynamic spatial
dims, one named output per tap layer) and ``manifest.json`` describing
tap layers, channel counts, measured output strides, and the
preprocessing constants the graph expects. The graph itself is the
authority on output spatial dims; the runner validates channel counts
against the manifest and never assumes strides.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    GraphExecutionFailureError,
    InputTooSmallError,
    ManifestMismatchError,
    PackageNotFoundError,
    UnsupportedGraphVersionError,
)
from .graph import GraphExecutor, load_model
from .tensor_io import Normalization, NormalizedTensor

GRAPH_FILENAME = "model.onnx"
MANIFEST_FILENAME = "manifest.json"
MANIFEST_VERSION = 1

SCALE_ORIGINAL = "original"
SCALE_HALF = "half"
SCALES = (SCALE_ORIGINAL, SCALE_HALF)

# block-ending layers of the reference backbone, shallow to deep
REFERENCE_TAP_LAYERS = (
    "res2a", "res2b", "res2c",
    "res3a", "res3b", "res3c", "res3d",
    "res4a", "res4b", "res4c", "res4d", "res4e", "res4f",
)


@dataclass(frozen=True)
class FeatureMap:
    """One tap layer's activations at one scale, (H, W, C) float32."""

    layer_id: str
    scale_id: str
    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class BackboneGraph:
    """A loaded model package: executor plus validated manifest facts."""

    tap_layers: tuple
    channels_per_layer: dict
    output_stride_per_layer: dict
    preprocessing: Normalization
    source_checkpoint: str
    executor: GraphExecutor


def _manifest_error(path, msg):
    return ManifestMismatchError(f"{path}: {msg}")


def load_graph(path) -> BackboneGraph:
    """Load and validate a model package directory."""
    pkg = Path(path)
    graph_file = pkg / GRAPH_FILENAME
    manifest_file = pkg / MANIFEST_FILENAME
    if not pkg.is_dir():
        raise PackageNotFoundError(f"model package directory not found: {pkg}")
    if not graph_file.is_file() or not manifest_file.is_file():
        raise PackageNotFoundError(
            f"{pkg}: model package needs {GRAPH_FILENAME} and {MANIFEST_FILENAME}"
        )

    try:
        manifest = json.loads(manifest_file.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise _manifest_error(manifest_file, f"invalid JSON ({exc})") from exc

    version = manifest.get("format_version")
    if version != MANIFEST_VERSION:
        raise UnsupportedGraphVersionError(
            f"{manifest_file}: format_version {version!r} (reader supports {MANIFEST_VERSION})"
        )

    tap_layers = manifest.get("tap_layers")
    if not isinstance(tap_layers, list) or not tap_layers:
        raise _manifest_error(manifest_file, "tap_layers must be a nonempty list")
    if len(set(tap_layers)) != len(tap_layers):
        raise _manifest_error(manifest_file, "tap_layers contains duplicates")

    channels = manifest.get("channels", {})
    strides = manifest.get("output_stride", {})
    for layer in tap_layers:
        if not isinstance(channels.get(layer), int) or channels[layer] <= 0:
            raise _manifest_error(manifest_file, f"channels[{layer!r}] must be a positive int")
        if not isinstance(strides.get(layer), int) or strides[layer] <= 0:
            raise _manifest_error(manifest_file, f"output_stride[{layer!r}] must be a positive int")

    pre = manifest.get("preprocessing", {})
    mean = pre.get("mean")
    scale = pre.get("scale")
    if not (isinstance(mean, list) and isinstance(scale, list) and len(mean) == 3 and len(scale) == 3):
        raise _manifest_error(manifest_file, "preprocessing needs 3 means and 3 scales")

    model = load_model(graph_file)
    executor = GraphExecutor(model.graph)
    declared = set(executor.output_names)
    absent = [layer for layer in tap_layers if layer not in declared]
    if absent:
        raise _manifest_error(
            manifest_file, f"tap layers {absent} are not outputs of the graph"
        )

    return BackboneGraph(
        tap_layers=tuple(tap_layers),
        channels_per_layer={la: channels[la] for la in tap_layers},
        output_stride_per_layer={la: strides[la] for la in tap_layers},
        preprocessing=Normalization(mean=tuple(mean), scale=tuple(scale)),
        source_checkpoint=str(manifest.get("source_checkpoint", "")),
        executor=executor,
    )


def extract_feature_maps(graph: BackboneGraph, tensor: NormalizedTensor, layers, scale_id) -> dict:
    """Run the backbone and return {layer_id: FeatureMap} for the request.

    Every requested layer must be one of the package's tap layers, and
    the input must cover at least one cell of the deepest requested
    layer (spatial dims >= its output stride).
    """
    layers = list(layers)
    unknown = [la for la in layers if la not in graph.tap_layers]
    if unknown:
        raise GraphExecutionFailureError(f"layers {unknown} not in tap layers {graph.tap_layers}")
    if scale_id not in SCALES:
        raise GraphExecutionFailureError(f"scale_id must be one of {SCALES}, got {scale_id!r}")
    h, w = tensor.height, tensor.width
    for layer in layers:
        stride = graph.output_stride_per_layer[layer]
        if h < stride or w < stride:
            raise InputTooSmallError(
                f"layer {layer} needs input of at least {stride}x{stride}, got {h}x{w}"
            )

    image = np.ascontiguousarray(tensor.data.transpose(2, 0, 1))
    unique_layers = list(dict.fromkeys(layers))
    raw = graph.executor.run(image, unique_layers)

    out = {}
    for layer in unique_layers:
        arr = raw[layer]
        expected = graph.channels_per_layer[layer]
        if arr.shape[0] != expected:
            raise ManifestMismatchError(
                f"layer {layer} produced {arr.shape[0]} channels, manifest says {expected}"
            )
        out[layer] = FeatureMap(
            layer_id=layer,
            scale_id=scale_id,
            data=np.ascontiguousarray(arr.transpose(1, 2, 0)),
        )
    return out

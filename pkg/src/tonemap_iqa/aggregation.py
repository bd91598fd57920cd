"""Mean/std pooling and descriptor assembly.

The descriptor layout is canonical and documented: for each layer in
(low, mid, high) order, for each scale in (original, half), all channel
means then all channel stds. Pooled statistics are computed in float64;
descriptors are float32 (the precision the feature cache stores), so a
descriptor assembled from a cache is bit-identical to one extracted
directly.

``pooling_mode`` and ``scales`` narrow the layout for the comparison
modes: mean-only pooling gives the compact 4608-dim layout for the
reference backbone, original-only drops the half scale.
"""

from dataclasses import dataclass

import numpy as np

from .backbone import SCALE_HALF, SCALE_ORIGINAL, BackboneGraph, FeatureMap, extract_feature_maps
from .errors import (
    EmptyFeatureMapError,
    LayerMismatchError,
    ScaleMismatchError,
    WrongSegmentCountError,
)
from .kernels import channel_mean_std
from .tensor_io import MultiScaleRepresentation, normalize_for_backbone

STAT_MEAN = "mean"
STAT_STD = "std"

POOL_MEAN_STD = "mean_std"
POOL_MEAN_ONLY = "mean_only"
POOLING_MODES = (POOL_MEAN_STD, POOL_MEAN_ONLY)

SCALES_DUAL = "dual"
SCALES_ORIGINAL_ONLY = "original_only"
SCALE_MODES = (SCALES_DUAL, SCALES_ORIGINAL_ONLY)


@dataclass(frozen=True)
class PooledStats:
    """Per-channel spatial mean and population std of one feature map."""

    layer_id: str
    scale_id: str
    means: np.ndarray  # float64, length C
    stds: np.ndarray  # float64, length C

    @property
    def channels(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class LayoutBlock:
    """One contiguous block of the flat descriptor."""

    layer_id: str
    scale_id: str
    statistic: str
    start: int
    stop: int


@dataclass(frozen=True)
class LayerSegment:
    """All statistics of one layer, scales concatenated; float32."""

    layer_id: str
    values: np.ndarray
    blocks: tuple  # of (scale_id, statistic, channels)


@dataclass(frozen=True)
class AggregatedFeatureVector:
    """The flat multi-scale multi-layer descriptor with its layout."""

    values: np.ndarray  # float32
    layout: tuple  # of LayoutBlock

    @property
    def length(self) -> int:
        return len(self.values)

    def block(self, layer_id: str, scale_id: str, statistic: str) -> np.ndarray:
        """Slice one (layer, scale, statistic) block back out, exactly."""
        for lb in self.layout:
            if (lb.layer_id, lb.scale_id, lb.statistic) == (layer_id, scale_id, statistic):
                return self.values[lb.start : lb.stop]
        raise KeyError(f"no block ({layer_id}, {scale_id}, {statistic}) in layout")


def pool_mean_std(fm: FeatureMap) -> PooledStats:
    """Collapse each channel to its spatial mean and population std (divisor N)."""
    if fm.data.size == 0:
        raise EmptyFeatureMapError(f"feature map {fm.layer_id}/{fm.scale_id} is empty")
    means, stds = channel_mean_std(fm.data)
    return PooledStats(layer_id=fm.layer_id, scale_id=fm.scale_id, means=means, stds=stds)


def _stat_blocks(stats_by_scale, pooling_mode, scales):
    scale_ids = (SCALE_ORIGINAL, SCALE_HALF) if scales == SCALES_DUAL else (SCALE_ORIGINAL,)
    statistics = (STAT_MEAN, STAT_STD) if pooling_mode == POOL_MEAN_STD else (STAT_MEAN,)
    for scale_id in scale_ids:
        ps = stats_by_scale[scale_id]
        for stat in statistics:
            yield scale_id, stat, ps.means if stat == STAT_MEAN else ps.stds


def build_layer_segment(stats_by_scale: dict, pooling_mode=POOL_MEAN_STD, scales=SCALES_DUAL) -> LayerSegment:
    """Assemble one layer's segment from its per-scale PooledStats."""
    parts = []
    blocks = []
    layer_id = stats_by_scale[SCALE_ORIGINAL].layer_id
    for scale_id, stat, vec in _stat_blocks(stats_by_scale, pooling_mode, scales):
        parts.append(vec.astype(np.float32))
        blocks.append((scale_id, stat, len(vec)))
    return LayerSegment(layer_id=layer_id, values=np.concatenate(parts), blocks=tuple(blocks))


def concat_scales(o: PooledStats, d: PooledStats) -> LayerSegment:
    """Concatenate one layer's two scales: [o.means, o.stds, d.means, d.stds]."""
    if o.scale_id != SCALE_ORIGINAL or d.scale_id != SCALE_HALF:
        raise ScaleMismatchError(
            f"expected ({SCALE_ORIGINAL}, {SCALE_HALF}), got ({o.scale_id}, {d.scale_id})"
        )
    if o.layer_id != d.layer_id:
        raise LayerMismatchError(f"layer mismatch: {o.layer_id} vs {d.layer_id}")
    if o.channels != d.channels:
        raise LayerMismatchError(
            f"channel mismatch for {o.layer_id}: {o.channels} vs {d.channels}"
        )
    return build_layer_segment({SCALE_ORIGINAL: o, SCALE_HALF: d})


def concat_layers(segments) -> AggregatedFeatureVector:
    """Concatenate the (low, mid, high) segments into the final descriptor."""
    segments = list(segments)
    if len(segments) != 3:
        raise WrongSegmentCountError(f"expected 3 layer segments, got {len(segments)}")
    layout = []
    offset = 0
    for seg in segments:
        for scale_id, stat, n in seg.blocks:
            layout.append(
                LayoutBlock(
                    layer_id=seg.layer_id,
                    scale_id=scale_id,
                    statistic=stat,
                    start=offset,
                    stop=offset + n,
                )
            )
            offset += n
    values = np.concatenate([seg.values for seg in segments])
    return AggregatedFeatureVector(values=values, layout=tuple(layout))


def pool_image(graph: BackboneGraph, msr: MultiScaleRepresentation, layers) -> dict:
    """Pooled stats for the given layers at both scales: {layer: {scale: PooledStats}}."""
    unique_layers = list(dict.fromkeys(layers))
    stats = {layer: {} for layer in unique_layers}
    for scale_id, img in ((SCALE_ORIGINAL, msr.original), (SCALE_HALF, msr.downsampled)):
        tensor = normalize_for_backbone(img, graph.preprocessing)
        maps = extract_feature_maps(graph, tensor, unique_layers, scale_id)
        for layer, fm in maps.items():
            stats[layer][scale_id] = pool_mean_std(fm)
    return stats


def extract_descriptor(
    graph: BackboneGraph,
    msr: MultiScaleRepresentation,
    layers,
    pooling_mode=POOL_MEAN_STD,
    scales=SCALES_DUAL,
) -> AggregatedFeatureVector:
    """Full pipeline for one image: normalize, run both scales, pool, concatenate.

    ``layers`` is the (low, mid, high) triple; repeats are evaluated once
    but appear once per slot in the descriptor.
    """
    if len(layers) != 3:
        raise WrongSegmentCountError(f"expected 3 layers (low, mid, high), got {len(layers)}")
    stats = pool_image(graph, msr, layers)
    segments = [build_layer_segment(stats[layer], pooling_mode, scales) for layer in layers]
    return concat_layers(segments)


def descriptor_length(channel_counts, pooling_mode=POOL_MEAN_STD, scales=SCALES_DUAL) -> int:
    """Descriptor length for the given per-layer channel counts and modes."""
    per_channel = (2 if pooling_mode == POOL_MEAN_STD else 1) * (2 if scales == SCALES_DUAL else 1)
    return sum(channel_counts) * per_channel

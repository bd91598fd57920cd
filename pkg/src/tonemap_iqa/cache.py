"""Pooled-feature cache: compute once, reuse for searches and sweeps.

Binary format (all little-endian):

    magic "TMQF", u32 version, u32 n_images, u32 n_layers,
    n_layers x (u32 length, UTF-8 layer name),
    then per image:
        u32 length, UTF-8 image path,
        per layer (table order), per scale (original, half):
            u32 channel count, C float32 means, C float32 stds

Stats are stored as float32; descriptors assembled from a cache are
bit-identical to directly extracted ones because direct assembly also
rounds to float32 (see aggregation module notes). Files are written to
a temp path and renamed into place; a fully written cache supports any
number of concurrent readers.
"""

import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .aggregation import (
    POOL_MEAN_STD,
    SCALES_DUAL,
    build_layer_segment,
    concat_layers,
    pool_image,
    PooledStats,
)
from .backbone import SCALE_HALF, SCALE_ORIGINAL, BackboneGraph
from .dataset import DatasetManifest
from .errors import CacheFormatError, IncompleteCacheError, TonemapIqaError
from .tensor_io import build_multiscale, load_image

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"TMQF"
CACHE_VERSION = 1
_SCALE_ORDER = (SCALE_ORIGINAL, SCALE_HALF)


def _write_str(fh, text: str) -> None:
    raw = text.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.off = 0

    def unpack(self, fmt):
        vals = struct.unpack_from(fmt, self.blob, self.off)
        self.off += struct.calcsize(fmt)
        return vals

    def read_str(self) -> str:
        (n,) = self.unpack("<I")
        raw = self.blob[self.off : self.off + n]
        if len(raw) != n:
            raise CacheFormatError("truncated string")
        self.off += n
        return raw.decode("utf-8")

    def read_f32(self, count) -> np.ndarray:
        arr = np.frombuffer(self.blob, dtype="<f4", count=count, offset=self.off)
        if len(arr) != count:
            raise CacheFormatError("truncated float block")
        self.off += 4 * count
        return arr.copy()


class FeatureCache:
    """Per-image, per-layer, per-scale pooled stats (float32)."""

    def __init__(self, layer_names):
        self.layer_names = tuple(layer_names)
        self._stats = {}  # path -> {layer: {scale: (means, stds)}}

    def __len__(self) -> int:
        return len(self._stats)

    @property
    def image_paths(self) -> tuple:
        return tuple(self._stats)

    def add(self, image_path: str, pooled: dict) -> None:
        """Store {layer: {scale: PooledStats}} for one image, rounded to float32."""
        record = {}
        for layer in self.layer_names:
            per_scale = {}
            for scale in _SCALE_ORDER:
                ps = pooled[layer][scale]
                per_scale[scale] = (
                    ps.means.astype(np.float32),
                    ps.stds.astype(np.float32),
                )
            record[layer] = per_scale
        self._stats[image_path] = record

    def stats(self, image_path: str, layer: str, scale: str) -> PooledStats:
        """PooledStats view of one stored block (float32 precision)."""
        means, stds = self._stats[image_path][layer][scale]
        return PooledStats(layer_id=layer, scale_id=scale, means=means, stds=stds)

    def has_layers(self, layers) -> bool:
        return all(layer in self.layer_names for layer in layers)

    def descriptor(self, image_path: str, layers, pooling_mode=POOL_MEAN_STD, scales=SCALES_DUAL):
        """Assemble one image's descriptor from cached stats."""
        if image_path not in self._stats:
            raise IncompleteCacheError(f"image not in cache: {image_path}")
        missing = [la for la in layers if la not in self.layer_names]
        if missing:
            raise IncompleteCacheError(f"cache lacks layers {missing}")
        segments = [
            build_layer_segment(
                {scale: self.stats(image_path, layer, scale) for scale in _SCALE_ORDER},
                pooling_mode,
                scales,
            )
            for layer in layers
        ]
        return concat_layers(segments)

    def matrix(self, image_paths, layers, pooling_mode=POOL_MEAN_STD, scales=SCALES_DUAL):
        """Stack descriptors for the given paths into an (N, l) float32 matrix."""
        rows = [self.descriptor(p, layers, pooling_mode, scales).values for p in image_paths]
        return np.stack(rows) if rows else np.zeros((0, 0), dtype=np.float32)

    def write(self, path) -> None:
        """Serialize to the TMQF format atomically (temp file + rename)."""
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(CACHE_MAGIC)
            fh.write(struct.pack("<III", CACHE_VERSION, len(self._stats), len(self.layer_names)))
            for name in self.layer_names:
                _write_str(fh, name)
            for image_path, record in self._stats.items():
                _write_str(fh, image_path)
                for layer in self.layer_names:
                    for scale in _SCALE_ORDER:
                        means, stds = record[layer][scale]
                        fh.write(struct.pack("<I", len(means)))
                        fh.write(means.astype("<f4").tobytes())
                        fh.write(stds.astype("<f4").tobytes())
        os.replace(tmp, path)

    @classmethod
    def read(cls, path) -> "FeatureCache":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != CACHE_MAGIC:
            raise CacheFormatError(f"{path}: bad magic, not a feature cache")
        r = _Reader(blob)
        r.off = 4
        version, n_images, n_layers = r.unpack("<III")
        if version != CACHE_VERSION:
            raise CacheFormatError(f"{path}: unsupported cache version {version}")
        layer_names = [r.read_str() for _ in range(n_layers)]
        cache = cls(layer_names)
        for _ in range(n_images):
            image_path = r.read_str()
            record = {}
            for layer in layer_names:
                per_scale = {}
                for scale in _SCALE_ORDER:
                    (channels,) = r.unpack("<I")
                    means = r.read_f32(channels)
                    stds = r.read_f32(channels)
                    per_scale[scale] = (means, stds)
                record[layer] = per_scale
            cache._stats[image_path] = record
        return cache


def cache_features(manifest: DatasetManifest, graph: BackboneGraph, layers=None, jobs: int = 1):
    """Pool every manifest image through the backbone.

    Failed decodes/extractions are skipped with a warning and reported in
    the returned list; results land in manifest order regardless of the
    worker count. Returns (FeatureCache, [(path, reason), ...]).
    """
    layer_names = tuple(layers) if layers else graph.tap_layers
    cache = FeatureCache(layer_names)
    skipped = []

    def one(entry):
        msr = build_multiscale(load_image(entry.image_path))
        return pool_image(graph, msr, layer_names)

    def safe(entry):
        try:
            return one(entry), None
        except (TonemapIqaError, OSError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(safe, manifest.entries))
    else:
        results = [safe(e) for e in manifest.entries]

    for entry, (pooled, err) in zip(manifest.entries, results):
        if err is not None:
            logger.warning("skipping %s (%s)", entry.image_path, err)
            skipped.append((entry.image_path, err))
        else:
            cache.add(entry.image_path, pooled)
    return cache, skipped

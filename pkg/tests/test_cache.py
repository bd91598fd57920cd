"""Feature-cache serialization and cache-vs-direct descriptor parity."""

import struct

import numpy as np
import pytest

from tonemap_iqa.aggregation import extract_descriptor
from tonemap_iqa.cache import FeatureCache, cache_features
from tonemap_iqa.dataset import DatasetEntry, DatasetManifest
from tonemap_iqa.errors import CacheFormatError, IncompleteCacheError
from tonemap_iqa.tensor_io import build_multiscale, load_image


@pytest.fixture(scope="module")
def tri_cache(tri_manifest, tiny_graph):
    cache, skipped = cache_features(tri_manifest, tiny_graph)
    assert skipped == []
    return cache


def test_cache_record_counts(tri_cache, tri_manifest):
    assert len(tri_cache) == 3
    assert tri_cache.layer_names == ("t1", "t2")
    for entry in tri_manifest.entries:
        for layer, channels in (("t1", 4), ("t2", 8)):
            for scale in ("original", "half"):
                ps = tri_cache.stats(entry.image_path, layer, scale)
                assert ps.channels == channels
                assert ps.means.dtype == np.float32


def test_cache_roundtrip_bit_identical(tri_cache, tmp_path):
    path = tmp_path / "f.tmqf"
    tri_cache.write(path)
    loaded = FeatureCache.read(path)
    assert loaded.layer_names == tri_cache.layer_names
    assert loaded.image_paths == tri_cache.image_paths
    for image_path in tri_cache.image_paths:
        for layer in ("t1", "t2"):
            for scale in ("original", "half"):
                a = tri_cache.stats(image_path, layer, scale)
                b = loaded.stats(image_path, layer, scale)
                assert np.array_equal(a.means, b.means)
                assert np.array_equal(a.stds, b.stds)


def test_cache_file_layout(tri_cache, tmp_path):
    path = tmp_path / "f.tmqf"
    tri_cache.write(path)
    raw = path.read_bytes()
    assert raw[:4] == b"TMQF"
    version, n_images, n_layers = struct.unpack_from("<III", raw, 4)
    assert (version, n_images, n_layers) == (1, 3, 2)
    (name_len,) = struct.unpack_from("<I", raw, 16)
    assert raw[20 : 20 + name_len].decode() == "t1"


def test_cache_assembled_descriptor_equals_direct(tri_cache, tri_manifest, tiny_graph):
    layers = ("t1", "t2", "t2")
    for entry in tri_manifest.entries:
        direct = extract_descriptor(
            tiny_graph, build_multiscale(load_image(entry.image_path)), layers
        )
        assembled = tri_cache.descriptor(entry.image_path, layers)
        assert np.array_equal(assembled.values, direct.values)
        assert assembled.layout == direct.layout


def test_cache_matrix_shape(tri_cache, tri_manifest):
    paths = [e.image_path for e in tri_manifest.entries]
    X = tri_cache.matrix(paths, ("t1", "t2", "t2"))
    assert X.shape == (3, 80)
    assert X.dtype == np.float32


def test_cache_missing_layer_and_image(tri_cache):
    with pytest.raises(IncompleteCacheError):
        tri_cache.descriptor(tri_cache.image_paths[0], ("t1", "t9", "t2"))
    with pytest.raises(IncompleteCacheError):
        tri_cache.descriptor("no_such.png", ("t1", "t2", "t2"))


def test_cache_read_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.tmqf"
    bad.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(CacheFormatError):
        FeatureCache.read(bad)


def test_cache_read_rejects_unknown_version(tri_cache, tmp_path):
    path = tmp_path / "f.tmqf"
    tri_cache.write(path)
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheFormatError):
        FeatureCache.read(path)


def test_cache_features_skips_bad_images(tri_manifest, tiny_graph, caplog):
    entries = list(tri_manifest.entries) + [
        DatasetEntry(image_path="missing.png", mos=50.0, category="TM", scene_id="x")
    ]
    manifest = DatasetManifest(entries=tuple(entries))
    with caplog.at_level("WARNING"):
        cache, skipped = cache_features(manifest, tiny_graph)
    assert len(cache) == 3
    assert len(skipped) == 1 and skipped[0][0] == "missing.png"
    assert any("missing.png" in r.message for r in caplog.records)


def test_cache_features_parallel_matches_serial(tri_manifest, tiny_graph, tmp_path):
    serial, _ = cache_features(tri_manifest, tiny_graph)
    parallel, _ = cache_features(tri_manifest, tiny_graph, jobs=4)
    a, b = tmp_path / "a.tmqf", tmp_path / "b.tmqf"
    serial.write(a)
    parallel.write(b)
    assert a.read_bytes() == b.read_bytes()

"""Shared fixtures: the checked-in fixture backbone and a synthetic
blur/contrast-graded dataset used by harness, CLI, and acceptance tests.
"""

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from tonemap_iqa.backbone import load_graph
from tonemap_iqa.cache import cache_features
from tonemap_iqa.dataset import load_manifest

FIXTURES = Path(__file__).resolve().parent / "fixtures"

N_SCENES = 10
N_LEVELS = 6
IMAGE_SIDE = 96
CATEGORIES = ("TM", "MEF", "PP")


def scene_field(rng, h, w):
    """Smooth procedural scene: a few random sinusoidal plaids per channel."""
    yy, xx = np.mgrid[0:h, 0:w] / float(max(h, w))
    img = np.zeros((h, w, 3))
    for _ in range(5):
        fx, fy = rng.uniform(0.5, 4.0, size=2)
        amp = rng.uniform(0.3, 1.0)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
        for c in range(3):
            img[:, :, c] += amp * np.sin(2.0 * np.pi * (fx * xx + fy * yy) + phase[c])
    img -= img.min()
    img /= img.max() or 1.0
    return 0.15 + 0.7 * img


def box_blur(img, times):
    h, w = img.shape[:2]
    for _ in range(times):
        padded = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
        img = sum(
            padded[dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)
        ) / 9.0
    return img


def distort(img, level):
    """Graded quality loss: repeated box blur plus contrast compression."""
    out = box_blur(img, level)
    return 0.5 + (out - 0.5) * (1.0 - 0.12 * level)


def synth_mos(scene, level):
    return 88.0 - 13.0 * level + 0.4 * scene


def build_synthetic_dataset(root: Path):
    """Write N_SCENES x N_LEVELS PNGs plus a manifest CSV; returns its path."""
    root.mkdir(parents=True, exist_ok=True)
    rows = ["image_path,mos,category,scene_id"]
    for scene in range(N_SCENES):
        rng = np.random.Generator(np.random.Philox(1000 + scene))
        base = scene_field(rng, IMAGE_SIDE, IMAGE_SIDE)
        for level in range(N_LEVELS):
            img = distort(base, level)
            path = root / f"scene{scene:02d}_l{level}.png"
            Image.fromarray((img * 255.0).round().astype(np.uint8), "RGB").save(path)
            rows.append(
                f"{path},{synth_mos(scene, level)},{CATEGORIES[scene % 3]},scene{scene:02d}"
            )
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n", "utf-8")
    return manifest


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def tiny_graph():
    return load_graph(FIXTURES / "tiny_backbone")


@pytest.fixture(scope="session")
def synth_manifest_path(tmp_path_factory):
    return build_synthetic_dataset(tmp_path_factory.mktemp("synth_dataset"))


@pytest.fixture(scope="session")
def synth_manifest(synth_manifest_path):
    return load_manifest(synth_manifest_path)


@pytest.fixture(scope="session")
def synth_cache(synth_manifest, tiny_graph):
    cache, skipped = cache_features(synth_manifest, tiny_graph)
    assert not skipped
    return cache


@pytest.fixture(scope="session")
def tri_manifest_path(tmp_path_factory):
    """Three small images with one bad row appended separately by tests."""
    root = tmp_path_factory.mktemp("tri_dataset")
    rows = ["image_path,mos,category,scene_id"]
    for i in range(3):
        rng = np.random.Generator(np.random.Philox(7 + i))
        img = scene_field(rng, 64, 64)
        path = root / f"img{i}.png"
        Image.fromarray((img * 255.0).round().astype(np.uint8), "RGB").save(path)
        rows.append(f"{path},{20.0 + 25.0 * i},TM,")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n", "utf-8")
    return manifest


@pytest.fixture(scope="session")
def tri_manifest(tri_manifest_path):
    return load_manifest(tri_manifest_path)

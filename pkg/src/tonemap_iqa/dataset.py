"""Dataset manifest loading and scene-grouped random splitting.

Manifest CSV header: ``image_path,mos,category,scene_id``. Categories
are TM (tone mapping), MEF (multi-exposure fusion), PP (post
processing). Rows without a scene_id fall back to the image path stem,
i.e. each image becomes its own group, and a warning is logged because
scene isolation then degrades to per-image splitting.

Splits are group-atomic: a scene never straddles train/validation/test.
Shuffling uses numpy's Philox counter-based generator keyed by the
split seed, over lexicographically sorted scene ids, so a given seed
produces the same split on every platform and thread count.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicatePathError,
    InvalidCategoryError,
    MissingColumnError,
    MosOutOfRangeError,
    TooFewGroupsError,
)

logger = logging.getLogger(__name__)

CATEGORIES = ("TM", "MEF", "PP")
REQUIRED_COLUMNS = ("image_path", "mos", "category", "scene_id")

TEST_FRACTION = 0.2
VALIDATION_FRACTION = 0.2
MIN_GROUPS = 5


@dataclass(frozen=True)
class DatasetEntry:
    image_path: str
    mos: float
    category: str
    scene_id: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def categories(self) -> tuple:
        present = {e.category for e in self.entries}
        return tuple(c for c in CATEGORIES if c in present)


@dataclass(frozen=True)
class Split:
    """Disjoint index lists into a manifest's entries."""

    train: tuple
    validation: tuple
    test: tuple
    seed: int


def load_manifest(path) -> DatasetManifest:
    """Read and validate a manifest CSV."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing columns {missing}")
        entries = []
        seen = set()
        fallback_groups = 0
        for idx, row in enumerate(reader):
            image_path = (row["image_path"] or "").strip()
            if not image_path:
                raise MissingColumnError(f"{path}: row {idx}: empty image_path")
            if image_path in seen:
                raise DuplicatePathError(f"{path}: row {idx}: duplicate path {image_path}")
            seen.add(image_path)
            try:
                mos = float(row["mos"])
            except (TypeError, ValueError):
                raise MosOutOfRangeError(f"{path}: row {idx}: mos {row['mos']!r} is not a number")
            if not 0.0 <= mos <= 100.0:
                raise MosOutOfRangeError(f"{path}: row {idx}: mos {mos} outside [0, 100]")
            category = (row["category"] or "").strip()
            if category not in CATEGORIES:
                raise InvalidCategoryError(
                    f"{path}: row {idx}: category {category!r} not in {CATEGORIES}"
                )
            scene_id = (row["scene_id"] or "").strip()
            if not scene_id:
                scene_id = Path(image_path).stem
                fallback_groups += 1
            entries.append(
                DatasetEntry(image_path=image_path, mos=mos, category=category, scene_id=scene_id)
            )
    if fallback_groups:
        logger.warning(
            "%s: %d rows lack scene_id; those images form singleton groups and "
            "scene isolation degrades to per-image splitting for them",
            path,
            fallback_groups,
        )
    return DatasetManifest(entries=tuple(entries))


def _greedy_fill(group_order, group_indices, target_count):
    """Take whole groups from the front until their entry count reaches target."""
    taken = []
    count = 0
    cursor = 0
    while cursor < len(group_order) and count < target_count:
        g = group_order[cursor]
        taken.extend(group_indices[g])
        count += len(group_indices[g])
        cursor += 1
    return taken, group_order[cursor:]


def make_split(manifest: DatasetManifest, seed: int, with_validation: bool = False) -> Split:
    """Group-aware 4:1 split; optionally carve 20% of training as validation.

    Scene groups are shuffled with Philox(seed) and assigned greedily to
    test until it holds at least 20% of all entries; with validation, the
    remaining groups fill validation to at least 20% of what is left.
    """
    group_indices = {}
    for i, entry in enumerate(manifest.entries):
        group_indices.setdefault(entry.scene_id, []).append(i)
    groups = sorted(group_indices)
    if len(groups) < MIN_GROUPS:
        raise TooFewGroupsError(f"need at least {MIN_GROUPS} scene groups, got {len(groups)}")

    rng = np.random.Generator(np.random.Philox(seed))
    order = [groups[i] for i in rng.permutation(len(groups))]

    total = len(manifest.entries)
    test, rest = _greedy_fill(order, group_indices, TEST_FRACTION * total)
    if with_validation:
        remaining = total - len(test)
        validation, rest = _greedy_fill(rest, group_indices, VALIDATION_FRACTION * remaining)
    else:
        validation = []
    train = [i for g in rest for i in group_indices[g]]
    return Split(
        train=tuple(sorted(train)),
        validation=tuple(sorted(validation)),
        test=tuple(sorted(test)),
        seed=seed,
    )

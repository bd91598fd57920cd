"""Repeated-split experiments, layer-combination search, component sweep.

Every run r of an experiment uses split seed ``base_seed + r``, so a
report is fully determined by (config, manifest, cache) regardless of
worker count. Runs abort the experiment on failure; only per-category
metrics may be null in a run (category absent from the test partition
or degenerate), and medians skip nulls.
"""

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics, plsr
from .aggregation import POOL_MEAN_STD, POOLING_MODES, SCALE_MODES, SCALES_DUAL
from .cache import FeatureCache
from .dataset import DatasetManifest, make_split
from .errors import IncompleteCacheError
from .plsr import select_components

logger = logging.getLogger(__name__)

# the four depth sets of block-ending layers; a combination picks three
# sets and one layer from each, ordered shallow to deep
LAYER_DEPTH_SETS = (
    ("res2a", "res2b", "res2c"),
    ("res3a", "res3b", "res3c", "res3d"),
    ("res4a", "res4b", "res4c"),
    ("res4d", "res4e", "res4f"),
)

DEFAULT_LAYERS = ("res2a", "res4b", "res4f")
DEFAULT_COMPONENTS = 15
DEFAULT_SWEEP_RANGE = (10, 20)


@dataclass(frozen=True)
class MetricTriple:
    srocc: float
    plcc: float
    rmse: float

    def to_dict(self) -> dict:
        return {"srocc": self.srocc, "plcc": self.plcc, "rmse": self.rmse}


@dataclass(frozen=True)
class ExperimentConfig:
    layers: tuple = DEFAULT_LAYERS
    n_components: int | None = DEFAULT_COMPONENTS
    sweep_range: tuple | None = None  # (lo, hi) selects k on validation
    n_runs: int = 1
    base_seed: int = 0
    pooling_mode: str = POOL_MEAN_STD
    scales: str = SCALES_DUAL
    logistic_map: bool = False

    def __post_init__(self):
        if len(self.layers) != 3:
            raise ValueError(f"layers must be a (low, mid, high) triple, got {self.layers}")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if self.pooling_mode not in POOLING_MODES:
            raise ValueError(f"pooling_mode must be one of {POOLING_MODES}")
        if self.scales not in SCALE_MODES:
            raise ValueError(f"scales must be one of {SCALE_MODES}")
        if self.sweep_range is None and self.n_components is None:
            raise ValueError("need n_components or sweep_range")

    def to_dict(self) -> dict:
        return {
            "layers": list(self.layers),
            "n_components": self.n_components,
            "sweep_range": list(self.sweep_range) if self.sweep_range else None,
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "pooling_mode": self.pooling_mode,
            "scales": self.scales,
            "logistic_map": self.logistic_map,
        }


@dataclass(frozen=True)
class RunResult:
    seed: int
    n_components: int
    overall: MetricTriple
    per_category: dict  # category -> MetricTriple | None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_components": self.n_components,
            "overall": self.overall.to_dict(),
            "per_category": {
                cat: (t.to_dict() if t is not None else None)
                for cat, t in self.per_category.items()
            },
        }


@dataclass(frozen=True)
class EvaluationReport:
    config: ExperimentConfig
    per_run: tuple
    medians: dict
    elapsed_seconds: float = field(compare=False, default=0.0)

    def to_dict(self) -> dict:
        """JSON-ready dict; deliberately excludes timing so identical
        invocations serialize byte-identically."""
        return {
            "config": self.config.to_dict(),
            "per_run": [r.to_dict() for r in self.per_run],
            "medians": self.medians,
        }


def _triple(pred, mos, logistic_map=False) -> MetricTriple:
    mapped = metrics.logistic_remap(pred, mos) if logistic_map else pred
    return MetricTriple(
        srocc=metrics.srocc(pred, mos),
        plcc=metrics.plcc(mapped, mos),
        rmse=metrics.rmse(mapped, mos),
    )


def _category_triple(pred, mos, mask, logistic_map) -> MetricTriple | None:
    if mask.sum() < 2:
        return None
    p, m = pred[mask], mos[mask]
    if np.all(p == p[0]) or np.all(m == m[0]):
        return None
    return _triple(p, m, logistic_map)


def _median_triple(triples) -> dict | None:
    values = [t for t in triples if t is not None]
    if not values:
        return None
    return {
        "srocc": metrics.median([t.srocc for t in values]),
        "plcc": metrics.median([t.plcc for t in values]),
        "rmse": metrics.median([t.rmse for t in values]),
    }


def run_experiment(
    config: ExperimentConfig,
    manifest: DatasetManifest,
    cache: FeatureCache,
    jobs: int = 1,
) -> EvaluationReport:
    """The full protocol: n_runs splits, fit, predict, metrics, medians."""
    started = time.perf_counter()
    paths = [e.image_path for e in manifest.entries]
    X_all = cache.matrix(paths, config.layers, config.pooling_mode, config.scales)
    y_all = np.array([e.mos for e in manifest.entries])
    cat_all = np.array([e.category for e in manifest.entries])
    categories = manifest.categories

    def run_one(r: int) -> RunResult:
        seed = config.base_seed + r
        split = make_split(manifest, seed, with_validation=config.sweep_range is not None)
        tr = np.asarray(split.train, dtype=np.intp)
        te = np.asarray(split.test, dtype=np.intp)
        if config.sweep_range is not None:
            va = np.asarray(split.validation, dtype=np.intp)
            k, _ = select_components(
                X_all[tr], y_all[tr], X_all[va], y_all[va], k_range=config.sweep_range
            )
        else:
            k = config.n_components
        model = plsr.fit(X_all[tr], y_all[tr], k)
        pred = plsr.predict(model, X_all[te])
        overall = _triple(pred, y_all[te], config.logistic_map)
        per_category = {
            cat: _category_triple(pred, y_all[te], cat_all[te] == cat, config.logistic_map)
            for cat in categories
        }
        return RunResult(
            seed=seed, n_components=model.n_components, overall=overall, per_category=per_category
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_run = tuple(pool.map(run_one, range(config.n_runs)))
    else:
        per_run = tuple(run_one(r) for r in range(config.n_runs))

    medians = {
        "overall": _median_triple([r.overall for r in per_run]),
        "per_category": {
            cat: _median_triple([r.per_category[cat] for r in per_run]) for cat in categories
        },
    }
    return EvaluationReport(
        config=config,
        per_run=per_run,
        medians=medians,
        elapsed_seconds=time.perf_counter() - started,
    )


def enumerate_layer_combinations(depth_sets=LAYER_DEPTH_SETS) -> list:
    """All (low, mid, high) combinations: three of the four depth sets,
    one layer per chosen set, ordered shallow to deep."""
    combos = []
    for chosen in itertools.combinations(range(len(depth_sets)), 3):
        combos.extend(itertools.product(*(depth_sets[i] for i in chosen)))
    return combos


def layer_search(
    manifest: DatasetManifest,
    cache: FeatureCache,
    base_seed: int,
    n_runs: int,
    n_components: int = DEFAULT_COMPONENTS,
    pooling_mode: str = POOL_MEAN_STD,
    scales: str = SCALES_DUAL,
    jobs: int = 1,
) -> list:
    """Rank every layer combination by median validation SROCC.

    Returns [(combination, median_validation_srocc), ...] sorted best
    first, ties broken by lexicographic combination name. All
    combinations share the same per-run splits (seed = base_seed + r).
    """
    required = [layer for depth_set in LAYER_DEPTH_SETS for layer in depth_set]
    if not cache.has_layers(required):
        missing = [la for la in required if la not in cache.layer_names]
        raise IncompleteCacheError(
            f"insufficient layer sets: cache lacks {missing} of the {len(required)} search layers"
        )
    paths = [e.image_path for e in manifest.entries]
    y_all = np.array([e.mos for e in manifest.entries])
    splits = [make_split(manifest, base_seed + r, with_validation=True) for r in range(n_runs)]

    def eval_combo(combo):
        X_all = cache.matrix(paths, combo, pooling_mode, scales)
        sroccs = []
        for split in splits:
            tr = np.asarray(split.train, dtype=np.intp)
            va = np.asarray(split.validation, dtype=np.intp)
            k = min(n_components, len(tr) - 1, X_all.shape[1])
            if k < n_components:
                logger.warning("combo %s: k clipped to %d", "/".join(combo), k)
            model = plsr.fit(X_all[tr], y_all[tr], k)
            pred = plsr.predict(model, X_all[va])
            sroccs.append(metrics.srocc(pred, y_all[va]))
        return metrics.median(sroccs)

    combos = enumerate_layer_combinations()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            medians = list(pool.map(eval_combo, combos))
    else:
        medians = [eval_combo(c) for c in combos]
    ranked = sorted(zip(combos, medians), key=lambda cm: (-cm[1], cm[0]))
    return ranked


def sweep_components(
    manifest: DatasetManifest,
    cache: FeatureCache,
    layers,
    base_seed: int,
    n_runs: int = 1,
    k_range=DEFAULT_SWEEP_RANGE,
    pooling_mode: str = POOL_MEAN_STD,
    scales: str = SCALES_DUAL,
):
    """Median validation SROCC per component count over repeated splits.

    Returns (best_k, [(k, median_validation_srocc), ...]); ties break
    toward smaller k.
    """
    paths = [e.image_path for e in manifest.entries]
    X_all = cache.matrix(paths, layers, pooling_mode, scales)
    y_all = np.array([e.mos for e in manifest.entries])
    per_k = {}
    for r in range(n_runs):
        split = make_split(manifest, base_seed + r, with_validation=True)
        tr = np.asarray(split.train, dtype=np.intp)
        va = np.asarray(split.validation, dtype=np.intp)
        _, table = select_components(
            X_all[tr], y_all[tr], X_all[va], y_all[va], k_range=k_range
        )
        for k, value in table:
            per_k.setdefault(k, []).append(value)
    rows = [
        (k, metrics.median(values))
        for k, values in sorted(per_k.items())
        if len(values) == n_runs
    ]
    if not rows:
        raise IncompleteCacheError("no component count evaluable on every run")
    best_k, _ = max(rows, key=lambda kv: (kv[1], -kv[0]))
    return best_k, rows

"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/model error, 3 internal
error. Machine-readable results go to stdout, diagnostics to stderr.
All randomness flows from --seed; given identical flags every command
writes identical bytes (guarded by --force for existing outputs).
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, harness, plsr
from .aggregation import (
    POOL_MEAN_ONLY,
    POOL_MEAN_STD,
    SCALES_DUAL,
    SCALES_ORIGINAL_ONLY,
)
from .backbone import load_graph
from .cache import FeatureCache, cache_features
from .dataset import load_manifest, make_split
from .errors import TonemapIqaError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

CACHE_DIR_ENV = "TONEMAP_IQA_CACHE_DIR"
DEFAULT_CACHE_NAME = "features.tmqf"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this CLI reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_layers(text: str):
    layers = tuple(part.strip() for part in text.split(",") if part.strip())
    if len(layers) != 3:
        raise TonemapIqaError(f"--layers needs three comma-separated names, got {text!r}")
    return layers


def _parse_sweep(text: str):
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError:
        raise TonemapIqaError(f"--sweep must look like LO:HI, got {text!r}")
    if lo < 1 or hi < lo:
        raise TonemapIqaError(f"--sweep range [{lo}, {hi}] is not a valid range")
    return lo, hi


def _default_cache_path():
    return str(Path(os.environ.get(CACHE_DIR_ENV, ".")) / DEFAULT_CACHE_NAME)


def _guard_output(path, force: bool, what: str):
    if Path(path).exists() and not force:
        raise TonemapIqaError(f"{what} exists: {path} (use --force to overwrite)")


def _modes(args):
    pooling = POOL_MEAN_ONLY if args.paper_dim else POOL_MEAN_STD
    scales = SCALES_ORIGINAL_ONLY if getattr(args, "single_scale", False) else SCALES_DUAL
    return pooling, scales


def _load_cache_and_manifest(args):
    cache = FeatureCache.read(args.cache)
    manifest = load_manifest(args.manifest)
    return cache, manifest


def _training_meta(layers, pooling_mode, scales, seed, selected_by):
    return {
        "layer_config": "/".join(layers),
        "layers": list(layers),
        "pooling_mode": pooling_mode,
        "scales": scales,
        "seed": seed,
        "selected_by": selected_by,
    }


def cmd_extract(args) -> int:
    out_path = args.out_cache or _default_cache_path()
    _guard_output(out_path, args.force, "cache")
    if args.paper_dim:
        print(
            "note: the cache always stores both statistics; --paper-dim takes "
            "effect when training/evaluating",
            file=sys.stderr,
        )
    graph = load_graph(args.model_dir)
    manifest = load_manifest(args.manifest)
    if args.layers == "all":
        layers = graph.tap_layers
    else:
        layers = tuple(p.strip() for p in args.layers.split(",") if p.strip())
        unknown = [la for la in layers if la not in graph.tap_layers]
        if unknown:
            raise TonemapIqaError(f"layers {unknown} not in model taps {graph.tap_layers}")
    cache, skipped = cache_features(manifest, graph, layers, jobs=args.jobs)
    cache.write(out_path)
    for path, reason in skipped:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    print(f"{len(cache)} images, {len(skipped)} skipped")
    return EXIT_OK


def cmd_train(args) -> int:
    _guard_output(args.out_model, args.force, "model")
    cache, manifest = _load_cache_and_manifest(args)
    layers = _parse_layers(args.layers)
    pooling, scales = _modes(args)
    paths = [e.image_path for e in manifest.entries]
    X = cache.matrix(paths, layers, pooling, scales)
    y = np.array([e.mos for e in manifest.entries])
    if args.sweep is not None:
        split = make_split(manifest, args.seed, with_validation=True)
        tr = list(split.train)
        va = list(split.validation)
        k, table = plsr.select_components(X[tr], y[tr], X[va], y[va], k_range=args.sweep)
        print(f"selected k={k} from {args.sweep[0]}:{args.sweep[1]}", file=sys.stderr)
        meta = _training_meta(layers, pooling, scales, args.seed, "sweep")
        model = plsr.fit(X[tr], y[tr], k, training_meta=meta)
    else:
        meta = _training_meta(layers, pooling, scales, args.seed, "fixed")
        model = plsr.fit(X, y, args.components, training_meta=meta)
    plsr.save_model(model, args.out_model)
    print(f"{args.out_model} k={model.n_components} dim={model.feature_dim}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = plsr.load_model(args.model)
    cache, manifest = _load_cache_and_manifest(args)
    meta = model.training_meta
    layers = tuple(meta.get("layers") or meta.get("layer_config", "").split("/"))
    if len(layers) != 3:
        raise TonemapIqaError(f"{args.model}: model metadata lacks a usable layer config")
    pooling = meta.get("pooling_mode", POOL_MEAN_STD)
    scales = meta.get("scales", SCALES_DUAL)
    paths = [e.image_path for e in manifest.entries]
    X = cache.matrix(paths, layers, pooling, scales)
    if X.shape[1] != model.feature_dim:
        raise TonemapIqaError(
            f"cache descriptors have {X.shape[1]} dims, model expects {model.feature_dim}"
        )
    pred = plsr.predict(model, X)
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["image_path", "prediction"])
        for path, value in zip(paths, pred):
            writer.writerow([path, f"{value:.6f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.out_report:
        _guard_output(args.out_report, args.force, "report")
    cache, manifest = _load_cache_and_manifest(args)
    pooling, scales = _modes(args)
    config = harness.ExperimentConfig(
        layers=_parse_layers(args.layers),
        n_components=None if args.sweep else args.components,
        sweep_range=args.sweep,
        n_runs=args.runs,
        base_seed=args.seed,
        pooling_mode=pooling,
        scales=scales,
        logistic_map=args.logistic_map,
    )
    report = harness.run_experiment(config, manifest, cache, jobs=args.jobs)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out_report:
        Path(args.out_report).write_text(text, "utf-8")
    sys.stdout.write(text)
    if args.out_csv:
        with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["run", "seed", "n_components", "srocc", "plcc", "rmse"])
            for i, run in enumerate(report.per_run):
                writer.writerow(
                    [i, run.seed, run.n_components]
                    + [f"{v:.6f}" for v in (run.overall.srocc, run.overall.plcc, run.overall.rmse)]
                )
    print(f"elapsed: {report.elapsed_seconds:.2f}s over {config.n_runs} runs", file=sys.stderr)
    return EXIT_OK


def cmd_search_layers(args) -> int:
    cache, manifest = _load_cache_and_manifest(args)
    pooling, scales = _modes(args)
    ranked = harness.layer_search(
        manifest,
        cache,
        base_seed=args.seed,
        n_runs=args.runs,
        n_components=args.components,
        pooling_mode=pooling,
        scales=scales,
        jobs=args.jobs,
    )
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["rank", "low", "mid", "high", "median_validation_srocc"])
    for rank, (combo, med) in enumerate(ranked, start=1):
        writer.writerow([rank, *combo, f"{med:.6f}"])
    return EXIT_OK


def cmd_sweep_components(args) -> int:
    cache, manifest = _load_cache_and_manifest(args)
    pooling, scales = _modes(args)
    best_k, rows = harness.sweep_components(
        manifest,
        cache,
        layers=_parse_layers(args.layers),
        base_seed=args.seed,
        n_runs=args.runs,
        k_range=args.sweep,
        pooling_mode=pooling,
        scales=scales,
    )
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["n_components", "median_validation_srocc"])
    for k, med in rows:
        writer.writerow([k, f"{med:.6f}"])
    print(f"best k={best_k}", file=sys.stderr)
    return EXIT_OK


def _add_common_model_flags(p):
    p.add_argument("--paper-dim", action="store_true",
                   help="mean-only pooling (4608 dims for the reference backbone)")
    p.add_argument("--single-scale", action="store_true",
                   help="use only the original scale (no half-scale features)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tonemap-iqa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("extract", help="pool backbone features for every manifest image",
                       parents=[], description="Write a feature cache for a manifest.")
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--model-dir", required=True, help="model package directory")
    p.add_argument("--out-cache", default=None,
                   help=f"output cache path (default ${CACHE_DIR_ENV}/{DEFAULT_CACHE_NAME})")
    p.add_argument("--layers", default="all", help='"all" or comma-separated tap names')
    p.add_argument("--paper-dim", action="store_true",
                   help="accepted for symmetry; the cache always stores both statistics")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--force", action="store_true", help="overwrite an existing cache")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="fit a PLSR model from cached features")
    p.add_argument("--cache", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--layers", required=True, help="low,mid,high tap names")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--components", type=int, default=harness.DEFAULT_COMPONENTS,
                       help="latent component count (default %(default)s)")
    group.add_argument("--sweep", type=_parse_sweep, default=None, metavar="LO:HI",
                       help="select k on a validation split from this range")
    p.add_argument("--seed", type=int, default=0, help="split seed for --sweep")
    p.add_argument("--out-model", required=True, help="output .plsr path")
    _add_common_model_flags(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="score images with a trained model")
    p.add_argument("--model", required=True, help=".plsr model file")
    p.add_argument("--cache", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated-split experiment with median metrics")
    p.add_argument("--cache", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--layers", default=",".join(harness.DEFAULT_LAYERS),
                   help="low,mid,high tap names (default %(default)s)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--components", type=int, default=harness.DEFAULT_COMPONENTS)
    group.add_argument("--sweep", type=_parse_sweep, default=None, metavar="LO:HI")
    p.add_argument("--runs", type=int, default=100, help="number of splits (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="base seed; run r uses seed+r")
    p.add_argument("--out-report", default=None, help="write the JSON report here")
    p.add_argument("--out-csv", default=None, help="optional per-run CSV summary")
    p.add_argument("--logistic-map", action="store_true",
                   help="4-parameter logistic remap before PLCC/RMSE")
    _add_common_model_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("search-layers", help="rank all layer combinations by validation SROCC")
    p.add_argument("--cache", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--components", type=int, default=harness.DEFAULT_COMPONENTS)
    _add_common_model_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_search_layers)

    p = sub.add_parser("sweep-components", help="validation SROCC per component count")
    p.add_argument("--cache", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--layers", required=True, help="low,mid,high tap names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--sweep", type=_parse_sweep, default=harness.DEFAULT_SWEEP_RANGE,
                   metavar="LO:HI", help="component range (default 10:20)")
    _add_common_model_flags(p)
    p.set_defaults(fn=cmd_sweep_components)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (TonemapIqaError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

"""Write and verify tonemap-iqa model packages.

export_backbone serializes the truncated trunk to ONNX with one named
output per tap and records measured (not assumed) output strides in the
manifest. verify_export runs a probe through the torch reference and
through the exported package via the tonemap_iqa runner (the runtime
that will consume the package in production) and reports the per-tap
max abs activation difference.
"""

import json
from pathlib import Path

import numpy as np
import torch

# the post-export hook needs the onnx package only for custom onnxscript
# functions, which these graphs never contain; bypass it
from torch.onnx._internal.torchscript_exporter import onnx_proto_utils

onnx_proto_utils._add_onnxscript_fn = lambda model_bytes, custom_opsets: model_bytes

from tonemap_iqa.backbone import extract_feature_maps, load_graph
from tonemap_iqa.tensor_io import ImageTensor, Normalization, load_image, normalize_for_backbone

from .trunk import EXPECTED_CHANNELS, PREPROCESSING, TAP_NAMES, build_reference

PARITY_TOLERANCE = 1e-4
STRIDE_PROBE_SIZES = ((64, 64), (96, 128), (160, 224))  # all divisible by 32


class GraphValidationFailureError(RuntimeError):
    """The exported graph does not match the expected trunk structure."""


class ParityFailureError(RuntimeError):
    """Exported graph and reference forward pass disagree beyond tolerance."""


def _measure_taps(model) -> tuple[dict, dict]:
    """Channel counts and output strides measured on three probe sizes."""
    channels = {}
    strides = {}
    for h, w in STRIDE_PROBE_SIZES:
        with torch.no_grad():
            outs = model(torch.zeros(1, 3, h, w))
        for name, out in zip(TAP_NAMES, outs):
            _, c, oh, ow = out.shape
            if h % oh or w % ow or (h // oh) != (w // ow):
                raise GraphValidationFailureError(
                    f"{name}: probe {h}x{w} gave {oh}x{ow}, not an integer stride"
                )
            stride = h // oh
            channels.setdefault(name, c)
            strides.setdefault(name, stride)
            if channels[name] != c or strides[name] != stride:
                raise GraphValidationFailureError(
                    f"{name}: inconsistent shape across probe sizes"
                )
    return channels, strides


def export_backbone(checkpoint: str, out_dir, tap_names=TAP_NAMES) -> dict:
    """Export the truncated trunk as a model package; returns the manifest."""
    if tuple(tap_names) != TAP_NAMES:
        raise GraphValidationFailureError(
            f"tap names must be exactly {TAP_NAMES}, got {tuple(tap_names)}"
        )
    model = build_reference(checkpoint)
    channels, strides = _measure_taps(model)
    mismatched = {n: c for n, c in channels.items() if c != EXPECTED_CHANNELS[n]}
    if mismatched:
        raise GraphValidationFailureError(f"unexpected channel counts: {mismatched}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dynamic_axes = {"image": {0: "n", 2: "h", 3: "w"}}
    for name in TAP_NAMES:
        dynamic_axes[name] = {0: "n", 2: f"{name}_h", 3: f"{name}_w"}
    torch.onnx.export(
        model,
        torch.zeros(1, 3, 96, 96),
        str(out_dir / "model.onnx"),
        input_names=["image"],
        output_names=list(TAP_NAMES),
        dynamic_axes=dynamic_axes,
        opset_version=13,
        do_constant_folding=True,
        dynamo=False,
    )
    manifest = {
        "format_version": 1,
        "tap_layers": list(TAP_NAMES),
        "channels": channels,
        "output_stride": strides,
        "preprocessing": dict(PREPROCESSING),
        "source_checkpoint": checkpoint,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return manifest


def _normalized_probe(probe_path, preprocessing) -> np.ndarray:
    norm = Normalization(mean=tuple(preprocessing["mean"]), scale=tuple(preprocessing["scale"]))
    if probe_path is None:
        rng = np.random.Generator(np.random.Philox(0))
        img = ImageTensor(rng.random((96, 128, 3)))
    else:
        img = load_image(probe_path)
    return normalize_for_backbone(img, norm).data  # HWC float32


def verify_export(package_dir, probe_path=None, reference=None) -> dict:
    """Per-tap max abs diff, exported-vs-reference, on one probe image.

    The reference trunk is rebuilt from the manifest's source_checkpoint
    unless one is passed in. Raises ParityFailureError when any tap
    exceeds the 1e-4 tolerance.
    """
    package_dir = Path(package_dir)
    graph = load_graph(package_dir)
    manifest = json.loads((package_dir / "manifest.json").read_text("utf-8"))
    if reference is None:
        reference = build_reference(manifest["source_checkpoint"])

    norm_hwc = _normalized_probe(probe_path, manifest["preprocessing"])
    with torch.no_grad():
        torch_outs = reference(torch.from_numpy(norm_hwc.transpose(2, 0, 1)).unsqueeze(0))
    want = {
        name: out.squeeze(0).permute(1, 2, 0).numpy()
        for name, out in zip(TAP_NAMES, torch_outs)
    }

    from tonemap_iqa.tensor_io import NormalizedTensor

    maps = extract_feature_maps(graph, NormalizedTensor(norm_hwc), list(TAP_NAMES), "original")
    diffs = {}
    for name in TAP_NAMES:
        got = maps[name].data
        if got.shape != want[name].shape:
            raise ParityFailureError(
                f"{name}: shape {got.shape} vs reference {want[name].shape}"
            )
        diffs[name] = float(np.abs(got - want[name]).max())
    failing = {n: d for n, d in diffs.items() if not d < PARITY_TOLERANCE}
    if failing:
        raise ParityFailureError(
            f"taps beyond {PARITY_TOLERANCE:g} max abs diff: {failing}"
        )
    return diffs

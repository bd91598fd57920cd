"""Regenerate the checked-in test fixtures.

Development-only: requires torch (the test suite itself does not).
Produces, under tests/fixtures/:

- gradient_8x4.png            deterministic 8x4 RGB gradient
- tiny_backbone/              two-tap residual-style fixture package
    model.onnx, manifest.json, expected.npz (frozen torch activations
    for the seed-0 probe at 32x32 and an odd-size 45x67 probe)
- conv_probe/model.onnx       3x3 convs, padding, maxpool, add
    + expected.npz
- bn_probe/model.onnx         unfused BatchNormalization
    + expected.npz

All weights are seeded; reruns are byte-stable except for ONNX metadata
torch controls. Run from the repo root: python tools/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image

# torch's post-export hook is only needed for custom onnxscript functions
# and requires the onnx package; bypass it so export works without onnx.
from torch.onnx._internal.torchscript_exporter import onnx_proto_utils

onnx_proto_utils._add_onnxscript_fn = lambda model_bytes, custom_opsets: model_bytes

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_SCALE = (0.229, 0.224, 0.225)


def export(model, example, path, output_names):
    dyn = {"image": {0: "n", 2: "h", 3: "w"}}
    for name in output_names:
        dyn[name] = {0: "n", 2: f"{name}_h", 3: f"{name}_w"}
    torch.onnx.export(
        model,
        example,
        str(path),
        input_names=["image"],
        output_names=list(output_names),
        dynamic_axes=dyn,
        opset_version=13,
        do_constant_folding=True,
        dynamo=False,
    )


def gradient_png():
    h, w = 4, 8
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                arr[y, x, c] = (x * 31 + y * 7 + c * 3) % 256
    Image.fromarray(arr, "RGB").save(FIXTURES / "gradient_8x4.png")
    sums = (arr.astype(np.float64) / 255.0).sum(axis=(0, 1))
    print("gradient_8x4.png per-channel sums:", [repr(s) for s in sums])


class TinyBackbone(nn.Module):
    """Residual-style fixture: 1x1 convs only, so constant inputs stay
    constant at every tap. The path to t1 is purely affine."""

    def __init__(self):
        super().__init__()
        g = torch.Generator().manual_seed(20240601)

        def conv(cin, cout, stride):
            layer = nn.Conv2d(cin, cout, kernel_size=1, stride=stride, bias=True)
            with torch.no_grad():
                layer.weight.copy_(torch.randn(layer.weight.shape, generator=g) * 0.5)
                layer.bias.copy_(torch.randn(layer.bias.shape, generator=g) * 0.1)
            return layer

        self.stem = conv(3, 4, 2)
        self.b1_main = conv(4, 4, 2)
        self.b1_skip = conv(4, 4, 2)
        self.b2_main = conv(4, 8, 2)
        self.b2_skip = conv(4, 8, 2)

    def forward(self, x):
        s = self.stem(x)
        t1 = self.b1_main(s) + self.b1_skip(s)
        z = torch.relu(t1)
        t2 = self.b2_main(z) + self.b2_skip(z)
        return t1, t2


class ConvProbe(nn.Module):
    """Exercises 3x3 convs with padding, strided maxpool, and add."""

    def __init__(self):
        super().__init__()
        g = torch.Generator().manual_seed(77)
        self.c1 = nn.Conv2d(3, 5, 3, stride=2, padding=1)
        self.sc = nn.Conv2d(3, 5, 1, stride=4)
        for layer in (self.c1, self.sc):
            with torch.no_grad():
                layer.weight.copy_(torch.randn(layer.weight.shape, generator=g) * 0.4)
                layer.bias.copy_(torch.randn(layer.bias.shape, generator=g) * 0.1)
        self.pool = nn.MaxPool2d(3, stride=2, padding=1)

    def forward(self, x):
        p1 = torch.relu(self.c1(x))
        p2 = self.pool(p1) + self.sc(x)
        return p1, p2


class BnProbe(nn.Module):
    def __init__(self):
        super().__init__()
        g = torch.Generator().manual_seed(99)
        self.c1 = nn.Conv2d(3, 4, 3, stride=1, padding=1)
        with torch.no_grad():
            self.c1.weight.copy_(torch.randn(self.c1.weight.shape, generator=g) * 0.4)
            self.c1.bias.copy_(torch.randn(self.c1.bias.shape, generator=g) * 0.1)
        self.bn = nn.BatchNorm2d(4)
        with torch.no_grad():
            self.bn.weight.copy_(torch.rand(4, generator=g) + 0.5)
            self.bn.bias.copy_(torch.randn(4, generator=g) * 0.2)
            self.bn.running_mean.copy_(torch.randn(4, generator=g) * 0.3)
            self.bn.running_var.copy_(torch.rand(4, generator=g) + 0.4)

    def forward(self, x):
        return (torch.relu(self.bn(self.c1(x))),)


def probe_tensor(shape_hw, seed):
    """Seeded [0, 1] image, normalized the way the pipeline does it."""
    rng = np.random.Generator(np.random.Philox(seed))
    img = rng.random((shape_hw[0], shape_hw[1], 3), dtype=np.float64)
    mean = np.asarray(IMAGENET_MEAN)
    scale = np.asarray(IMAGENET_SCALE)
    norm = ((img - mean) / scale).astype(np.float32)
    return norm  # HWC float32


def frozen_outputs(model, norm_hwc, names):
    x = torch.from_numpy(norm_hwc.transpose(2, 0, 1)).unsqueeze(0)
    with torch.no_grad():
        outs = model(x)
    return {name: o.squeeze(0).permute(1, 2, 0).numpy() for name, o in zip(names, outs)}


def tiny_backbone():
    pkg = FIXTURES / "tiny_backbone"
    pkg.mkdir(parents=True, exist_ok=True)
    model = TinyBackbone().eval()
    export(model, torch.zeros(1, 3, 32, 32), pkg / "model.onnx", ("t1", "t2"))
    manifest = {
        "format_version": 1,
        "tap_layers": ["t1", "t2"],
        "channels": {"t1": 4, "t2": 8},
        "output_stride": {"t1": 4, "t2": 8},
        "preprocessing": {"mean": list(IMAGENET_MEAN), "scale": list(IMAGENET_SCALE)},
        "source_checkpoint": "fixture:tiny-backbone-v1",
    }
    (pkg / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", "utf-8")

    expected = {}
    for tag, hw in (("p32", (32, 32)), ("odd", (45, 67))):
        norm = probe_tensor(hw, seed=0)
        outs = frozen_outputs(model, norm, ("t1", "t2"))
        expected[f"{tag}_input"] = norm
        expected[f"{tag}_t1"] = outs["t1"]
        expected[f"{tag}_t2"] = outs["t2"]
    np.savez_compressed(pkg / "expected.npz", **expected)
    print("tiny_backbone:", {k: v.shape for k, v in expected.items()})


def conv_probe():
    d = FIXTURES / "conv_probe"
    d.mkdir(parents=True, exist_ok=True)
    model = ConvProbe().eval()
    export(model, torch.zeros(1, 3, 32, 32), d / "model.onnx", ("p1", "p2"))
    norm = probe_tensor((32, 32), seed=7)
    outs = frozen_outputs(model, norm, ("p1", "p2"))
    np.savez_compressed(d / "expected.npz", input=norm, **outs)
    print("conv_probe:", {k: v.shape for k, v in outs.items()})


def bn_probe():
    d = FIXTURES / "bn_probe"
    d.mkdir(parents=True, exist_ok=True)
    model = BnProbe().eval()
    dyn = {"image": {0: "n", 2: "h", 3: "w"}, "b1": {0: "n", 2: "b1_h", 3: "b1_w"}}
    torch.onnx.export(
        model,
        torch.zeros(1, 3, 16, 16),
        str(d / "model.onnx"),
        input_names=["image"],
        output_names=["b1"],
        dynamic_axes=dyn,
        opset_version=13,
        do_constant_folding=False,
        dynamo=False,
    )
    norm = probe_tensor((16, 16), seed=11)
    outs = frozen_outputs(model, norm, ("b1",))
    np.savez_compressed(d / "expected.npz", input=norm, **outs)
    print("bn_probe:", {k: v.shape for k, v in outs.items()})


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    gradient_png()
    tiny_backbone()
    conv_probe()
    bn_probe()

"""The truncated ResNet-50 reference model and checkpoint loading.

The trunk keeps conv1 through layer3 (everything up to res4f) and
returns every residual block's output: 3 blocks of layer1 (res2a-c,
256 ch), 4 of layer2 (res3a-d, 512 ch), 6 of layer3 (res4a-f, 1024 ch).
layer4 and the classifier head are dropped.

Checkpoint identifiers:
- ``torchvision:<TAG>``  a torchvision weights tag, e.g.
  ``torchvision:IMAGENET1K_V1`` (downloads on first use)
- ``random:<seed>``      seeded random initialization (for testing)
- a filesystem path to a ResNet-50 state-dict ``.pth``
"""

from pathlib import Path

import torch
import torch.nn as nn
import torchvision

TAP_NAMES = (
    "res2a", "res2b", "res2c",
    "res3a", "res3b", "res3c", "res3d",
    "res4a", "res4b", "res4c", "res4d", "res4e", "res4f",
)

EXPECTED_CHANNELS = dict(
    [(name, 256) for name in TAP_NAMES[:3]]
    + [(name, 512) for name in TAP_NAMES[3:7]]
    + [(name, 1024) for name in TAP_NAMES[7:]]
)

# standard ImageNet preprocessing, recorded in the package manifest
PREPROCESSING = {
    "mean": [0.485, 0.456, 0.406],
    "scale": [0.229, 0.224, 0.225],
}


class CheckpointUnavailableError(RuntimeError):
    """The requested checkpoint cannot be retrieved or loaded."""


class TruncatedResNet50(nn.Module):
    def __init__(self, resnet: torchvision.models.ResNet):
        super().__init__()
        self.stem = nn.Sequential(resnet.conv1, resnet.bn1, resnet.relu, resnet.maxpool)
        self.stages = nn.ModuleList([resnet.layer1, resnet.layer2, resnet.layer3])

    def forward(self, x):
        x = self.stem(x)
        outs = []
        for stage in self.stages:
            for block in stage:
                x = block(x)
                outs.append(x)
        return tuple(outs)


def _seeded_init(model: nn.Module, seed: int) -> None:
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for param in model.parameters():
            param.copy_(torch.randn(param.shape, generator=generator) * 0.05)
        for module in model.modules():
            if isinstance(module, nn.BatchNorm2d):
                module.running_mean.copy_(
                    torch.randn(module.running_mean.shape, generator=generator) * 0.1
                )
                module.running_var.copy_(
                    torch.rand(module.running_var.shape, generator=generator) + 0.5
                )


def build_reference(checkpoint: str) -> TruncatedResNet50:
    """Load the checkpoint and return the eval-mode truncated trunk."""
    if checkpoint.startswith("torchvision:"):
        tag = checkpoint.split(":", 1)[1]
        try:
            weights = getattr(torchvision.models.ResNet50_Weights, tag)
            resnet = torchvision.models.resnet50(weights=weights)
        except AttributeError as exc:
            raise CheckpointUnavailableError(f"unknown torchvision weights tag {tag!r}") from exc
        except Exception as exc:  # download failures surface as URLError etc.
            raise CheckpointUnavailableError(f"could not retrieve {checkpoint}: {exc}") from exc
    elif checkpoint.startswith("random:"):
        seed = int(checkpoint.split(":", 1)[1])
        resnet = torchvision.models.resnet50(weights=None)
        _seeded_init(resnet, seed)
    else:
        path = Path(checkpoint)
        if not path.is_file():
            raise CheckpointUnavailableError(f"checkpoint file not found: {path}")
        resnet = torchvision.models.resnet50(weights=None)
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
            resnet.load_state_dict(state)
        except Exception as exc:
            raise CheckpointUnavailableError(f"could not load {path}: {exc}") from exc
    return TruncatedResNet50(resnet).eval()

"""Image decoding, two-scale representation, and backbone preprocessing.

Conventions:
- Decoded images are (H, W, 3) float64 in [0, 1], RGB order; an 8-bit
  value v maps to v / 255 exactly.
- The half scale is a 2x2 box average with trailing odd row/column
  dropped (floor semantics).
- Normalized tensors are float32, the numeric type the backbone runs in.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import kernels
from .errors import (
    CorruptImageError,
    ImageTooSmallError,
    InvalidNormalizationError,
    UnsupportedFormatError,
)

SUPPORTED_FORMATS = ("PNG", "JPEG", "BMP")

# build_multiscale minimum: the half scale must still cover one cell of a
# stride-32 tap, i.e. ceil(64 / 2) = 32.
MIN_INPUT_SIDE = 64


@dataclass(frozen=True)
class ImageTensor:
    """Decoded RGB image, (H, W, 3) float64 values in [0, 1]."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class MultiScaleRepresentation:
    """The pair fed to the backbone: original image and its half scale."""

    original: ImageTensor
    downsampled: ImageTensor


@dataclass(frozen=True)
class NormalizedTensor:
    """Per-channel standardized image, (H, W, 3) float32."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Normalization:
    """Per-channel mean/scale pair applied before the backbone."""

    mean: tuple[float, float, float]
    scale: tuple[float, float, float]


def load_image(path) -> ImageTensor:
    """Decode a PNG/JPEG/BMP file into an ImageTensor.

    Raises FileNotFoundError, UnsupportedFormatError, or
    CorruptImageError; each message carries the path.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    try:
        with Image.open(path) as img:
            fmt = img.format
            if fmt not in SUPPORTED_FORMATS:
                raise UnsupportedFormatError(f"{path}: format {fmt} not in {SUPPORTED_FORMATS}")
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: not a recognized raster file") from exc
    except OSError as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc
    return ImageTensor(arr.astype(np.float64) / 255.0)


def downsample2x(img: ImageTensor, method: str = "box") -> ImageTensor:
    """Halve both dimensions (floor); default is a 2x2 box average.

    method="bicubic" selects PIL's bicubic resampling instead, clamped
    back into [0, 1]. Acceptance runs use the box filter only.
    """
    if img.height < 2 or img.width < 2:
        raise ImageTooSmallError(
            f"downsample2x needs at least 2x2, got {img.height}x{img.width}"
        )
    if method == "box":
        return ImageTensor(kernels.box_downsample2(img.data))
    if method == "bicubic":
        h2, w2 = img.height // 2, img.width // 2
        planes = []
        for c in range(3):
            plane = Image.fromarray(img.data[:, :, c].astype(np.float32), mode="F")
            planes.append(np.asarray(plane.resize((w2, h2), Image.BICUBIC), dtype=np.float64))
        return ImageTensor(np.clip(np.stack(planes, axis=2), 0.0, 1.0))
    raise ValueError(f"unknown downsampling method {method!r}")


def build_multiscale(img: ImageTensor) -> MultiScaleRepresentation:
    """Pair the unmodified image with its 2x downsampled copy."""
    if img.height < MIN_INPUT_SIDE or img.width < MIN_INPUT_SIDE:
        raise ImageTooSmallError(
            f"multi-scale input must be at least {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE}, "
            f"got {img.height}x{img.width}"
        )
    return MultiScaleRepresentation(original=img, downsampled=downsample2x(img))


def normalize_for_backbone(img: ImageTensor, norm: Normalization) -> NormalizedTensor:
    """Per-channel standardization: out[c] = (in[c] - mean[c]) / scale[c]."""
    if len(norm.mean) != 3 or len(norm.scale) != 3:
        raise InvalidNormalizationError("normalization needs 3 means and 3 scales")
    if any(s <= 0 for s in norm.scale):
        raise InvalidNormalizationError(f"scales must be positive, got {norm.scale}")
    mean = np.asarray(norm.mean, dtype=np.float64)
    scale = np.asarray(norm.scale, dtype=np.float64)
    return NormalizedTensor(((img.data - mean) / scale).astype(np.float32))

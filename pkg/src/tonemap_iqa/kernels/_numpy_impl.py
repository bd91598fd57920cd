"""Pure-numpy kernel implementations.

Convolution goes through an im2col strided view and one BLAS matmul;
pooling and downsampling are vectorized reductions. Shapes follow the
graph executor's conventions: activations are (C, H, W) float32,
images are (H, W, C).
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def conv2d(x, w, bias, stride_h, stride_w, pad_top, pad_left, pad_bottom, pad_right):
    """2-D convolution (cross-correlation), group 1, dilation 1.

    x: (C, H, W) float32; w: (OC, C, KH, KW) float32; bias: (OC,) float32.
    Returns (OC, OH, OW) float32 with OH = (H + pads - KH) // stride + 1.
    """
    c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (pad_top, pad_bottom), (pad_left, pad_right)))
    oh = (h + pad_top + pad_bottom - kh) // stride_h + 1
    ow = (wd + pad_left + pad_right - kw) // stride_w + 1
    sc, sh, sw = xp.strides
    cols = as_strided(
        xp,
        shape=(c, kh, kw, oh, ow),
        strides=(sc, sh, sw, sh * stride_h, sw * stride_w),
        writeable=False,
    )
    out = np.tensordot(w, cols, axes=([1, 2, 3], [0, 1, 2]))
    out += bias[:, None, None]
    return np.ascontiguousarray(out, dtype=np.float32)


def maxpool2d(x, kh, kw, stride_h, stride_w, pad_top, pad_left, pad_bottom, pad_right, ceil_mode):
    """Max pooling over (C, H, W) float32; padding cells never win."""
    c, h, wd = x.shape
    hp = h + pad_top + pad_bottom
    wp = wd + pad_left + pad_right
    if ceil_mode:
        oh = -((hp - kh) // -stride_h) + 1
        ow = -((wp - kw) // -stride_w) + 1
        # ceil mode may demand windows starting past the padded edge; extend
        extra_h = max(0, (oh - 1) * stride_h + kh - hp)
        extra_w = max(0, (ow - 1) * stride_w + kw - wp)
    else:
        oh = (hp - kh) // stride_h + 1
        ow = (wp - kw) // stride_w + 1
        extra_h = extra_w = 0
    xp = np.pad(
        x,
        ((0, 0), (pad_top, pad_bottom + extra_h), (pad_left, pad_right + extra_w)),
        constant_values=-np.inf,
    )
    sc, sh, sw = xp.strides
    windows = as_strided(
        xp,
        shape=(c, oh, ow, kh, kw),
        strides=(sc, sh * stride_h, sw * stride_w, sh, sw),
        writeable=False,
    )
    return np.ascontiguousarray(windows.max(axis=(3, 4)), dtype=np.float32)


def box_downsample2(img):
    """2x2 box-average downsampling of an (H, W, C) float64 image.

    Trailing odd row/column is dropped. The four pixels are summed in a
    fixed order so both backends produce bit-identical output.
    """
    h2 = img.shape[0] // 2
    w2 = img.shape[1] // 2
    a = img[0 : 2 * h2 : 2, 0 : 2 * w2 : 2]
    b = img[0 : 2 * h2 : 2, 1 : 2 * w2 : 2]
    c = img[1 : 2 * h2 : 2, 0 : 2 * w2 : 2]
    d = img[1 : 2 * h2 : 2, 1 : 2 * w2 : 2]
    return ((a + b) + (c + d)) * 0.25


def channel_mean_std(fm):
    """Per-channel spatial mean and population std of an (H, W, C) map.

    Accumulates in float64 regardless of input dtype. A channel whose
    values are all identical reports that value and an exact 0.0 std.
    """
    data = fm.astype(np.float64, copy=False)
    n = data.shape[0] * data.shape[1]
    means = data.mean(axis=(0, 1))
    centered = data - means
    stds = np.sqrt(np.einsum("ijc,ijc->c", centered, centered) / n)
    lo = data.min(axis=(0, 1))
    hi = data.max(axis=(0, 1))
    const = lo == hi
    if const.any():
        means = np.where(const, lo, means)
        stds = np.where(const, 0.0, stds)
    return means, stds

"""Numba kernel implementations.

Direct loops, parallelized across output cells only, so results are
independent of thread count.

conv2d here is a jitted direct convolution kept for cross-checking and
benchmarking; the production dispatch in __init__ routes conv2d to the
im2col+BLAS implementation on both backends because GEMM-shaped work is
where BLAS wins by a wide margin (see benchmarks/bench_kernels.py).
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, nogil=True, cache=True)
def _conv2d_padded(xp, w, bias, stride_h, stride_w, oh, ow):
    oc, c, kh, kw = w.shape
    out = np.empty((oc, oh, ow), dtype=np.float32)
    for o in prange(oc):
        row = np.empty(ow, dtype=np.float32)
        for i in range(oh):
            hi = i * stride_h
            for j in range(ow):
                row[j] = bias[o]
            if stride_w == 1:
                for ci in range(c):
                    for a in range(kh):
                        line = xp[ci, hi + a]
                        for b in range(kw):
                            wv = w[o, ci, a, b]
                            lineb = line[b:]  # unit stride so the j loop vectorizes
                            for j in range(ow):
                                row[j] += wv * lineb[j]
            else:
                for ci in range(c):
                    for a in range(kh):
                        line = xp[ci, hi + a]
                        for b in range(kw):
                            wv = w[o, ci, a, b]
                            for j in range(ow):
                                row[j] += wv * line[j * stride_w + b]
            for j in range(ow):
                out[o, i, j] = row[j]
    return out


def conv2d(x, w, bias, stride_h, stride_w, pad_top, pad_left, pad_bottom, pad_right):
    """2-D convolution (cross-correlation), group 1, dilation 1."""
    c, h, wd = x.shape
    kh, kw = w.shape[2], w.shape[3]
    xp = np.zeros((c, h + pad_top + pad_bottom, wd + pad_left + pad_right), dtype=np.float32)
    xp[:, pad_top : pad_top + h, pad_left : pad_left + wd] = x
    oh = (h + pad_top + pad_bottom - kh) // stride_h + 1
    ow = (wd + pad_left + pad_right - kw) // stride_w + 1
    return _conv2d_padded(xp, w, bias, stride_h, stride_w, oh, ow)


@njit(parallel=True, nogil=True, cache=True)
def _maxpool2d_padded(xp, kh, kw, stride_h, stride_w, oh, ow):
    c = xp.shape[0]
    out = np.empty((c, oh, ow), dtype=np.float32)
    for ci in prange(c):
        for i in range(oh):
            hi = i * stride_h
            for j in range(ow):
                wj = j * stride_w
                best = np.float32(-np.inf)
                for a in range(kh):
                    for b in range(kw):
                        v = xp[ci, hi + a, wj + b]
                        if v > best:
                            best = v
                out[ci, i, j] = best
    return out


def maxpool2d(x, kh, kw, stride_h, stride_w, pad_top, pad_left, pad_bottom, pad_right, ceil_mode):
    """Max pooling over (C, H, W) float32; padding cells never win."""
    c, h, wd = x.shape
    hp = h + pad_top + pad_bottom
    wp = wd + pad_left + pad_right
    if ceil_mode:
        oh = -((hp - kh) // -stride_h) + 1
        ow = -((wp - kw) // -stride_w) + 1
        extra_h = max(0, (oh - 1) * stride_h + kh - hp)
        extra_w = max(0, (ow - 1) * stride_w + kw - wp)
    else:
        oh = (hp - kh) // stride_h + 1
        ow = (wp - kw) // stride_w + 1
        extra_h = extra_w = 0
    xp = np.full(
        (c, hp + extra_h, wp + extra_w),
        -np.inf,
        dtype=np.float32,
    )
    xp[:, pad_top : pad_top + h, pad_left : pad_left + wd] = x
    return _maxpool2d_padded(xp, kh, kw, stride_h, stride_w, oh, ow)


@njit(parallel=True, nogil=True, cache=True)
def _box_downsample2(img, h2, w2):
    c = img.shape[2]
    out = np.empty((h2, w2, c), dtype=np.float64)
    for i in prange(h2):
        for j in range(w2):
            for ch in range(c):
                a = img[2 * i, 2 * j, ch]
                b = img[2 * i, 2 * j + 1, ch]
                cc = img[2 * i + 1, 2 * j, ch]
                d = img[2 * i + 1, 2 * j + 1, ch]
                out[i, j, ch] = ((a + b) + (cc + d)) * 0.25
    return out


def box_downsample2(img):
    """2x2 box-average downsampling of an (H, W, C) float64 image."""
    return _box_downsample2(np.ascontiguousarray(img), img.shape[0] // 2, img.shape[1] // 2)


@njit(parallel=True, nogil=True, cache=True)
def _channel_mean_std(data):
    h, w, c = data.shape
    n = h * w
    means = np.empty(c, dtype=np.float64)
    stds = np.empty(c, dtype=np.float64)
    for ch in prange(c):
        lo = data[0, 0, ch]
        hi = data[0, 0, ch]
        total = 0.0
        for i in range(h):
            for j in range(w):
                v = data[i, j, ch]
                total += v
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
        if lo == hi:
            means[ch] = lo
            stds[ch] = 0.0
            continue
        m = total / n
        ssq = 0.0
        for i in range(h):
            for j in range(w):
                d = data[i, j, ch] - m
                ssq += d * d
        means[ch] = m
        stds[ch] = np.sqrt(ssq / n)
    return means, stds


def channel_mean_std(fm):
    """Per-channel spatial mean and population std of an (H, W, C) map."""
    return _channel_mean_std(np.ascontiguousarray(fm, dtype=np.float64))

"""Numba-jitted correlation kernels (primary backend).

Same contracts as :mod:`hazelift.nn.kernels_numpy`. Work is partitioned
so every output element is accumulated by exactly one thread in a fixed
order, which keeps results bit-identical across thread counts. fastmath
only relicenses instruction-level reassociation; runs stay reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .kernels_numpy import out_size


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


@njit(cache=True, parallel=True, fastmath=True)
def _fwd(xp, w, stride, ho, wo):
    n, ci, _, _ = xp.shape
    co, _, kh, kw = w.shape
    out = np.zeros((n, co, ho, wo), dtype=xp.dtype)
    for idx in prange(n * co):
        b = idx // co
        o = idx % co
        for c in range(ci):
            for u in range(kh):
                for v in range(kw):
                    wv = w[o, c, u, v]
                    for i in range(ho):
                        ii = i * stride + u
                        for j in range(wo):
                            out[b, o, i, j] += wv * xp[b, c, ii, j * stride + v]
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _bwd_input(gy, w, stride, hp, wp):
    n, co, ho, wo = gy.shape
    ci = w.shape[1]
    kh, kw = w.shape[2], w.shape[3]
    gxp = np.zeros((n, ci, hp, wp), dtype=gy.dtype)
    # each (b, c) slice is owned by one thread: scatter is race-free
    for idx in prange(n * ci):
        b = idx // ci
        c = idx % ci
        for o in range(co):
            for u in range(kh):
                for v in range(kw):
                    wv = w[o, c, u, v]
                    for i in range(ho):
                        ii = i * stride + u
                        for j in range(wo):
                            gxp[b, c, ii, j * stride + v] += wv * gy[b, o, i, j]
    return gxp


@njit(cache=True, parallel=True, fastmath=True)
def _bwd_weight(xp, gy, stride, kh, kw):
    n, ci, _, _ = xp.shape
    co, ho, wo = gy.shape[1], gy.shape[2], gy.shape[3]
    gw = np.zeros((co, ci, kh, kw), dtype=xp.dtype)
    for idx in prange(co * ci):
        o = idx // ci
        c = idx % ci
        for u in range(kh):
            for v in range(kw):
                acc = gw[o, c, u, v]
                for b in range(n):
                    for i in range(ho):
                        ii = i * stride + u
                        for j in range(wo):
                            acc += xp[b, c, ii, j * stride + v] * gy[b, o, i, j]
                gw[o, c, u, v] = acc
    return gw


def corr_fwd(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    ho = out_size(x.shape[2], w.shape[2], stride, pad)
    wo = out_size(x.shape[3], w.shape[3], stride, pad)
    return _fwd(_pad(x, pad), np.ascontiguousarray(w), stride, ho, wo)


def corr_bwd_input(
    gy: np.ndarray, w: np.ndarray, stride: int, pad: int, height: int, width: int
) -> np.ndarray:
    gxp = _bwd_input(
        np.ascontiguousarray(gy),
        np.ascontiguousarray(w),
        stride,
        height + 2 * pad,
        width + 2 * pad,
    )
    if pad:
        return np.ascontiguousarray(gxp[:, :, pad : pad + height, pad : pad + width])
    return gxp


def corr_bwd_weight(
    x: np.ndarray, gy: np.ndarray, stride: int, pad: int, kh: int, kw: int
) -> np.ndarray:
    return _bwd_weight(_pad(x, pad), np.ascontiguousarray(gy), stride, kh, kw)

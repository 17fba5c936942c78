"""Pure-numpy correlation kernels (fallback backend).

Each primitive loops over the small kernel footprint and delegates the
heavy contraction to einsum/BLAS on strided views, which avoids
materializing an im2col buffer.

Conventions: activations are ``(N, C, H, W)``; weights are
``(C_out, C_in, kH, kW)``; ``corr_fwd`` computes cross-correlation with
output size ``floor((H + 2p - kH)/s) + 1`` per axis.
"""

from __future__ import annotations

import numpy as np


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def corr_fwd(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    """y[n,o,i,j] = sum_{c,u,v} x[n,c,i*s+u-p, j*s+v-p] * w[o,c,u,v]."""
    co, ci, kh, kw = w.shape
    xp = _pad(x, pad)
    ho = out_size(x.shape[2], kh, stride, pad)
    wo = out_size(x.shape[3], kw, stride, pad)
    out = np.zeros((x.shape[0], co, ho, wo), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride]
            out += np.einsum("ncij,oc->noij", xs, w[:, :, u, v], optimize=True)
    return out


def corr_bwd_input(
    gy: np.ndarray, w: np.ndarray, stride: int, pad: int, height: int, width: int
) -> np.ndarray:
    """Adjoint of corr_fwd with respect to the input; scatter form."""
    co, ci, kh, kw = w.shape
    n, _, ho, wo = gy.shape
    gxp = np.zeros((n, ci, height + 2 * pad, width + 2 * pad), dtype=gy.dtype)
    for u in range(kh):
        for v in range(kw):
            contrib = np.einsum("noij,oc->ncij", gy, w[:, :, u, v], optimize=True)
            gxp[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride] += contrib
    if pad:
        return np.ascontiguousarray(gxp[:, :, pad : pad + height, pad : pad + width])
    return gxp


def corr_bwd_weight(
    x: np.ndarray, gy: np.ndarray, stride: int, pad: int, kh: int, kw: int
) -> np.ndarray:
    """Adjoint of corr_fwd with respect to the weights."""
    n, ci, _, _ = x.shape
    _, co, ho, wo = gy.shape
    xp = _pad(x, pad)
    gw = np.empty((co, ci, kh, kw), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, :, u : u + ho * stride : stride, v : v + wo * stride : stride]
            gw[:, :, u, v] = np.einsum("noij,ncij->oc", gy, xs, optimize=True)
    return gw

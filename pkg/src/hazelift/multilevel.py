"""Full-image map estimation by running the patch network at several
patch scales.

Level 1 tiles the image with patches of side ``min(H, W)``; each further
level halves the patch side, stopping above the network input size.
Patches overlap by half their side, near-uniform patches are skipped,
and each kept patch is resized to the network input, evaluated, and its
output maps resized back. Overlaps average; per-level maps then combine
by a weighted per-pixel average over the levels that saw the pixel.
Pixels no level saw are left to the regularizer to fill.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .synth import patch_variance


def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of (H, W) or (H, W, C) with pixel-center alignment."""
    h, w = arr.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    if (h, w) == (out_h, out_w):
        return arr.copy()
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = ys - y0
    wx = xs - x0
    if arr.ndim == 3:
        wy = wy[:, None, None]
        wx = wx[None, :, None]
    else:
        wy = wy[:, None]
        wx = wx[None, :]
    a00 = arr[np.ix_(y0, x0)]
    a01 = arr[np.ix_(y0, x1)]
    a10 = arr[np.ix_(y1, x0)]
    a11 = arr[np.ix_(y1, x1)]
    top = a00 * (1.0 - wx) + a01 * wx
    bot = a10 * (1.0 - wx) + a11 * wx
    return (top * (1.0 - wy) + bot * wy).astype(arr.dtype)


def level_count(height: int, width: int, omega: int) -> int:
    """Number of halving levels whose patch side stays >= omega.

    Equals ``floor(log2(min(H, W)) - log2(omega) + 1)``; computed by
    integer halving to avoid float-log edge cases.
    """
    p = min(height, width)
    if p < omega:
        raise ValueError(f"image side {p} is smaller than patch size {omega}")
    m = 0
    while p >= omega:
        m += 1
        p //= 2
    return m


@dataclass
class LevelEstimate:
    level: int
    t: np.ndarray      # (H, W) float32
    a: np.ndarray      # (H, W, 3) float32
    mask: np.ndarray   # (H, W) bool; True where a patch produced a value


def estimate_level(
    image: np.ndarray,
    level: int,
    predict_fn,
    omega: int,
    variance_threshold: float = 0.08,
    stride_divisor: int = 2,
    batch_size: int = 16,
) -> LevelEstimate:
    """Tile the image at one pyramid level and evaluate kept patches.

    ``predict_fn`` maps a float32 batch (B, 3, omega, omega) to
    ``(t (B, omega, omega), a (B, 3, omega, omega))``.
    """
    height, width = image.shape[:2]
    side = min(height, width) // (2 ** (level - 1))
    if side < omega:
        raise ValueError(f"level {level} patch side {side} is below {omega}")
    stride = max(1, side // stride_divisor)
    positions = [
        (y, x)
        for y in _cover_positions(height, side, stride)
        for x in _cover_positions(width, side, stride)
    ]
    kept = [
        (y, x)
        for (y, x) in positions
        if patch_variance(image[y : y + side, x : x + side]) > variance_threshold
    ]
    t_sum = np.zeros((height, width), dtype=np.float32)
    a_sum = np.zeros((height, width, 3), dtype=np.float32)
    count = np.zeros((height, width), dtype=np.int32)
    for start in range(0, len(kept), batch_size):
        chunk = kept[start : start + batch_size]
        batch = np.stack(
            [
                resize_bilinear(image[y : y + side, x : x + side], omega, omega)
                for (y, x) in chunk
            ]
        ).transpose(0, 3, 1, 2)
        t_out, a_out = predict_fn(np.ascontiguousarray(batch, dtype=np.float32))
        for (y, x), t_patch, a_patch in zip(chunk, t_out, a_out):
            t_sum[y : y + side, x : x + side] += resize_bilinear(
                np.asarray(t_patch, dtype=np.float32), side, side
            )
            a_sum[y : y + side, x : x + side] += resize_bilinear(
                np.asarray(a_patch, dtype=np.float32).transpose(1, 2, 0), side, side
            )
            count[y : y + side, x : x + side] += 1
    mask = count > 0
    denom = np.maximum(count, 1).astype(np.float32)
    t_map = t_sum / denom
    a_map = a_sum / denom[:, :, None]
    return LevelEstimate(level=level, t=t_map, a=a_map, mask=mask)


def _cover_positions(extent: int, size: int, stride: int) -> list[int]:
    pos = list(range(0, extent - size + 1, stride))
    if pos[-1] != extent - size:
        pos.append(extent - size)
    return pos


def aggregate_levels(
    estimates: list[LevelEstimate],
    t_weights=None,
    a_weights=None,
):
    """Per-pixel weighted average over the levels that cover each pixel.

    Returns ``(t, a, mask)`` where the mask is the union of level masks.
    Default weights are all 1.
    """
    if not estimates:
        raise ValueError("no level estimates to aggregate")
    hw = estimates[0].t.shape
    for est in estimates:
        if est.t.shape != hw:
            raise ValueError("level estimates have mismatched dimensions")
    t_weights = _check_weights(t_weights, len(estimates), "t")
    a_weights = _check_weights(a_weights, len(estimates), "a")
    t_num = np.zeros(hw, dtype=np.float64)
    t_den = np.zeros(hw, dtype=np.float64)
    a_num = np.zeros((*hw, 3), dtype=np.float64)
    a_den = np.zeros(hw, dtype=np.float64)
    for est, wt, wa in zip(estimates, t_weights, a_weights):
        m = est.mask
        t_num[m] += wt * est.t[m]
        t_den[m] += wt
        a_num[m] += wa * est.a[m]
        a_den[m] += wa
    mask = t_den > 0
    t_map = np.zeros(hw, dtype=np.float32)
    a_map = np.zeros((*hw, 3), dtype=np.float32)
    np.divide(t_num, t_den, out=t_num, where=mask)
    np.divide(a_num, a_den[:, :, None], out=a_num, where=mask[:, :, None])
    t_map[mask] = t_num[mask].astype(np.float32)
    a_map[mask] = a_num[mask].astype(np.float32)
    return t_map, a_map, mask


def _check_weights(weights, n: int, name: str):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{name} weights must have one entry per level ({n})")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError(f"{name} weights must be nonnegative with at least one positive")
    return w


def estimate_maps(
    image: np.ndarray,
    predict_fn,
    omega: int,
    variance_threshold: float = 0.08,
    stride_divisor: int = 2,
    t_weights=None,
    a_weights=None,
):
    """All levels of :func:`estimate_level` followed by aggregation."""
    m = level_count(image.shape[0], image.shape[1], omega)
    estimates = [
        estimate_level(
            image, lvl, predict_fn, omega, variance_threshold, stride_divisor
        )
        for lvl in range(1, m + 1)
    ]
    if t_weights is not None and len(t_weights) != m:
        raise ValueError(f"expected {m} per-level t weights")
    if a_weights is not None and len(a_weights) != m:
        raise ValueError(f"expected {m} per-level a weights")
    return aggregate_levels(estimates, t_weights, a_weights)

"""Pixel-level data conventions and the scattering imaging model.

Arrays follow these conventions throughout the package:

- image: float32 ``(H, W, 3)``, values in [0, 1]
- scalar map (transmittance): float32 ``(H, W)``, values in [0, 1]
- color map (illumination): float32 ``(H, W, 3)``, values in [0, 1]
- depth map: float32 ``(H, W)``, nonnegative, meters

A hazy observation is a per-pixel convex combination of the scene
radiance and the ambient illumination: ``I = J*t + (1 - t)*A`` with
``t = exp(-beta * depth)``. Recovery inverts that combination with the
denominator clamped at 0.1 to keep thin-transmittance pixels bounded.
"""

from __future__ import annotations

import numpy as np

# Denominator clamp used during recovery; keeps 1/t bounded by 10.
MIN_TRANSMITTANCE = 0.1


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def validate_image(arr: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate and return an (H, W, 3) float32 image in [0, 1]."""
    a = np.asarray(arr)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1")
    _check_finite(a, name)
    if a.min() < 0.0 or a.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return a.astype(np.float32, copy=False)


def validate_scalar_map(arr: np.ndarray, name: str = "map") -> np.ndarray:
    """Validate and return an (H, W) float32 map in [0, 1]."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"{name} must have shape (H, W), got {a.shape}")
    _check_finite(a, name)
    if a.min() < 0.0 or a.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return a.astype(np.float32, copy=False)


def validate_color_map(arr: np.ndarray, name: str = "color map") -> np.ndarray:
    """Validate and return an (H, W, 3) float32 map in [0, 1]."""
    return validate_image(arr, name)


def validate_depth_map(arr: np.ndarray, name: str = "depth") -> np.ndarray:
    """Validate and return an (H, W) float32 nonnegative depth map."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"{name} must have shape (H, W), got {a.shape}")
    _check_finite(a, name)
    if a.min() < 0.0:
        raise ValueError(f"{name} values must be nonnegative")
    return a.astype(np.float32, copy=False)


def _check_same_shape(hw: tuple[int, int], arr: np.ndarray, name: str) -> None:
    if tuple(arr.shape[:2]) != hw:
        raise ValueError(f"{name} dimensions {arr.shape[:2]} do not match {hw}")


def transmittance_from_depth(depth: np.ndarray, beta: float) -> np.ndarray:
    """Map scene depth to transmittance, ``t = exp(-beta * depth)``.

    ``beta`` is the scattering strength per meter; larger values or deeper
    scenes transmit less. The result lies in (0, 1].
    """
    d = validate_depth_map(depth)
    if not np.isfinite(beta) or beta <= 0.0:
        raise ValueError(f"beta must be a positive finite scalar, got {beta}")
    return np.exp(np.float32(-beta) * d).astype(np.float32)


def synthesize_haze(clean: np.ndarray, t: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Render a hazy observation from radiance, transmittance and illumination.

    Per pixel and channel: ``I = J*t + (1 - t)*A``. The output is clipped
    to [0, 1] to guard against float rounding at the boundaries.
    """
    clean = validate_image(clean, "clean")
    t = validate_scalar_map(t, "t")
    a = validate_color_map(a, "a")
    hw = clean.shape[:2]
    _check_same_shape(hw, t, "t")
    _check_same_shape(hw, a, "a")
    t3 = t[:, :, None]
    hazy = clean * t3 + (1.0 - t3) * a
    return np.clip(hazy, 0.0, 1.0).astype(np.float32)


def recover_scene(hazy: np.ndarray, t: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Invert the haze model: ``J = (I - (1 - t)*A) / max(0.1, t)``.

    The denominator clamp bounds amplification in dense haze; the result
    is clamped to [0, 1] so the output is always a displayable image.
    """
    hazy = validate_image(hazy, "hazy")
    t = validate_scalar_map(t, "t")
    a = validate_color_map(a, "a")
    hw = hazy.shape[:2]
    _check_same_shape(hw, t, "t")
    _check_same_shape(hw, a, "a")
    t3 = np.maximum(t, np.float32(MIN_TRANSMITTANCE))[:, :, None]
    j = (hazy - (1.0 - t[:, :, None]) * a) / t3
    return np.clip(j, 0.0, 1.0).astype(np.float32)

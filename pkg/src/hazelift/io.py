"""Image and depth map file I/O.

Supported formats:

- PNG, 8-bit or 16-bit, grayscale or RGB (via OpenCV). Values are divided
  by 255 or 65535 on load so everything downstream works in [0, 1].
- Binary PPM (P6), 8-bit or 16-bit big-endian per the netpbm convention.
- PFM, single channel, for floating point depth maps. Rows are stored
  bottom-to-top; a negative scale marks little-endian data.
"""

from __future__ import annotations

import os

import cv2
import numpy as np


def load_image(path) -> np.ndarray:
    """Load a color image as float32 (H, W, 3) in [0, 1]."""
    path = os.fspath(path)
    if path.lower().endswith(".ppm"):
        data = _load_ppm(path)
    else:
        raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise ValueError(f"cannot read image: {path}")
        data = _normalize(raw)
        if data.ndim == 3:
            data = data[:, :, :3][:, :, ::-1]  # BGR(A) -> RGB
    if data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    return np.ascontiguousarray(data, dtype=np.float32)


def save_image(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Save an (H, W, 3) float image in [0, 1] as PNG or binary PPM."""
    path = os.fspath(path)
    img = np.clip(np.asarray(image, dtype=np.float32), 0.0, 1.0)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    if path.lower().endswith(".ppm"):
        _save_ppm(path, img, bit_depth)
        return
    q = _quantize(img, bit_depth)
    if not cv2.imwrite(path, q[:, :, ::-1]):  # RGB -> BGR
        raise ValueError(f"cannot write image: {path}")


def load_map(path) -> np.ndarray:
    """Load a single-channel map (PFM or grayscale PNG) as float32 (H, W)."""
    path = os.fspath(path)
    if path.lower().endswith(".pfm"):
        return load_pfm(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"cannot read map: {path}")
    if raw.ndim == 3:
        raise ValueError(f"expected a single-channel map: {path}")
    return np.ascontiguousarray(_normalize(raw), dtype=np.float32)


def save_map(path, data: np.ndarray, bit_depth: int = 16) -> None:
    """Save an (H, W) float map in [0, 1] as grayscale PNG (or PFM)."""
    path = os.fspath(path)
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) map, got shape {arr.shape}")
    if path.lower().endswith(".pfm"):
        save_pfm(path, arr)
        return
    q = _quantize(np.clip(arr, 0.0, 1.0), bit_depth)
    if not cv2.imwrite(path, q):
        raise ValueError(f"cannot write map: {path}")


def _normalize(raw: np.ndarray) -> np.ndarray:
    if raw.dtype == np.uint8:
        return raw.astype(np.float32) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float32) / 65535.0
    if np.issubdtype(raw.dtype, np.floating):
        return raw.astype(np.float32)
    raise ValueError(f"unsupported pixel type: {raw.dtype}")


def _quantize(img: np.ndarray, bit_depth: int) -> np.ndarray:
    if bit_depth == 8:
        return np.rint(img * 255.0).astype(np.uint8)
    if bit_depth == 16:
        return np.rint(img * 65535.0).astype(np.uint16)
    raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")


# -- binary PPM (P6) --------------------------------------------------------

def _read_token(f) -> bytes:
    # Tokens are separated by whitespace; '#' starts a comment to EOL.
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise ValueError("truncated PPM header")
        if c == b"#":
            while c not in (b"\n", b""):
                c = f.read(1)
            continue
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def _load_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if _read_token(f) != b"P6":
            raise ValueError(f"not a binary PPM (P6) file: {path}")
        width = int(_read_token(f))
        height = int(_read_token(f))
        maxval = int(_read_token(f))
        if maxval <= 0 or maxval >= 65536:
            raise ValueError(f"bad PPM maxval {maxval}")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        count = width * height * 3
        data = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype)
        if data.size != count:
            raise ValueError(f"truncated PPM payload: {path}")
    img = data.reshape(height, width, 3).astype(np.float32) / float(maxval)
    return img


def _save_ppm(path, img: np.ndarray, bit_depth: int) -> None:
    q = _quantize(img, bit_depth)
    maxval = 255 if bit_depth == 8 else 65535
    if bit_depth == 16:
        q = q.astype(">u2")  # netpbm 16-bit payloads are big-endian
    with open(path, "wb") as f:
        f.write(f"P6\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii"))
        f.write(q.tobytes())


# -- PFM (single channel) ----------------------------------------------------

def load_pfm(path) -> np.ndarray:
    """Read a single-channel PFM file as float32 (H, W), top-down."""
    with open(path, "rb") as f:
        header = _read_token(f)
        if header == b"PF":
            raise ValueError(f"3-channel PFM not supported: {path}")
        if header != b"Pf":
            raise ValueError(f"not a PFM file: {path}")
        width = int(_read_token(f))
        height = int(_read_token(f))
        scale = float(_read_token(f))
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(width * height * 4), dtype=dtype)
        if data.size != width * height:
            raise ValueError(f"truncated PFM payload: {path}")
    # PFM rasters run bottom-to-top.
    return np.ascontiguousarray(data.reshape(height, width)[::-1], dtype=np.float32)


def save_pfm(path, data: np.ndarray) -> None:
    """Write a float32 (H, W) array as little-endian single-channel PFM."""
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) array, got shape {arr.shape}")
    with open(path, "wb") as f:
        f.write(f"Pf\n{arr.shape[1]} {arr.shape[0]}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(arr[::-1]).tobytes())

"""Training data synthesis from RGB-D pairs.

For each source image a scattering strength and a per-channel ambient
illumination are drawn once, the transmittance map is derived from
depth, and the hazy rendering is tiled into patches. Patches whose
hazy content is nearly uniform carry no usable signal and are dropped
by a grayscale variance gate.

Manifests are CSV files with header ``rgb,depth``; relative paths are
resolved against the manifest location. Sample shards are directories
of per-sample DHZW records plus an ``index.csv``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import container, io
from .imaging import synthesize_haze, transmittance_from_depth, validate_image


@dataclass
class SynthesisConfig:
    beta_range: tuple[float, float] = (0.5, 1.0)
    airlight_range: tuple[float, float] = (0.45, 1.0)
    omega: int = 64
    variance_threshold: float = 0.08
    patches_per_image: int | None = None
    seed: int = 0

    def __post_init__(self):
        bmin, bmax = self.beta_range
        amin, amax = self.airlight_range
        if not 0.0 < bmin <= bmax:
            raise ValueError(f"invalid beta range {self.beta_range}")
        if not 0.0 <= amin <= amax <= 1.0:
            raise ValueError(f"invalid airlight range {self.airlight_range}")
        if self.omega < 8:
            raise ValueError("omega must be >= 8")
        if self.variance_threshold < 0.0:
            raise ValueError("variance threshold must be >= 0")
        if self.patches_per_image is not None and self.patches_per_image < 1:
            raise ValueError("patches_per_image must be >= 1")


@dataclass
class TrainSample:
    """One training patch: the hazy rendering, its clean source, and the
    transmittance/illumination maps it was rendered with."""

    hazy: np.ndarray   # (w, w, 3)
    clean: np.ndarray  # (w, w, 3)
    t: np.ndarray      # (w, w)
    a: np.ndarray      # (w, w, 3), constant over the patch


@dataclass
class SynthesisReport:
    kept: int = 0
    rejected: int = 0
    errors: list[str] = field(default_factory=list)


def patch_variance(patch: np.ndarray) -> float:
    """Population variance of per-pixel grayscale (channel-mean) values."""
    p = np.asarray(patch)
    if p.size == 0:
        raise ValueError("empty patch")
    gray = p.mean(axis=2, dtype=np.float64) if p.ndim == 3 else p.astype(np.float64)
    return float(gray.var())


def read_manifest(path) -> list[tuple[str, str]]:
    """Parse a ``rgb,depth`` manifest CSV into absolute path pairs."""
    base = os.path.dirname(os.path.abspath(os.fspath(path)))
    pairs = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"rgb", "depth"} <= set(reader.fieldnames):
            raise ValueError(f"manifest must have 'rgb,depth' header: {path}")
        for row in reader:
            rgb = row["rgb"].strip()
            depth = row["depth"].strip()
            if not rgb or not depth:
                continue
            pairs.append(
                (
                    rgb if os.path.isabs(rgb) else os.path.join(base, rgb),
                    depth if os.path.isabs(depth) else os.path.join(base, depth),
                )
            )
    return pairs


def _grid_positions(extent: int, size: int, stride: int, offset: int) -> list[int]:
    if extent == size:
        return [0]
    pos = list(range(offset, extent - size + 1, stride))
    if not pos:
        pos = [0]
    if pos[-1] != extent - size:
        pos.append(extent - size)
    return pos


def generate_samples(
    pairs: list[tuple[str, str]], config: SynthesisConfig
) -> tuple[list[TrainSample], list[dict], SynthesisReport]:
    """Render hazy patches for every RGB-D pair.

    Returns the samples, a parallel list of provenance dicts, and a
    report with kept/rejected counts and per-file errors. One (beta,
    illumination) draw is made per source image so the illumination
    target is constant across all of its patches. Deterministic for a
    fixed seed and manifest order.
    """
    report = SynthesisReport()
    samples: list[TrainSample] = []
    provenance: list[dict] = []
    streams = np.random.SeedSequence(config.seed).spawn(len(pairs))
    w = config.omega
    stride = max(1, w // 2)
    for (rgb_path, depth_path), stream in zip(pairs, streams):
        rng = np.random.default_rng(stream)
        try:
            clean = validate_image(io.load_image(rgb_path), "rgb image")
            depth = io.load_map(depth_path)
            if clean.shape[:2] != depth.shape:
                raise ValueError(
                    f"rgb {clean.shape[:2]} and depth {depth.shape} dimensions differ"
                )
            if min(clean.shape[:2]) < w:
                raise ValueError(f"image smaller than patch size {w}")
            beta = float(rng.uniform(*config.beta_range))
            a_vec = rng.uniform(*config.airlight_range, size=3).astype(np.float32)
            t_map = transmittance_from_depth(depth, beta)
            a_map = np.broadcast_to(a_vec, clean.shape).copy()
            hazy = synthesize_haze(clean, t_map, a_map)
        except (OSError, ValueError) as exc:
            report.errors.append(f"{rgb_path}: {exc}")
            continue
        height, width = clean.shape[:2]
        off_y = int(rng.integers(0, stride)) if height - w >= stride else 0
        off_x = int(rng.integers(0, stride)) if width - w >= stride else 0
        kept_here = []
        for y in _grid_positions(height, w, stride, off_y):
            for x in _grid_positions(width, w, stride, off_x):
                hazy_patch = hazy[y : y + w, x : x + w]
                if patch_variance(hazy_patch) <= config.variance_threshold:
                    report.rejected += 1
                    continue
                kept_here.append((y, x))
        if config.patches_per_image is not None and len(kept_here) > config.patches_per_image:
            chosen = rng.choice(len(kept_here), config.patches_per_image, replace=False)
            extra = len(kept_here) - config.patches_per_image
            report.rejected += extra
            kept_here = [kept_here[i] for i in sorted(chosen)]
        for y, x in kept_here:
            samples.append(
                TrainSample(
                    hazy=hazy[y : y + w, x : x + w].copy(),
                    clean=clean[y : y + w, x : x + w].copy(),
                    t=t_map[y : y + w, x : x + w].copy(),
                    a=a_map[y : y + w, x : x + w].copy(),
                )
            )
            provenance.append(
                {"rgb": rgb_path, "y": y, "x": x, "beta": beta,
                 "a_r": float(a_vec[0]), "a_g": float(a_vec[1]), "a_b": float(a_vec[2])}
            )
            report.kept += 1
    return samples, provenance, report


# -- shard storage ------------------------------------------------------------

INDEX_NAME = "index.csv"
_INDEX_FIELDS = ["record", "rgb", "y", "x", "beta", "a_r", "a_g", "a_b"]


def write_shards(samples, provenance, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i, (sample, info) in enumerate(zip(samples, provenance)):
        record = f"{i:06d}.dhzw"
        container.write_arrays(
            os.path.join(out_dir, record),
            {"hazy": sample.hazy, "clean": sample.clean, "t": sample.t, "a": sample.a},
        )
        rows.append({"record": record, **{k: info[k] for k in _INDEX_FIELDS[1:]}})
    with open(os.path.join(out_dir, INDEX_NAME), "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=_INDEX_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def load_shards(shard_dir) -> list[TrainSample]:
    index_path = os.path.join(shard_dir, INDEX_NAME)
    if not os.path.isfile(index_path):
        raise ValueError(f"no {INDEX_NAME} in {shard_dir}")
    samples = []
    with open(index_path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            arrays = container.read_arrays(os.path.join(shard_dir, row["record"]))
            samples.append(
                TrainSample(
                    hazy=arrays["hazy"], clean=arrays["clean"],
                    t=arrays["t"], a=arrays["a"],
                )
            )
    return samples

"""hazelift: single-image dehazing by joint transmittance and
illumination estimation, with synthetic data generation, a small
trainable patch network, multilevel inference, edge-aware map
regularization and image quality metrics."""

__version__ = "0.1.0"

from .imaging import (
    recover_scene,
    synthesize_haze,
    transmittance_from_depth,
)
from .loss import LossConfig, airlight_weight, reconstruction_loss
from .metrics import ciede2000, psnr, ssim
from .multilevel import aggregate_levels, estimate_level, estimate_maps, level_count
from .network import DehazeNetwork, NetworkSpec, build_network
from .regularizer import EnergyProblem, build_system, regularize_maps, solve_cg
from .synth import SynthesisConfig, TrainSample, generate_samples, patch_variance
from .train import train_network

__all__ = [
    "__version__",
    "recover_scene",
    "synthesize_haze",
    "transmittance_from_depth",
    "LossConfig",
    "airlight_weight",
    "reconstruction_loss",
    "ciede2000",
    "psnr",
    "ssim",
    "aggregate_levels",
    "estimate_level",
    "estimate_maps",
    "level_count",
    "DehazeNetwork",
    "NetworkSpec",
    "build_network",
    "EnergyProblem",
    "build_system",
    "regularize_maps",
    "solve_cg",
    "SynthesisConfig",
    "TrainSample",
    "generate_samples",
    "patch_variance",
    "train_network",
]

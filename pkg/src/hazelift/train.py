"""Training loop for the patch network."""

from __future__ import annotations

import csv
import time

import numpy as np

from .loss import LossConfig, batched_loss
from .network import DehazeNetwork, NetworkSpec, build_network
from .nn.optim import Adagrad
from .synth import TrainSample


def _stack_samples(samples: list[TrainSample], omega: int):
    hazy = np.stack([s.hazy for s in samples])
    clean = np.stack([s.clean for s in samples])
    t_true = np.stack([s.t for s in samples])
    a_true = np.stack([s.a for s in samples])
    if hazy.shape[1:] != (omega, omega, 3):
        raise ValueError(
            f"samples are {hazy.shape[1:3]}, network expects {omega}x{omega}"
        )
    return hazy, clean, t_true, a_true


def train_network(
    samples: list[TrainSample],
    spec: NetworkSpec | None = None,
    loss_cfg: LossConfig | None = None,
    lr: float = 0.01,
    epochs: int = 150,
    batch_size: int = 32,
    seed: int = 0,
    log_path=None,
    verbose: bool = False,
) -> tuple[DehazeNetwork, list[float]]:
    """Train a fresh network on the sample set.

    The seed fixes both the weight init and the one-time sample
    shuffle; batches keep that order across epochs, so runs with the
    same seed produce identical loss curves and a zero learning rate
    leaves the curve exactly flat. Returns the network and the
    per-epoch mean sample loss.
    """
    if not samples:
        raise ValueError("training requires at least one sample")
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch size must be >= 1")
    spec = spec or NetworkSpec()
    loss_cfg = loss_cfg or LossConfig()
    network = build_network(spec, seed)
    optimizer = Adagrad(network.params(), lr=lr)

    hazy, clean, t_true, a_true = _stack_samples(samples, spec.omega)
    order = np.random.default_rng(seed).permutation(len(samples))
    hazy, clean = hazy[order], clean[order]
    t_true, a_true = t_true[order], a_true[order]
    hazy_cf = np.ascontiguousarray(hazy.transpose(0, 3, 1, 2))

    total = len(samples)
    curve: list[float] = []
    t_start = time.perf_counter()
    for epoch in range(epochs):
        loss_sum = 0.0
        for start in range(0, total, batch_size):
            stop = min(start + batch_size, total)
            nb = stop - start
            t_out, a_out = network.forward(hazy_cf[start:stop], train=True)
            loss, grad_t, grad_a = batched_loss(
                hazy[start:stop],
                clean[start:stop],
                t_true[start:stop],
                a_true[start:stop],
                t_out[:, 0],
                a_out.transpose(0, 2, 3, 1),
                loss_cfg,
            )
            loss_sum += loss
            optimizer.zero_grad()
            network.backward(
                grad_t[:, None] / nb,
                np.ascontiguousarray(grad_a.transpose(0, 3, 1, 2)) / nb,
            )
            optimizer.step()
        curve.append(loss_sum / total)
        if verbose:
            elapsed = time.perf_counter() - t_start
            print(
                f"epoch {epoch + 1}/{epochs}  loss {curve[-1]:.6f}  [{elapsed:.1f}s]",
                flush=True,
            )
    refresh_batchnorm_stats(network, hazy_cf, batch_size)
    if log_path is not None:
        write_loss_log(log_path, curve)
    return network, curve


def refresh_batchnorm_stats(network: DehazeNetwork, hazy_cf: np.ndarray,
                            batch_size: int) -> None:
    """Recompute batch-norm running statistics with frozen weights.

    The momentum-blended running stats lag the final weights; one
    deterministic pass over the training batches replaces them with the
    average per-batch statistics so inference matches the trained state.
    """
    bns = [block.bn for blocks in network.branches for block in blocks]
    sums = [None] * len(bns)
    batches = 0
    for start in range(0, len(hazy_cf), batch_size):
        network.forward(hazy_cf[start : start + batch_size], train=True)
        for i, bn in enumerate(bns):
            pair = np.stack([bn.last_batch_mean, bn.last_batch_var])
            sums[i] = pair if sums[i] is None else sums[i] + pair
        batches += 1
    for bn, total in zip(bns, sums):
        bn.running_mean = (total[0] / batches).astype(bn.running_mean.dtype)
        bn.running_var = (total[1] / batches).astype(bn.running_var.dtype)


def write_loss_log(path, curve: list[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_loss"])
        for i, value in enumerate(curve, start=1):
            writer.writerow([i, f"{value:.9f}"])


def reconstruction_residual(network: DehazeNetwork, samples: list[TrainSample]) -> float:
    """Mean per-pixel residual of rebuilding the hazy input from the
    clean image and the inference-mode predicted maps (absolute error
    summed over RGB, averaged over pixels and samples)."""
    hazy, clean, _, _ = _stack_samples(samples, network.spec.omega)
    hazy_cf = np.ascontiguousarray(hazy.transpose(0, 3, 1, 2))
    total = 0.0
    for start in range(0, len(samples), 32):
        stop = min(start + 32, len(samples))
        t_out, a_out = network.infer(hazy_cf[start:stop])
        t3 = t_out[:, :, :, None]
        rebuilt = clean[start:stop] * t3 + (1.0 - t3) * a_out.transpose(0, 2, 3, 1)
        residual = np.abs(hazy[start:stop] - rebuilt).sum(axis=3, dtype=np.float64)
        total += float(residual.mean(axis=(1, 2)).sum())
    return total / len(samples)

"""Training losses.

The reconstruction loss rebuilds the hazy observation three ways and
penalizes the absolute residual of each, per pixel, summed over RGB:

- term 1: true transmittance with the predicted illumination
- term 2: predicted transmittance with the true illumination
- term 3: both maps predicted

Terms 1 and 3 use the predicted illumination, whose influence on the
observation vanishes as transmittance rises, so they are attenuated by
:func:`airlight_weight` evaluated at the true transmittance. The total
is averaged over pixels (not pixel-channels).

An alternative plain MSE on the two maps is provided for comparison
runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def airlight_weight(t_true, gamma: float = 15.0):
    """Attenuation for illumination-dependent loss terms.

    ``1 - (exp(gamma*t) - 1) / (exp(gamma) - 1)``: equals 1 where no light
    is transmitted, 0 where transmission is total, and decreases strictly
    in between. Requires ``gamma >= 1``.
    """
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    t = np.asarray(t_true)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("transmittance values must lie in [0, 1]")
    return 1.0 - np.expm1(gamma * t) / np.expm1(gamma)


@dataclass
class LossConfig:
    """Which reconstruction terms are active, or plain map MSE instead."""

    gamma: float = 15.0
    l1: bool = True
    l2: bool = True
    l3: bool = True
    mse: bool = False

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.mse and (self.l1 or self.l2 or self.l3):
            raise ValueError("mse mode replaces the reconstruction terms")
        if not (self.mse or self.l1 or self.l2 or self.l3):
            raise ValueError("at least one loss term must be enabled")

    def tag(self) -> str:
        if self.mse:
            return "mse"
        return "+".join(
            name for name, on in (("l1", self.l1), ("l2", self.l2), ("l3", self.l3)) if on
        )

    @classmethod
    def from_tokens(cls, tokens: str, gamma: float = 15.0) -> "LossConfig":
        """Parse a CLI toggle list such as 'l1,l2,l3' or 'mse'."""
        parts = [p.strip().lower() for p in tokens.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty loss selection")
        if parts == ["mse"]:
            return cls(gamma=gamma, l1=False, l2=False, l3=False, mse=True)
        known = {"l1", "l2", "l3"}
        unknown = set(parts) - known
        if unknown:
            raise ValueError(f"unknown loss tokens: {sorted(unknown)}")
        return cls(
            gamma=gamma, l1="l1" in parts, l2="l2" in parts, l3="l3" in parts, mse=False
        )


def _check_batched(name, arr, shape):
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")


def batched_loss(hazy, clean, t_true, a_true, t_pred, a_pred, cfg: LossConfig):
    """Loss summed over a batch, with gradients for the predictions.

    Inputs are channel-last: images/illumination ``(B, H, W, 3)``,
    transmittance ``(B, H, W)``. Returns ``(loss_sum, grad_t, grad_a)``
    where ``loss_sum`` is the sum of per-sample losses; divide by B for
    the batch mean (gradients likewise).
    """
    hazy = np.asarray(hazy)
    b, h, w = hazy.shape[:3]
    _check_batched("hazy", hazy, (b, h, w, 3))
    for name, arr in (("clean", clean), ("a_true", a_true), ("a_pred", a_pred)):
        _check_batched(name, np.asarray(arr), (b, h, w, 3))
    for name, arr in (("t_true", t_true), ("t_pred", t_pred)):
        _check_batched(name, np.asarray(arr), (b, h, w))

    if cfg.mse:
        dt = t_pred - t_true
        da = a_pred - a_true
        n_t = h * w
        n_a = h * w * 3
        loss = float(np.sum(dt.astype(np.float64) ** 2) / n_t)
        loss += float(np.sum(da.astype(np.float64) ** 2) / n_a)
        return loss, (2.0 / n_t) * dt, (2.0 / n_a) * da

    n = h * w
    t_true3 = t_true[..., None]
    t_pred3 = t_pred[..., None]
    eta = airlight_weight(t_true, cfg.gamma).astype(hazy.dtype)
    eta3 = eta[..., None]

    loss = 0.0
    grad_t = np.zeros_like(t_pred)
    grad_a = np.zeros_like(a_pred)
    if cfg.l1:
        r1 = hazy - clean * t_true3 - (1.0 - t_true3) * a_pred
        loss += float(np.sum(eta[..., None] * np.abs(r1), dtype=np.float64))
        grad_a -= eta3 * np.sign(r1) * (1.0 - t_true3)
    if cfg.l2:
        r2 = hazy - clean * t_pred3 - (1.0 - t_pred3) * a_true
        loss += float(np.sum(np.abs(r2), dtype=np.float64))
        grad_t += np.sum(np.sign(r2) * (a_true - clean), axis=-1)
    if cfg.l3:
        r3 = hazy - clean * t_pred3 - (1.0 - t_pred3) * a_pred
        loss += float(np.sum(eta[..., None] * np.abs(r3), dtype=np.float64))
        grad_t += eta * np.sum(np.sign(r3) * (a_pred - clean), axis=-1)
        grad_a -= eta3 * np.sign(r3) * (1.0 - t_pred3)
    return loss / n, grad_t / n, grad_a / n


def reconstruction_loss(hazy, clean, t_true, a_true, t_pred, a_pred, cfg: LossConfig):
    """Single-sample loss; see :func:`batched_loss` for conventions."""
    loss, gt, ga = batched_loss(
        hazy[None], clean[None], t_true[None], a_true[None],
        t_pred[None], a_pred[None], cfg,
    )
    return loss, gt[0], ga[0]

"""Layers for the patch network: conv, transposed conv, batch norm,
tanh and sigmoid, each with a hand-written backward pass.

Layers cache what backward needs during a training-mode forward and
raise if backward is called first. All parameter tensors live in
:class:`Param` objects so the optimizer can walk them uniformly.
"""

from __future__ import annotations

import numpy as np

from .backend import corr_bwd_input, corr_bwd_weight, corr_fwd
from .kernels_numpy import out_size


class Param:
    """A learnable array with its gradient and Adagrad accumulator."""

    __slots__ = ("value", "grad", "accum")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)
        self.accum = np.zeros_like(value)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2d:
    """Strided cross-correlation with bias."""

    def __init__(self, in_ch, out_ch, kernel, stride, pad, rng, dtype=np.float32):
        if min(in_ch, out_ch, kernel, stride) < 1 or pad < 0:
            raise ValueError("invalid conv geometry")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride, self.pad = kernel, stride, pad
        fan = in_ch * kernel * kernel, out_ch * kernel * kernel
        self.weight = Param(
            glorot_uniform(rng, (out_ch, in_ch, kernel, kernel), *fan, dtype)
        )
        self.bias = Param(np.zeros(out_ch, dtype=dtype))
        self._x = None

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        ho = out_size(h, self.kernel, self.stride, self.pad)
        wo = out_size(w, self.kernel, self.stride, self.pad)
        if ho < 1 or wo < 1:
            raise ValueError(f"conv output would be empty for input {h}x{w}")
        return ho, wo

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.shape[1] != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {x.shape[1]}")
        self.out_hw(x.shape[2], x.shape[3])
        x = x.astype(self.weight.value.dtype, copy=False)
        if train:
            self._x = x
        y = corr_fwd(x, self.weight.value, self.stride, self.pad)
        return y + self.bias.value[None, :, None, None]

    def backward(self, gy: np.ndarray, need_input_grad: bool = True):
        if self._x is None:
            raise RuntimeError("backward called before a training-mode forward")
        x = self._x
        self.weight.grad += corr_bwd_weight(
            x, gy, self.stride, self.pad, self.kernel, self.kernel
        )
        self.bias.grad += gy.sum(axis=(0, 2, 3))
        if not need_input_grad:
            return None
        return corr_bwd_input(
            gy, self.weight.value, self.stride, self.pad, x.shape[2], x.shape[3]
        )

    def params(self):
        return [self.weight, self.bias]

    def named_state(self):
        return {"weight": self.weight.value, "bias": self.bias.value}


class ConvTranspose2d:
    """Strided transposed convolution (adjoint of Conv2d's cross-correlation).

    Weights are stored (out_ch, in_ch, kH, kW); spatial output size is
    ``(H - 1)*stride - 2*pad + kernel``.
    """

    def __init__(self, in_ch, out_ch, kernel, stride, pad, rng, dtype=np.float32):
        if min(in_ch, out_ch, kernel, stride) < 1 or pad < 0:
            raise ValueError("invalid transposed-conv geometry")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride, self.pad = kernel, stride, pad
        fan = in_ch * kernel * kernel, out_ch * kernel * kernel
        self.weight = Param(
            glorot_uniform(rng, (out_ch, in_ch, kernel, kernel), *fan, dtype)
        )
        self.bias = Param(np.zeros(out_ch, dtype=dtype))
        self._x = None

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        ho = (h - 1) * self.stride - 2 * self.pad + self.kernel
        wo = (w - 1) * self.stride - 2 * self.pad + self.kernel
        if ho < 1 or wo < 1:
            raise ValueError(f"transposed conv output would be empty for {h}x{w}")
        return ho, wo

    def _w_swapped(self) -> np.ndarray:
        return np.ascontiguousarray(self.weight.value.transpose(1, 0, 2, 3))

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.shape[1] != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {x.shape[1]}")
        ho, wo = self.out_hw(x.shape[2], x.shape[3])
        x = x.astype(self.weight.value.dtype, copy=False)
        if train:
            self._x = x
        y = corr_bwd_input(x, self._w_swapped(), self.stride, self.pad, ho, wo)
        return y + self.bias.value[None, :, None, None]

    def backward(self, gy: np.ndarray, need_input_grad: bool = True):
        if self._x is None:
            raise RuntimeError("backward called before a training-mode forward")
        gw = corr_bwd_weight(gy, self._x, self.stride, self.pad, self.kernel, self.kernel)
        self.weight.grad += gw.transpose(1, 0, 2, 3)
        self.bias.grad += gy.sum(axis=(0, 2, 3))
        if not need_input_grad:
            return None
        return corr_fwd(gy, self._w_swapped(), self.stride, self.pad)

    def params(self):
        return [self.weight, self.bias]

    def named_state(self):
        return {"weight": self.weight.value, "bias": self.bias.value}


class BatchNorm2d:
    """Per-channel batch normalization with running statistics.

    Training mode normalizes by biased batch statistics over (N, H, W)
    and blends them into the running buffers; inference mode uses the
    running buffers only.
    """

    def __init__(self, channels, momentum=0.9, eps=1e-5, dtype=np.float32):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.scale = Param(np.ones(channels, dtype=dtype))
        self.shift = Param(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.last_batch_mean = None
        self.last_batch_var = None
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        x = x.astype(self.scale.value.dtype, copy=False)
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.last_batch_mean = mean
            self.last_batch_var = var
            self.running_mean = (
                self.momentum * self.running_mean + (1.0 - self.momentum) * mean
            ).astype(x.dtype)
            self.running_var = (
                self.momentum * self.running_var + (1.0 - self.momentum) * var
            ).astype(x.dtype)
        else:
            mean, var = self.running_mean, self.running_var
        invstd = 1.0 / np.sqrt(var + np.asarray(self.eps, dtype=x.dtype))
        xhat = (x - mean[None, :, None, None]) * invstd[None, :, None, None]
        if train:
            self._cache = (xhat, invstd)
        return self.scale.value[None, :, None, None] * xhat + self.shift.value[
            None, :, None, None
        ]

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before a training-mode forward")
        xhat, invstd = self._cache
        m = gy.shape[0] * gy.shape[2] * gy.shape[3]
        self.shift.grad += gy.sum(axis=(0, 2, 3))
        self.scale.grad += (gy * xhat).sum(axis=(0, 2, 3))
        gxhat = gy * self.scale.value[None, :, None, None]
        sum_g = gxhat.sum(axis=(0, 2, 3), keepdims=True)
        sum_gx = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        return (invstd[None, :, None, None] / m) * (
            m * gxhat - sum_g - xhat * sum_gx
        )

    def params(self):
        return [self.scale, self.shift]

    def named_state(self):
        return {
            "scale": self.scale.value,
            "shift": self.shift.value,
            "running_mean": self.running_mean,
            "running_var": self.running_var,
        }


class Tanh:
    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        y = np.tanh(x)
        if train:
            self._y = y
        return y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._y is None:
            raise RuntimeError("backward called before a training-mode forward")
        return gy * (1.0 - self._y * self._y)

    def params(self):
        return []


class Sigmoid:
    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        y = 1.0 / (1.0 + np.exp(-x))
        if train:
            self._y = y
        return y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._y is None:
            raise RuntimeError("backward called before a training-mode forward")
        return gy * self._y * (1.0 - self._y)

    def params(self):
        return []


def make_activation(kind: str):
    if kind == "tanh":
        return Tanh()
    if kind == "sigmoid":
        return Sigmoid()
    raise ValueError(f"unknown activation kind: {kind!r}")

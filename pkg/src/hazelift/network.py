"""The two-branch patch network.

A shared stack of strided convolutions extracts features from a hazy
patch; two transposed-convolution branches decode them back to full
patch resolution, one producing the transmittance map and one the
illumination map. Skip connections add trunk activations into branch
activations at matching resolutions. Branch layers are followed by
batch norm; every layer uses tanh except the final sigmoid of each
branch, so both outputs land in (0, 1).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import container
from .nn.layers import BatchNorm2d, Conv2d, ConvTranspose2d, make_activation


@dataclass
class ConvLayerSpec:
    out_ch: int
    kernel: int
    stride: int
    pad: int


@dataclass
class BranchLayerSpec(ConvLayerSpec):
    # 1-based trunk layer whose activation is added after this block
    skip_from: int | None = None


def _default_branch(out_ch: int) -> list[BranchLayerSpec]:
    # skips feed the two mid-resolution blocks; a full-resolution skip
    # would inject raw image texture right before the output head,
    # which fights the smooth map targets
    return [
        BranchLayerSpec(32, 4, 2, 1, skip_from=3),
        BranchLayerSpec(16, 3, 1, 1, skip_from=2),
        BranchLayerSpec(8, 4, 2, 1, skip_from=None),
        BranchLayerSpec(out_ch, 3, 1, 1, skip_from=None),
    ]


@dataclass
class NetworkSpec:
    """Topology of the trunk and the two decoder branches.

    Stride-2 stages use 4x4 kernels so that a conv followed by the
    matching transposed conv restores spatial size exactly on even
    inputs; 3x3 kernels cannot do that without output padding.
    """

    omega: int = 64
    trunk: list[ConvLayerSpec] = field(
        default_factory=lambda: [
            ConvLayerSpec(8, 3, 1, 1),
            ConvLayerSpec(16, 4, 2, 1),
            ConvLayerSpec(32, 3, 1, 1),
            ConvLayerSpec(32, 4, 2, 1),
        ]
    )
    t_branch: list[BranchLayerSpec] = field(default_factory=lambda: _default_branch(1))
    a_branch: list[BranchLayerSpec] = field(default_factory=lambda: _default_branch(3))

    def validate(self) -> None:
        if self.omega < 8:
            raise ValueError("omega must be >= 8")
        if not self.trunk:
            raise ValueError("trunk must have at least one layer")
        for name, branch, out_ch in (
            ("t_branch", self.t_branch, 1),
            ("a_branch", self.a_branch, 3),
        ):
            if len(branch) != len(self.trunk):
                raise ValueError(
                    f"{name} must have as many layers as the trunk "
                    f"({len(branch)} != {len(self.trunk)})"
                )
            if branch[-1].out_ch != out_ch:
                raise ValueError(f"{name} must end with {out_ch} channel(s)")
            for layer in branch:
                if layer.skip_from is not None and not (
                    1 <= layer.skip_from <= len(self.trunk)
                ):
                    raise ValueError(f"skip_from {layer.skip_from} out of range")
        self.trace_shapes()

    def trace_shapes(self):
        """Static shape check; returns per-trunk-layer (ch, h, w)."""
        ch, h, w = 3, self.omega, self.omega
        trunk_shapes = []
        for k, layer in enumerate(self.trunk):
            h = (h + 2 * layer.pad - layer.kernel) // layer.stride + 1
            w = (w + 2 * layer.pad - layer.kernel) // layer.stride + 1
            if h < 1 or w < 1:
                raise ValueError(f"trunk layer {k + 1} output is empty")
            ch = layer.out_ch
            trunk_shapes.append((ch, h, w))
        for name, branch in (("t_branch", self.t_branch), ("a_branch", self.a_branch)):
            bch, bh, bw = trunk_shapes[-1]
            for k, layer in enumerate(branch):
                bh = (bh - 1) * layer.stride - 2 * layer.pad + layer.kernel
                bw = (bw - 1) * layer.stride - 2 * layer.pad + layer.kernel
                if bh < 1 or bw < 1:
                    raise ValueError(f"{name} layer {k + 1} output is empty")
                bch = layer.out_ch
                if layer.skip_from is not None:
                    sk = trunk_shapes[layer.skip_from - 1]
                    if sk != (bch, bh, bw):
                        raise ValueError(
                            f"{name} layer {k + 1} skip source shape {sk} does not "
                            f"match block output {(bch, bh, bw)}"
                        )
            if (bh, bw) != (self.omega, self.omega):
                raise ValueError(
                    f"{name} ends at {bh}x{bw}, expected {self.omega}x{self.omega}"
                )
        return trunk_shapes

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        raw = json.loads(text)
        spec = cls(
            omega=raw["omega"],
            trunk=[ConvLayerSpec(**d) for d in raw["trunk"]],
            t_branch=[BranchLayerSpec(**d) for d in raw["t_branch"]],
            a_branch=[BranchLayerSpec(**d) for d in raw["a_branch"]],
        )
        spec.validate()
        return spec

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "NetworkSpec":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(f.read())


class _BranchBlock:
    def __init__(self, tconv, bn, act, skip_from):
        self.tconv = tconv
        self.bn = bn
        self.act = act
        self.skip_from = skip_from


class DehazeNetwork:
    """Maps (N, 3, omega, omega) hazy patches to transmittance and
    illumination maps, both in (0, 1)."""

    def __init__(self, spec: NetworkSpec, seed: int, dtype=np.float32):
        spec.validate()
        self.spec = spec
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.trunk = []
        in_ch = 3
        for layer in spec.trunk:
            conv = Conv2d(
                in_ch, layer.out_ch, layer.kernel, layer.stride, layer.pad, rng, dtype
            )
            self.trunk.append((conv, make_activation("tanh")))
            in_ch = layer.out_ch
        trunk_out = in_ch
        self.branches = []
        for branch_spec in (spec.t_branch, spec.a_branch):
            blocks = []
            in_ch = trunk_out
            for k, layer in enumerate(branch_spec):
                tconv = ConvTranspose2d(
                    in_ch, layer.out_ch, layer.kernel, layer.stride, layer.pad, rng, dtype
                )
                bn = BatchNorm2d(layer.out_ch, dtype=dtype)
                act = make_activation(
                    "sigmoid" if k == len(branch_spec) - 1 else "tanh"
                )
                blocks.append(_BranchBlock(tconv, bn, act, layer.skip_from))
                in_ch = layer.out_ch
            self.branches.append(blocks)
        self._trunk_acts = None

    # -- forward / backward ---------------------------------------------

    def forward(self, x: np.ndarray, train: bool):
        """Returns (t, a) with shapes (N, 1, w, w) and (N, 3, w, w)."""
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (N, 3, H, W) input, got {x.shape}")
        if x.shape[2] != self.spec.omega or x.shape[3] != self.spec.omega:
            raise ValueError(
                f"network expects {self.spec.omega}x{self.spec.omega} patches, "
                f"got {x.shape[2]}x{x.shape[3]}"
            )
        x = x.astype(self.dtype, copy=False)
        trunk_acts = []
        # center [0,1] inputs to [-1,1]; keeps the tanh trunk in its
        # responsive range
        h = (x - np.asarray(0.5, dtype=self.dtype)) * np.asarray(2.0, dtype=self.dtype)
        for conv, act in self.trunk:
            h = act.forward(conv.forward(h, train), train)
            trunk_acts.append(h)
        if train:
            self._trunk_acts = trunk_acts
        outputs = []
        for blocks in self.branches:
            h = trunk_acts[-1]
            for block in blocks:
                h = block.tconv.forward(h, train)
                h = block.bn.forward(h, train)
                h = block.act.forward(h, train)
                if block.skip_from is not None:
                    h = h + trunk_acts[block.skip_from - 1]
            outputs.append(h)
        return outputs[0], outputs[1]

    def backward(self, gt: np.ndarray, ga: np.ndarray) -> None:
        """Accumulates parameter gradients from output gradients."""
        if self._trunk_acts is None:
            raise RuntimeError("backward called before a training-mode forward")
        trunk_grads = [np.zeros_like(a) for a in self._trunk_acts]
        for blocks, gout in zip(self.branches, (gt, ga)):
            g = gout.astype(self.dtype, copy=False)
            for block in reversed(blocks):
                if block.skip_from is not None:
                    trunk_grads[block.skip_from - 1] += g
                g = block.act.backward(g)
                g = block.bn.backward(g)
                g = block.tconv.backward(g)
            trunk_grads[-1] += g
        g = trunk_grads[-1]
        for k in range(len(self.trunk) - 1, -1, -1):
            conv, act = self.trunk[k]
            g = act.backward(g)
            g = conv.backward(g, need_input_grad=k > 0)
            if k > 0:
                g = g + trunk_grads[k - 1]

    def infer(self, patches: np.ndarray):
        """Inference on (N, 3, w, w) patches -> (t (N, w, w), a (N, 3, w, w))."""
        t, a = self.forward(patches, train=False)
        return t[:, 0], a

    # -- parameters and serialization ------------------------------------

    def params(self):
        out = []
        for conv, _ in self.trunk:
            out.extend(conv.params())
        for blocks in self.branches:
            for block in blocks:
                out.extend(block.tconv.params())
                out.extend(block.bn.params())
        return out

    def named_state(self) -> dict[str, np.ndarray]:
        state = {}
        for i, (conv, _) in enumerate(self.trunk):
            for key, arr in conv.named_state().items():
                state[f"trunk.{i}.{key}"] = arr
        for b, blocks in enumerate(self.branches):
            prefix = "t_branch" if b == 0 else "a_branch"
            for i, block in enumerate(blocks):
                for key, arr in block.tconv.named_state().items():
                    state[f"{prefix}.{i}.tconv.{key}"] = arr
                for key, arr in block.bn.named_state().items():
                    state[f"{prefix}.{i}.bn.{key}"] = arr
        return state

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        expected = self.named_state()
        missing = set(expected) - set(state)
        if missing:
            raise ValueError(f"weight file is missing entries: {sorted(missing)[:4]}")
        for name, target in expected.items():
            arr = np.asarray(state[name], dtype=target.dtype)
            if arr.shape != target.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} != {target.shape}"
                )
            target[...] = arr

    def save_weights(self, path) -> None:
        container.write_arrays(path, self.named_state())

    def load_weights(self, path) -> None:
        self.load_state(container.read_arrays(path))


def build_network(spec: NetworkSpec, seed: int) -> DehazeNetwork:
    """Construct and initialize the network; same seed, same weights."""
    return DehazeNetwork(spec, seed)

"""Residual denoising CNN with hand-written forward and backward passes.

Architecture: a pixel-wise stage of four 1x1 convolutions with ReLU mixes the
raw non-local feature channels, followed by a trunk of 3x3 conv + batch norm
+ ReLU layers and a final 3x3 conv.  The network predicts the noise residual;
the denoised frame is the noisy input minus the prediction.  Convolutions use
zero padding (k-1)/2 so spatial dimensions are preserved throughout.

The no-patch baseline drops the 1x1 stage and feeds the noisy frame straight
into the trunk, which is then just a plain residual denoising CNN.

Everything is numpy.  Convolutions lower to matrix products (the window view
is contracted with the kernel tensor, which BLAS turns into a GEMM), so the
backward pass is the exact adjoint and analytic gradients can be validated
against finite differences to tight tolerances in float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "NetworkConfig",
    "Network",
    "default_config",
    "loss_mse",
    "loss_mse_grad",
    "loss_and_gradients",
    "save_weights",
    "load_weights",
]


@dataclass(frozen=True)
class NetworkConfig:
    """Shape of the model; widths triple for color in the default preset."""

    in_channels: int
    out_channels: int
    stage1_width: int = 32
    stage1_depth: int = 4
    trunk_width: int = 64
    trunk_depth: int = 14
    no_patch: bool = False
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.trunk_depth < 1:
            raise ValueError("trunk_depth must be >= 1")
        if not self.no_patch and self.stage1_depth < 1:
            raise ValueError("stage1_depth must be >= 1")
        if not self.no_patch and self.stage1_width < 1:
            raise ValueError("stage1_width must be >= 1")
        if self.no_patch and self.in_channels != self.out_channels:
            raise ValueError(
                "no_patch expects the noisy frame as input: "
                f"in_channels {self.in_channels} != out_channels {self.out_channels}"
            )

    @property
    def num_conv_layers(self) -> int:
        stage1 = 0 if self.no_patch else self.stage1_depth
        return stage1 + self.trunk_depth + 1


def default_config(num_matches: int, channels: int, no_patch: bool = False) -> NetworkConfig:
    """Published operating point: 32/64 widths for grayscale, tripled for color."""
    scale = 3 if channels == 3 else 1
    if no_patch:
        num_matches = 1
    return NetworkConfig(
        in_channels=num_matches * channels,
        out_channels=channels,
        stage1_width=32 * scale,
        trunk_width=64 * scale,
        trunk_depth=14,
        no_patch=no_patch,
    )


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Channels-last window unfold: (B,H,W,C) -> (B*H*W, k*k*C), zero padded."""
    p = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    view = sliding_window_view(xp, (k, k), axis=(1, 2))  # (B,H,W,C,k,k)
    b, h, w, c = x.shape
    return np.ascontiguousarray(view.transpose(0, 1, 2, 4, 5, 3)).reshape(
        b * h * w, k * k * c
    )


class Conv2d:
    """Layers run channels-last internally; the public weight layout stays
    (out, in, k, k).  Training mode caches the unfolded input so the weight
    gradient reuses it (memory cost ~ 9*Cin floats per pixel for 3x3)."""

    def __init__(self, in_ch, out_ch, kernel, bias, rng, dtype):
        if kernel not in (1, 3):
            raise ValueError(f"kernel size must be 1 or 3, got {kernel}")
        std = np.sqrt(2.0 / (kernel * kernel * in_ch))
        self.w = (std * rng.standard_normal((out_ch, in_ch, kernel, kernel))).astype(dtype)
        self.b = np.zeros(out_ch, dtype=dtype) if bias else None
        self.gw = None
        self.gb = None
        self._cols = None

    def forward(self, x, training):
        k = self.w.shape[2]
        cout, cin = self.w.shape[:2]
        b, h, w_dim, _ = x.shape
        if k == 1:
            cols = x.reshape(-1, cin)
        else:
            cols = _im2col(x, k)
        self._cols = cols if training else None
        # (u, v, cin) unfold order matches this kernel reshape
        wl = self.w.transpose(2, 3, 1, 0).reshape(-1, cout)
        y = cols @ wl
        if self.b is not None:
            y += self.b
        return y.reshape(b, h, w_dim, cout)

    def backward(self, dy):
        if self._cols is None:
            raise RuntimeError("backward requires a forward pass in training mode")
        k = self.w.shape[2]
        cout, cin = self.w.shape[:2]
        b, h, w_dim, _ = dy.shape
        dy2 = dy.reshape(-1, cout)
        gw = (self._cols.T @ dy2).reshape(k, k, cin, cout)
        self.gw = np.ascontiguousarray(gw.transpose(3, 2, 0, 1))
        if self.b is not None:
            self.gb = dy2.sum(axis=0, dtype=np.float64).astype(self.b.dtype)
        if k == 1:
            dx2 = dy2 @ self.w.reshape(cout, cin)
        else:
            # transposed convolution: correlate dy with flipped kernels
            wl_back = (
                self.w[:, :, ::-1, ::-1].transpose(2, 3, 0, 1).reshape(-1, cin)
            )
            dx2 = _im2col(dy, k) @ wl_back
        return dx2.reshape(b, h, w_dim, cin)

    def params(self):
        out = [("weight", self.w)]
        if self.b is not None:
            out.append(("bias", self.b))
        return out

    def grads(self):
        out = [("weight", self.gw)]
        if self.b is not None:
            out.append(("bias", self.gb))
        return out


class BatchNorm2d:
    """Per-channel normalization; batch statistics while training, running
    statistics at inference.  Running stats copy the first batch seen, then
    follow an exponential moving average."""

    def __init__(self, channels, eps, momentum, dtype):
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.num_updates = np.zeros(1, dtype=dtype)
        self.eps = eps
        self.momentum = momentum
        self.ggamma = None
        self.gbeta = None
        self._cache = None

    def forward(self, x, training):
        if training:
            mean = x.mean(axis=(0, 1, 2), dtype=np.float64)
            var = x.var(axis=(0, 1, 2), dtype=np.float64)
            count = x.shape[0] * x.shape[1] * x.shape[2]
            unbiased = var * (count / max(count - 1, 1))
            if self.num_updates[0] == 0:
                self.running_mean = mean.astype(self.gamma.dtype)
                self.running_var = unbiased.astype(self.gamma.dtype)
            else:
                m = self.momentum
                self.running_mean = ((1 - m) * self.running_mean + m * mean).astype(
                    self.gamma.dtype
                )
                self.running_var = ((1 - m) * self.running_var + m * unbiased).astype(
                    self.gamma.dtype
                )
            self.num_updates[0] += 1
            inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
            xhat = (x - mean.astype(x.dtype)) * inv_std
            self._cache = (xhat, inv_std)
        else:
            inv_std = (1.0 / np.sqrt(self.running_var.astype(np.float64) + self.eps)).astype(
                x.dtype
            )
            xhat = (x - self.running_mean) * inv_std
            self._cache = None
        return self.gamma * xhat + self.beta

    def backward(self, dy):
        if self._cache is None:
            raise RuntimeError("backward requires a forward pass in training mode")
        xhat, inv_std = self._cache
        count = dy.shape[0] * dy.shape[1] * dy.shape[2]
        self.gbeta = dy.sum(axis=(0, 1, 2), dtype=np.float64).astype(self.beta.dtype)
        self.ggamma = (dy * xhat).sum(axis=(0, 1, 2), dtype=np.float64).astype(
            self.gamma.dtype
        )
        dxhat = dy * self.gamma
        sum_dxhat = dxhat.sum(axis=(0, 1, 2))
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 1, 2))
        return (inv_std / count) * (
            count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat
        )

    def params(self):
        return [
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("running_mean", self.running_mean),
            ("running_var", self.running_var),
            ("num_updates", self.num_updates),
        ]

    def grads(self):
        return [("gamma", self.ggamma), ("beta", self.gbeta)]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x, training):
        self._mask = (x > 0) if training else None
        return np.maximum(x, 0)

    def backward(self, dy):
        if self._mask is None:
            raise RuntimeError("backward requires a forward pass in training mode")
        return dy * self._mask

    def params(self):
        return []

    def grads(self):
        return []


class Network:
    """Layer stack built from a NetworkConfig; owns parameters and gradients."""

    def __init__(self, cfg: NetworkConfig, seed=0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        layers = []
        width = cfg.in_channels
        if not cfg.no_patch:
            for _ in range(cfg.stage1_depth):
                layers.append(Conv2d(width, cfg.stage1_width, 1, True, rng, dtype))
                layers.append(ReLU())
                width = cfg.stage1_width
        for _ in range(cfg.trunk_depth):
            layers.append(Conv2d(width, cfg.trunk_width, 3, False, rng, dtype))
            layers.append(BatchNorm2d(cfg.trunk_width, cfg.bn_eps, cfg.bn_momentum, dtype))
            layers.append(ReLU())
            width = cfg.trunk_width
        layers.append(Conv2d(width, cfg.out_channels, 3, True, rng, dtype))
        self.layers = layers

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Residual prediction for input (B, in_channels, H, W)."""
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise ValueError(
                f"expected (B, {self.cfg.in_channels}, H, W) input, got {x.shape}"
            )
        x = np.ascontiguousarray(x.transpose(0, 2, 3, 1), dtype=self.dtype)
        for layer in self.layers:
            x = layer.forward(x, training)
        return np.ascontiguousarray(x.transpose(0, 3, 1, 2))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Propagate the loss gradient; per-layer parameter grads are stored."""
        dy = np.ascontiguousarray(dy.transpose(0, 2, 3, 1), dtype=self.dtype)
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return np.ascontiguousarray(dy.transpose(0, 3, 1, 2))

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params():
                out[f"layer{i:02d}.{name}"] = arr
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads():
                out[f"layer{i:02d}.{name}"] = arr
        return out

    def set_param(self, name: str, value: np.ndarray) -> None:
        idx, attr = name.split(".")
        layer = self.layers[int(idx[5:])]
        mapping = {
            "weight": "w",
            "bias": "b",
            "gamma": "gamma",
            "beta": "beta",
            "running_mean": "running_mean",
            "running_var": "running_var",
            "num_updates": "num_updates",
        }
        current = getattr(layer, mapping[attr])
        if current.shape != value.shape:
            raise ValueError(f"{name}: shape {value.shape} != {current.shape}")
        setattr(layer, mapping[attr], np.ascontiguousarray(value, dtype=self.dtype))

    def trainable_names(self) -> list[str]:
        skip = ("running_mean", "running_var", "num_updates")
        return [n for n in self.named_params() if not n.endswith(skip)]


def loss_mse(residual: np.ndarray, noise: np.ndarray) -> float:
    """Mean over all elements of (residual - noise)^2, double precision."""
    if residual.shape != noise.shape:
        raise ValueError(f"shape mismatch {residual.shape} vs {noise.shape}")
    diff = residual.astype(np.float64) - noise.astype(np.float64)
    return float(np.mean(diff * diff))


def loss_mse_grad(residual: np.ndarray, noise: np.ndarray) -> np.ndarray:
    if residual.shape != noise.shape:
        raise ValueError(f"shape mismatch {residual.shape} vs {noise.shape}")
    return (2.0 / residual.size) * (residual - noise)


def loss_and_gradients(net: Network, x: np.ndarray, noise: np.ndarray):
    """One training-mode forward/backward; returns (loss, grads by name)."""
    residual = net.forward(x, training=True)
    loss = loss_mse(residual, noise)
    net.backward(loss_mse_grad(residual, noise).astype(net.dtype))
    return loss, net.named_grads()


_WEIGHTS_MAGIC = b"NLDW"
_WEIGHTS_VERSION = 1
_CONFIG_STRUCT = struct.Struct("<iiiiiiBxxxdd")


def save_weights(net: Network, path: str) -> None:
    """Self-describing little-endian weight file; arrays stored as float32."""
    params = net.named_params()
    with open(path, "wb") as f:
        f.write(_WEIGHTS_MAGIC)
        f.write(struct.pack("<I", _WEIGHTS_VERSION))
        cfg = net.cfg
        f.write(
            _CONFIG_STRUCT.pack(
                cfg.in_channels,
                cfg.out_channels,
                cfg.stage1_width,
                cfg.stage1_depth,
                cfg.trunk_width,
                cfg.trunk_depth,
                int(cfg.no_patch),
                cfg.bn_eps,
                cfg.bn_momentum,
            )
        )
        f.write(struct.pack("<I", len(params)))
        for name, arr in params.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            encoded = name.encode()
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", data.ndim))
            f.write(struct.pack(f"<{data.ndim}i", *data.shape))
            f.write(data.tobytes())


def load_weights(path: str) -> Network:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != _WEIGHTS_MAGIC:
        raise ValueError(f"{path}: not a weights file (magic {blob[:4]!r})")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _WEIGHTS_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    fields = _CONFIG_STRUCT.unpack_from(blob, 8)
    cfg = NetworkConfig(
        in_channels=fields[0],
        out_channels=fields[1],
        stage1_width=fields[2],
        stage1_depth=fields[3],
        trunk_width=fields[4],
        trunk_depth=fields[5],
        no_patch=bool(fields[6]),
        bn_eps=fields[7],
        bn_momentum=fields[8],
    )
    offset = 8 + _CONFIG_STRUCT.size
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    net = Network(cfg, seed=0, dtype=np.float32)
    expected = net.named_params()
    seen = set()
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode()
            offset += name_len
            (ndim,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}i", blob, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(blob, "<f4", count=size, offset=offset)
            if arr.size != size:
                raise ValueError("truncated array body")
            offset += 4 * size
            if name not in expected:
                raise ValueError(f"unknown array {name!r}")
            net.set_param(name, arr.reshape(shape))
            seen.add(name)
    except (struct.error, ValueError) as exc:
        raise ValueError(f"{path}: truncated or corrupt weights file ({exc})") from exc
    missing = set(expected) - seen
    if missing:
        raise ValueError(f"{path}: missing arrays {sorted(missing)}")
    return net

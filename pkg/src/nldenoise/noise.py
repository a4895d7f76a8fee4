"""Seeded synthesis of the three noise models used for training and evaluation.

Reproducibility contract: all randomness flows through numpy's Philox
counter-based generator keyed by the caller's seed, and Gaussian variates are
produced by an explicit Box-Muller transform of Philox uniforms.  Identical
(input, spec, seed) therefore yields bit-identical noise on every platform
and for any worker count.  Outputs are never clamped; training targets the
residual and clamping would bias the noise distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .video import Video

__all__ = [
    "NoiseSpec",
    "add_awgn",
    "add_box_correlated",
    "add_salt_pepper_uniform",
]

KINDS = ("awgn", "box_correlated", "salt_pepper_uniform")

SeedLike = "int | tuple[int, ...]"


@dataclass(frozen=True)
class NoiseSpec:
    """One of the supported noise models plus its parameters and seed."""

    kind: str
    sigma: float | None = None
    fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}, expected one of {KINDS}")
        if self.kind in ("awgn", "box_correlated"):
            if self.sigma is None or self.sigma < 0:
                raise ValueError(f"{self.kind} requires sigma >= 0, got {self.sigma}")
            if self.fraction is not None:
                raise ValueError(f"{self.kind} takes no fraction")
        else:
            if self.fraction is None or not 0.0 <= self.fraction <= 1.0:
                raise ValueError(f"salt_pepper_uniform requires fraction in [0, 1], got {self.fraction}")
            if self.sigma is not None:
                raise ValueError("salt_pepper_uniform takes no sigma")

    def apply(self, u: Video, seed=None) -> Video:
        """Apply this noise model to ``u``; ``seed`` overrides the stored one."""
        seed = self.seed if seed is None else seed
        if self.kind == "awgn":
            return add_awgn(u, self.sigma, seed)
        if self.kind == "box_correlated":
            return add_box_correlated(u, self.sigma, seed)
        return add_salt_pepper_uniform(u, self.fraction, seed)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Box-Muller transform of Philox uniforms; float64."""
    n = int(np.prod(shape))
    half = (n + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], log is finite
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return z[:n].reshape(shape)


def add_awgn(u: Video, sigma: float, seed) -> Video:
    """v = u + r with r i.i.d. Gaussian of standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    r = _standard_normal(_rng(seed), u.shape)
    return Video(u.data + sigma * r)


def _box3(field: np.ndarray) -> np.ndarray:
    """Normalized 3x3 box filter per frame and channel, reflected borders."""
    padded = np.pad(field, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="reflect")
    out = np.zeros_like(field)
    for dy in range(3):
        for dx in range(3):
            out += padded[:, :, dy : dy + field.shape[2], dx : dx + field.shape[3]]
    return out / 9.0


def add_box_correlated(u: Video, sigma: float, seed) -> Video:
    """Gaussian noise correlated by a 3x3 box kernel, interior std ``sigma``.

    White noise of std 3*sigma is filtered by the normalized box, so each
    output tap has variance 9 * (1/9)^2 * (3*sigma)^2 = sigma^2.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    white = 3.0 * sigma * _standard_normal(_rng(seed), u.shape)
    return Video(u.data + _box3(white))


def add_salt_pepper_uniform(u: Video, fraction: float, seed) -> Video:
    """Each pixel is replaced, with probability ``fraction``, by U[0, 255]."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    rng = _rng(seed)
    replace = rng.random(u.shape) < fraction
    values = rng.random(u.shape) * 255.0
    return Video(np.where(replace, values, u.data))

"""Procedural clips for desk-scale experiments.

Random band-limited textures stand in for natural content: a coarse and a
fine filtered-noise layer mixed per clip.  Static clips repeat one frame;
translating clips slide a crop window across a larger texture at an integer
velocity, so exact cross-frame matches exist inside a large enough search
window.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .video import Video

__all__ = ["make_texture", "make_static_clip", "make_translating_clip"]


def make_texture(
    rng: np.random.Generator,
    rows: int,
    cols: int,
    channels: int = 1,
    coarse_sigma: float = 10.0,
    fine_sigma: float = 1.5,
    fine_amp: float = 0.08,
) -> np.ndarray:
    """(C, H, W) float32 texture with mean ~128 and healthy contrast."""
    luma = gaussian_filter(rng.standard_normal((rows, cols)), coarse_sigma)
    luma = luma + fine_amp * np.abs(gaussian_filter(
        rng.standard_normal((rows, cols)), fine_sigma
    ))
    luma = (luma - luma.mean()) / max(luma.std(), 1e-9)
    out = np.empty((channels, rows, cols), dtype=np.float32)
    for c in range(channels):
        if channels == 1:
            chan = luma
        else:
            tint = gaussian_filter(rng.standard_normal((rows, cols)), coarse_sigma)
            tint = (tint - tint.mean()) / max(tint.std(), 1e-9)
            chan = 0.8 * luma + 0.2 * tint
        out[c] = np.clip(128.0 + 48.0 * chan, 4.0, 251.0)
    return out


def make_static_clip(
    seed, frames: int, rows: int, cols: int, channels: int = 1
) -> Video:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    tex = make_texture(rng, rows, cols, channels)
    return Video(np.broadcast_to(tex, (frames,) + tex.shape).copy())


def make_translating_clip(
    seed,
    frames: int,
    rows: int,
    cols: int,
    channels: int = 1,
    velocity: tuple[int, int] = (1, 0),
) -> Video:
    """Global integer translation of (vx, vy) pixels per frame."""
    vx, vy = velocity
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    tex = make_texture(
        rng, rows + abs(vy) * (frames - 1), cols + abs(vx) * (frames - 1), channels
    )
    out = np.empty((frames, channels, rows, cols), dtype=np.float32)
    y0 = abs(vy) * (frames - 1) if vy < 0 else 0
    x0 = abs(vx) * (frames - 1) if vx < 0 else 0
    for t in range(frames):
        y = y0 + vy * t
        x = x0 + vx * t
        out[t] = tex[:, y : y + rows, x : x + cols]
    return Video(out)

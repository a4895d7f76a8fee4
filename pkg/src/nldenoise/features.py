"""Non-local feature gathering and the pixel-mean baseline.

The feature tensor stacks, per pixel, the center-pixel values of its n
matches as channels in match-major order: all C channels of match 1, then
match 2, and so on.  Match 1 is the pixel itself in free mode, so channels
0..C-1 reproduce the input video exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .search import MatchTable
from .video import Video

__all__ = ["NlFeatures", "gather_features", "nl_pixel_mean"]


@dataclass
class NlFeatures:
    """(F, n*C, H, W) float32 tensor plus its layout bookkeeping."""

    data: np.ndarray
    num_matches: int
    channels: int
    frame_indices: np.ndarray


def gather_features(v: Video, m: MatchTable) -> NlFeatures:
    """Collect match center-pixel values from ``v`` into the network input.

    Values are always read from ``v`` (the noisy video), including when the
    match positions were found on an oracle guide.
    """
    if m.video_shape != (v.frames, v.rows, v.cols):
        raise ValueError(
            f"match table for video shape {m.video_shape} does not fit "
            f"video (T, H, W) = {(v.frames, v.rows, v.cols)}"
        )
    px = m.positions[..., 0]
    py = m.positions[..., 1]
    pt = m.positions[..., 2]
    # advanced indexing yields (F, H, W, n, C); reorder to match-major channels
    gathered = v.data[pt, :, py, px]
    f, h, w, n, c = gathered.shape
    data = np.ascontiguousarray(
        gathered.transpose(0, 3, 4, 1, 2).reshape(f, n * c, h, w)
    )
    return NlFeatures(
        data=data,
        num_matches=m.n,
        channels=v.channels,
        frame_indices=m.frame_indices.copy(),
    )


def nl_pixel_mean(f: NlFeatures) -> np.ndarray:
    """Average the n gathered values per pixel and channel: (F, C, H, W)."""
    fr, nc, h, w = f.data.shape
    stacked = f.data.reshape(fr, f.num_matches, f.channels, h, w)
    return stacked.mean(axis=1, dtype=np.float64).astype(np.float32)

"""End-to-end denoising: search, gather, network inference, subtraction."""

from __future__ import annotations

import numpy as np

from .features import gather_features
from .network import Network
from .search import SearchConfig, search_fast
from .video import Video

__all__ = ["compute_features", "denoise_sequence", "nl_mean_sequence"]


def compute_features(
    noisy: Video, search_cfg: SearchConfig, frames=None, no_patch: bool = False
) -> np.ndarray:
    """Network input tensor (F, n*C, H, W) for the requested frames."""
    if no_patch:
        idx = np.arange(noisy.frames) if frames is None else np.asarray(frames)
        return noisy.data[idx]
    table = search_fast(noisy, search_cfg, frames=frames)
    return gather_features(noisy, table).data


def denoise_sequence(
    noisy: Video, net: Network, search_cfg: SearchConfig, frames=None
) -> Video:
    """Denoise the requested frames (default: all) frame by frame."""
    expected = noisy.channels * (1 if net.cfg.no_patch else search_cfg.num_neighbors)
    if net.cfg.in_channels != expected:
        raise ValueError(
            f"network expects {net.cfg.in_channels} input channels but the "
            f"search configuration produces {expected} "
            f"({search_cfg.num_neighbors} matches x {noisy.channels} channels)"
        )
    if net.cfg.out_channels != noisy.channels:
        raise ValueError(
            f"network outputs {net.cfg.out_channels} channels, video has {noisy.channels}"
        )
    idx = np.arange(noisy.frames) if frames is None else np.asarray(frames)
    out = np.empty((len(idx), noisy.channels, noisy.rows, noisy.cols), dtype=np.float32)
    for i, t in enumerate(idx):
        feats = compute_features(noisy, search_cfg, frames=[t], no_patch=net.cfg.no_patch)
        residual = net.forward(feats, training=False)
        out[i] = noisy.data[t] - residual[0]
    return Video(out)


def nl_mean_sequence(noisy: Video, search_cfg: SearchConfig, frames=None) -> Video:
    """Non-local pixel mean baseline: average the gathered match values."""
    from .features import nl_pixel_mean

    table = search_fast(noisy, search_cfg, frames=frames)
    return Video(nl_pixel_mean(gather_features(noisy, table)))

"""PSNR and SSIM quality metrics with per-sequence reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .video import Video

__all__ = ["psnr", "ssim", "MetricReport", "sequence_metrics"]

PEAK = 255.0

# canonical single-scale SSIM constants
_K1 = 0.01
_K2 = 0.03
_WINDOW = 11
_SIGMA = 1.5


def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """10*log10(255^2 / MSE) in dB; +inf for identical inputs."""
    ref = np.asarray(ref)
    test = np.asarray(test)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    mse = np.mean(
        (ref.astype(np.float64) - test.astype(np.float64)) ** 2, dtype=np.float64
    )
    if mse == 0.0:
        return math.inf
    return float(10.0 * math.log10(PEAK * PEAK / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    from numpy.lib.stride_tricks import sliding_window_view

    view = sliding_window_view(img, window.shape)
    return np.tensordot(view, window, axes=([2, 3], [0, 1]))


def _ssim_single(ref: np.ndarray, test: np.ndarray) -> float:
    window = _gaussian_window(_WINDOW, _SIGMA)
    x = ref.astype(np.float64)
    y = test.astype(np.float64)
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    var_x = _filter_valid(x * x, window) - mu_x**2
    var_y = _filter_valid(y * y, window) - mu_y**2
    cov = _filter_valid(x * y, window) - mu_x * mu_y
    c1 = (_K1 * PEAK) ** 2
    c2 = (_K2 * PEAK) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """Structural similarity, 11x11 Gaussian window (sigma 1.5), peak 255.

    Accepts (H, W) or (C, H, W); color scores average the per-channel values.
    The mean runs over valid window positions only.
    """
    ref = np.asarray(ref)
    test = np.asarray(test)
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    if ref.ndim == 2:
        ref = ref[None]
        test = test[None]
    if ref.ndim != 3:
        raise ValueError(f"expected (H, W) or (C, H, W), got shape {ref.shape}")
    if ref.shape[1] < _WINDOW or ref.shape[2] < _WINDOW:
        raise ValueError(
            f"frame {ref.shape[1]}x{ref.shape[2]} smaller than the "
            f"{_WINDOW}x{_WINDOW} SSIM window"
        )
    return float(np.mean([_ssim_single(r, t) for r, t in zip(ref, test)]))


@dataclass
class MetricReport:
    """Per-frame PSNR/SSIM lists and their sequence means."""

    frame_psnr: list[float]
    frame_ssim: list[float] | None

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.frame_psnr))

    @property
    def mean_ssim(self) -> float | None:
        if self.frame_ssim is None:
            return None
        return float(np.mean(self.frame_ssim))

    def format_table(self) -> str:
        lines = ["frame      psnr      ssim"]
        for i, p in enumerate(self.frame_psnr):
            s = "" if self.frame_ssim is None else f"{self.frame_ssim[i]:10.4f}"
            lines.append(f"{i:5d}{p:10.2f}{s}")
        s = "" if self.frame_ssim is None else f"{self.mean_ssim:10.4f}"
        lines.append(f" mean{self.mean_psnr:10.2f}{s}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["frame,psnr,ssim"]
        for i, p in enumerate(self.frame_psnr):
            s = "" if self.frame_ssim is None else repr(self.frame_ssim[i])
            lines.append(f"{i},{p!r},{s}")
        return "\n".join(lines) + "\n"


def sequence_metrics(ref: Video, test: Video, with_ssim: bool = True) -> MetricReport:
    """Frame-by-frame PSNR (and optionally SSIM) of ``test`` against ``ref``."""
    if ref.shape != test.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {test.shape}")
    psnrs = [psnr(ref.data[t], test.data[t]) for t in range(ref.frames)]
    ssims = None
    if with_ssim:
        ssims = [ssim(ref.data[t], test.data[t]) for t in range(ref.frames)]
    return MetricReport(frame_psnr=psnrs, frame_ssim=ssims)

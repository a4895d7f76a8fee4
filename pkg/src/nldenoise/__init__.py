"""Non-local patch-search video denoising toolkit.

Pipeline: a seeded noise model corrupts a clean sequence, a spatio-temporal
patch search collects per-pixel non-local feature vectors, and a residual CNN
(trained from scratch here) predicts the noise to subtract.  A brute-force
search oracle, analytic-vs-numeric gradient checks and desk-scale training
experiments verify each stage.
"""

from .features import NlFeatures, gather_features, nl_pixel_mean
from .metrics import MetricReport, psnr, sequence_metrics, ssim
from .noise import NoiseSpec, add_awgn, add_box_correlated, add_salt_pepper_uniform
from .search import (
    MatchTable,
    PixelPos,
    SearchConfig,
    insert_ordered,
    load_match_table,
    patch_distance,
    save_match_table,
    search_fast,
    search_naive,
)
from .video import Video, read_sequence, reflect_index, sample_extended, write_sequence

__version__ = "0.1.0"

__all__ = [
    "Video",
    "read_sequence",
    "write_sequence",
    "sample_extended",
    "reflect_index",
    "NoiseSpec",
    "add_awgn",
    "add_box_correlated",
    "add_salt_pepper_uniform",
    "PixelPos",
    "SearchConfig",
    "MatchTable",
    "patch_distance",
    "insert_ordered",
    "search_naive",
    "search_fast",
    "save_match_table",
    "load_match_table",
    "NlFeatures",
    "gather_features",
    "nl_pixel_mean",
    "psnr",
    "ssim",
    "MetricReport",
    "sequence_metrics",
]

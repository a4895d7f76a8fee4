"""Timing harness comparing the two search implementations.

Times the per-pixel search cost on a band of rows of the center frame (full
frames at large patch sizes are out of reach for the brute-force scan on one
CPU core; per-pixel work is unchanged by banding because candidate windows
still clamp against the full frame).  Reports the fitted log-log slope of
time versus patch size per implementation, which separates the quadratic
brute-force cost from the linear column-decomposition cost.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .search import SearchConfig
from .video import Video

__all__ = ["BenchResult", "time_search_band", "run_bench", "fit_slope"]


@dataclass
class BenchResult:
    rows: list[dict]
    slope_naive: float
    slope_fast: float

    def to_csv(self) -> str:
        lines = ["impl,patch_size,spatial_window,temporal_window,pixels,seconds"]
        for r in self.rows:
            lines.append(
                f"{r['impl']},{r['patch_size']},{r['spatial_window']},"
                f"{r['temporal_window']},{r['pixels']},{r['seconds']!r}"
            )
        lines.append(f"slope,naive,,,,{self.slope_naive!r}")
        lines.append(f"slope,fast,,,,{self.slope_fast!r}")
        return "\n".join(lines) + "\n"


def time_search_band(
    v: Video,
    cfg: SearchConfig,
    impl: str,
    frame: int,
    y_lo: int,
    y_hi: int,
    reps: int = 1,
) -> float:
    """Best-of-reps wall time for one frame's row band; compiles first."""
    cfg.validate_for(v)
    frames = np.array([frame], dtype=np.int64)
    n = cfg.num_neighbors
    pos = np.empty((1, y_hi - y_lo, v.cols, n, 3), dtype=np.int32)
    dist = np.empty((1, y_hi - y_lo, v.cols, n), dtype=np.float32)
    s, ws, wt = cfg.patch_size, cfg.spatial_window, cfg.temporal_window
    src = v.data

    def call():
        if impl == "naive":
            if cfg.mode == "free":
                _kernels.search_naive_free(src, frames, y_lo, y_hi, s, ws, wt, n, pos, dist)
            else:
                _kernels.search_naive_opf(src, frames, y_lo, y_hi, s, ws, wt, pos, dist)
        else:
            seg = max(_kernels.SEGMENT_LEN, s)
            if cfg.mode == "free":
                _kernels.search_fast_free(
                    src, frames, y_lo, y_hi, s, ws, wt, n, seg, pos, dist
                )
            else:
                _kernels.search_fast_opf(src, frames, y_lo, y_hi, s, ws, wt, seg, pos, dist)

    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        call()
        best = min(best, time.perf_counter() - t0)
    return best


def fit_slope(patch_sizes, seconds) -> float:
    return float(np.polyfit(np.log(patch_sizes), np.log(seconds), 1)[0])


def _warmup(v: Video, mode: str):
    """Trigger kernel compilation outside the timed region."""
    tiny = Video(v.data[:2, :, :8, :8].copy())
    cfg = SearchConfig(
        patch_size=3,
        spatial_window=3,
        temporal_window=3,
        num_neighbors=3 if mode == "one_per_frame" else 2,
        mode=mode,
    )
    time_search_band(tiny, cfg, "naive", 0, 0, 8)
    time_search_band(tiny, cfg, "fast", 0, 0, 8)


def run_bench(
    v: Video,
    patch_sizes,
    spatial_window: int = 41,
    temporal_window: int = 15,
    mode: str = "one_per_frame",
    band_rows: int = 12,
    reps: int = 1,
) -> BenchResult:
    """Grid of (implementation, patch size) timings on the center frame."""
    _warmup(v, mode)
    frame = v.frames // 2
    y_lo = max(0, v.rows // 2 - band_rows // 2)
    y_hi = min(v.rows, y_lo + band_rows)
    pixels = (y_hi - y_lo) * v.cols
    rows = []
    times = {"naive": [], "fast": []}
    for s in patch_sizes:
        n = temporal_window if mode == "one_per_frame" else 5
        cfg = SearchConfig(
            patch_size=s,
            spatial_window=spatial_window,
            temporal_window=temporal_window,
            num_neighbors=n,
            mode=mode,
        )
        for impl in ("naive", "fast"):
            secs = time_search_band(v, cfg, impl, frame, y_lo, y_hi, reps)
            times[impl].append(secs)
            rows.append(
                {
                    "impl": impl,
                    "patch_size": s,
                    "spatial_window": spatial_window,
                    "temporal_window": temporal_window,
                    "pixels": pixels,
                    "seconds": secs,
                }
            )
    slope_naive = fit_slope(patch_sizes, times["naive"]) if len(patch_sizes) > 1 else float("nan")
    slope_fast = fit_slope(patch_sizes, times["fast"]) if len(patch_sizes) > 1 else float("nan")
    return BenchResult(rows=rows, slope_naive=slope_naive, slope_fast=slope_fast)

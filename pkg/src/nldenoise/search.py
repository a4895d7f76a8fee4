"""Spatio-temporal patch search: brute-force reference and fast implementation.

For every pixel the search finds the n best-matching patches inside a
w_s x w_s x w_t window of candidate centers around it.  Two modes:

* ``free``: the n closest candidates anywhere in the window, sorted by
  distance; entry 0 is always the pixel itself with distance 0.
* ``one_per_frame``: the single best candidate in each frame of the temporal
  window (n = w_t), ordered by temporal window slot; the center slot is the
  pixel itself.  Window slots that fall off the sequence are mirrored to the
  reflected frame, so border pixels still produce w_t entries.

Candidate centers are clamped to the frame spatially; patch pixels that
overhang a border are read through symmetric reflection.  When an oracle
guide video is configured, distances are measured on the guide while gathered
feature values still come from the noisy input.

``search_fast`` must agree with ``search_naive`` on positions exactly and on
distances to within float accumulation error; this equivalence is the main
correctness gate of the module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .video import Video

__all__ = [
    "PixelPos",
    "SearchConfig",
    "MatchTable",
    "patch_distance",
    "insert_ordered",
    "search_naive",
    "search_fast",
    "save_match_table",
    "load_match_table",
]

MODES = ("free", "one_per_frame")


class PixelPos(NamedTuple):
    x: int
    y: int
    t: int


@dataclass(frozen=True)
class SearchConfig:
    """Parameters of the 3D patch search."""

    patch_size: int = 41
    spatial_window: int = 41
    temporal_window: int = 15
    num_neighbors: int = 15
    mode: str = "one_per_frame"
    oracle_guide: Video | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("patch_size", "spatial_window", "temporal_window"):
            value = getattr(self, name)
            if value < 1 or value % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {value}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.num_neighbors < 1:
            raise ValueError(f"num_neighbors must be >= 1, got {self.num_neighbors}")
        if self.mode == "one_per_frame":
            if self.num_neighbors != self.temporal_window:
                raise ValueError(
                    "one_per_frame requires num_neighbors == temporal_window, "
                    f"got {self.num_neighbors} != {self.temporal_window}"
                )
        elif self.num_neighbors > self.spatial_window**2 * self.temporal_window:
            raise ValueError(
                f"num_neighbors {self.num_neighbors} exceeds window capacity "
                f"{self.spatial_window**2 * self.temporal_window}"
            )

    def validate_for(self, v: Video) -> None:
        """Reject configurations that cannot fill the table for some pixel."""
        if self.oracle_guide is not None and self.oracle_guide.shape != v.shape:
            raise ValueError(
                f"oracle guide shape {self.oracle_guide.shape} does not match "
                f"video shape {v.shape}"
            )
        if self.mode == "free":
            half = self.spatial_window // 2
            corner = (
                min(v.cols, half + 1)
                * min(v.rows, half + 1)
                * min(v.frames, self.temporal_window // 2 + 1)
            )
            if self.num_neighbors > corner:
                raise ValueError(
                    f"num_neighbors {self.num_neighbors} exceeds the "
                    f"{corner} candidates available at frame corners"
                )


@dataclass
class MatchTable:
    """Per-pixel ordered match lists for a set of frames of one video.

    ``positions`` has shape (F, H, W, n, 3) storing (x, y, t) as int32;
    ``dists`` has shape (F, H, W, n) float32.  ``frame_indices`` maps the
    leading axis to frame numbers of the source video.
    """

    video_shape: tuple[int, int, int]  # (T, H, W)
    n: int
    mode: str
    frame_indices: np.ndarray
    positions: np.ndarray
    dists: np.ndarray

    def entries(self, t: int, y: int, x: int) -> list[tuple[PixelPos, float]]:
        """Match list at one pixel, for tests and inspection."""
        (fi,) = np.where(self.frame_indices == t)[0]
        return [
            (PixelPos(*self.positions[fi, y, x, k]), float(self.dists[fi, y, x, k]))
            for k in range(self.n)
        ]


def _reflect_indices(idx: np.ndarray, size: int) -> np.ndarray:
    if size == 1:
        return np.zeros_like(idx)
    period = 2 * (size - 1)
    m = np.mod(idx, period)
    return np.where(m >= size, period - m, m)


def patch_distance(v: Video, p: PixelPos, q: PixelPos, s: int) -> float:
    """Squared L2 distance between the s x s patches centered at p and q.

    Sums over all channels; out-of-frame samples are reflected.
    """
    if s < 1 or s % 2 == 0:
        raise ValueError(f"patch size must be odd and >= 1, got {s}")
    hs = s // 2
    offsets = np.arange(-hs, hs + 1)
    ya = _reflect_indices(p.y + offsets, v.rows)
    yb = _reflect_indices(q.y + offsets, v.rows)
    xa = _reflect_indices(p.x + offsets, v.cols)
    xb = _reflect_indices(q.x + offsets, v.cols)
    a = v.data[p.t][:, ya[:, None], xa[None, :]].astype(np.float64)
    b = v.data[q.t][:, yb[:, None], xb[None, :]].astype(np.float64)
    return float(np.sum((a - b) ** 2))


def insert_ordered(
    table: list[tuple[float, PixelPos]], p: PixelPos, d: float
) -> list[tuple[float, PixelPos]]:
    """Shift-insert (d, p) into a distance-sorted table of fixed length.

    A candidate enters only when strictly better than the last entry and
    lands after every entry with distance <= d, so ties keep earlier
    candidates.  Returns the table, mutated in place.
    """
    n = len(table)
    if d < table[n - 1][0]:
        i = n - 1
        while i >= 1 and table[i - 1][0] > d:
            table[i] = table[i - 1]
            i -= 1
        table[i] = (d, p)
    return table


def _resolve_frames(v: Video, frames) -> np.ndarray:
    if frames is None:
        return np.arange(v.frames, dtype=np.int64)
    out = np.asarray(frames, dtype=np.int64).reshape(-1)
    if out.size == 0 or np.any(out < 0) or np.any(out >= v.frames):
        raise ValueError(f"frame indices {out} out of range for T={v.frames}")
    return out


def _run(v: Video, cfg: SearchConfig, frames, fast: bool, segment_len: int) -> MatchTable:
    cfg.validate_for(v)
    frame_idx = _resolve_frames(v, frames)
    src = v.data if cfg.oracle_guide is None else cfg.oracle_guide.data
    F = frame_idx.shape[0]
    n = cfg.num_neighbors
    pos = np.empty((F, v.rows, v.cols, n, 3), dtype=np.int32)
    dist = np.empty((F, v.rows, v.cols, n), dtype=np.float32)
    s, ws, wt = cfg.patch_size, cfg.spatial_window, cfg.temporal_window
    h = v.rows
    if fast:
        seg = max(segment_len, s)
        if cfg.mode == "free":
            _kernels.search_fast_free(src, frame_idx, 0, h, s, ws, wt, n, seg, pos, dist)
        else:
            _kernels.search_fast_opf(src, frame_idx, 0, h, s, ws, wt, seg, pos, dist)
    else:
        if cfg.mode == "free":
            _kernels.search_naive_free(src, frame_idx, 0, h, s, ws, wt, n, pos, dist)
        else:
            _kernels.search_naive_opf(src, frame_idx, 0, h, s, ws, wt, pos, dist)
    return MatchTable(
        video_shape=(v.frames, v.rows, v.cols),
        n=n,
        mode=cfg.mode,
        frame_indices=frame_idx,
        positions=pos,
        dists=dist,
    )


def search_naive(v: Video, cfg: SearchConfig, frames=None) -> MatchTable:
    """Brute-force search: every candidate distance evaluated patch-wise."""
    return _run(v, cfg, frames, fast=False, segment_len=0)


def search_fast(
    v: Video, cfg: SearchConfig, frames=None, segment_len: int = _kernels.SEGMENT_LEN
) -> MatchTable:
    """Column-decomposition search; same results as search_naive, O(s) per candidate."""
    return _run(v, cfg, frames, fast=True, segment_len=segment_len)


_TABLE_MAGIC = b"NLMT"
_TABLE_VERSION = 1
_ENTRY_DTYPE = np.dtype([("x", "<i4"), ("y", "<i4"), ("t", "<i4"), ("d", "<f4")])


def save_match_table(table: MatchTable, path: str) -> None:
    """Write a full-video match table as a flat binary file.

    Header: magic, version, T, H, W, n, mode; then per pixel (frame-major,
    then row, column, entry) records of little-endian int32 x, y, t and
    float32 distance.
    """
    t_dim, h, w = table.video_shape
    if table.frame_indices.shape[0] != t_dim or np.any(
        table.frame_indices != np.arange(t_dim)
    ):
        raise ValueError("only tables covering every frame in order can be saved")
    header = np.array(
        [t_dim, h, w, table.n, MODES.index(table.mode)], dtype="<i4"
    )
    entries = np.empty((t_dim, h, w, table.n), dtype=_ENTRY_DTYPE)
    entries["x"] = table.positions[..., 0]
    entries["y"] = table.positions[..., 1]
    entries["t"] = table.positions[..., 2]
    entries["d"] = table.dists
    with open(path, "wb") as f:
        f.write(_TABLE_MAGIC)
        f.write(np.array([_TABLE_VERSION], dtype="<i4").tobytes())
        f.write(header.tobytes())
        f.write(entries.tobytes())


def load_match_table(path: str) -> MatchTable:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != _TABLE_MAGIC:
        raise ValueError(f"{path}: not a match table file (magic {blob[:4]!r})")
    version = int(np.frombuffer(blob, "<i4", count=1, offset=4)[0])
    if version != _TABLE_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    t_dim, h, w, n, mode_code = np.frombuffer(blob, "<i4", count=5, offset=8)
    count = int(t_dim) * int(h) * int(w) * int(n)
    if len(blob) < 28 + count * _ENTRY_DTYPE.itemsize:
        raise ValueError(f"{path}: truncated table body")
    body = np.frombuffer(blob, _ENTRY_DTYPE, count=count, offset=28)
    entries = body.reshape(int(t_dim), int(h), int(w), int(n))
    positions = np.stack([entries["x"], entries["y"], entries["t"]], axis=-1)
    return MatchTable(
        video_shape=(int(t_dim), int(h), int(w)),
        n=int(n),
        mode=MODES[int(mode_code)],
        frame_indices=np.arange(int(t_dim), dtype=np.int64),
        positions=np.ascontiguousarray(positions),
        dists=np.ascontiguousarray(entries["d"]),
    )

"""Video tensor type, boundary extension and PGM/PPM sequence I/O.

A video is a planar float32 tensor of shape (frames, channels, rows, cols)
holding raw 8-bit intensities as reals in the nominal [0, 255] range.  All
other modules operate on this type.  Out-of-range coordinates (patches
overhanging a border, temporal windows at sequence ends) are resolved by
symmetric reflection without edge repetition: index -1 maps to 1, index T
maps to T - 2.
"""

from __future__ import annotations

import os
import re

import numpy as np

__all__ = [
    "Video",
    "reflect_index",
    "sample_extended",
    "read_sequence",
    "write_sequence",
]


class VideoFormatError(ValueError):
    """Raised for malformed or unsupported image files."""


class Video:
    """Immutable planar video: float32 array of shape (T, C, H, W), C in {1, 3}."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 4:
            raise ValueError(f"expected 4-d (T, C, H, W) array, got shape {data.shape}")
        t, c, h, w = data.shape
        if t < 1 or h < 1 or w < 1:
            raise ValueError(f"empty video dimensions {data.shape}")
        if c not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {c}")
        data.setflags(write=False)
        self.data = data

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def rows(self) -> int:
        return self.data.shape[2]

    @property
    def cols(self) -> int:
        return self.data.shape[3]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, Video) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        t, c, h, w = self.shape
        return f"Video(T={t}, C={c}, H={h}, W={w})"


def reflect_index(i: int, size: int) -> int:
    """Map a signed index into [0, size) by symmetric reflection without repeat.

    -1 -> 1, size -> size - 2; reflection repeats for far out-of-range
    indices.  A dimension of size 1 absorbs every index.
    """
    if size == 1:
        return 0
    period = 2 * (size - 1)
    i %= period
    if i >= size:
        i = period - i
    return i


def sample_extended(v: Video, x: int, y: int, t: int, c: int = 0) -> float:
    """Value of ``v`` at (x, y, t, c) with reflected out-of-range coordinates."""
    return float(
        v.data[
            reflect_index(t, v.frames),
            c,
            reflect_index(y, v.rows),
            reflect_index(x, v.cols),
        ]
    )


_MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}
_TOKEN_RE = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_netpbm(path: str) -> np.ndarray:
    """Read one binary PGM (P5) or PPM (P6) file as (C, H, W) float32."""
    with open(path, "rb") as f:
        blob = f.read()
    magic = blob[:2]
    if magic not in _MAGIC_CHANNELS:
        raise VideoFormatError(f"{path}: unsupported magic number {magic!r}")
    channels = _MAGIC_CHANNELS[magic]

    pos = 2
    fields = []
    for _ in range(3):
        m = _TOKEN_RE.match(blob, pos)
        if m is None:
            raise VideoFormatError(f"{path}: truncated header")
        fields.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(x) for x in fields)
    except ValueError:
        raise VideoFormatError(f"{path}: non-numeric header fields {fields}") from None
    if maxval != 255:
        raise VideoFormatError(f"{path}: only 8-bit maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval

    count = width * height * channels
    raster = blob[pos : pos + count]
    if len(raster) != count:
        raise VideoFormatError(
            f"{path}: expected {count} raster bytes, found {len(raster)}"
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float32)
    if channels == 1:
        return pixels.reshape(1, height, width)
    # PPM interleaves RGB per pixel; store planar
    return pixels.reshape(height, width, 3).transpose(2, 0, 1)


def read_sequence(paths: list[str] | tuple[str, ...]) -> Video:
    """Read an ordered list of PGM/PPM frame files into a Video.

    All frames must share format and dimensions; bytes become reals without
    scaling.
    """
    if not paths:
        raise ValueError("no input frames")
    frames = []
    for path in paths:
        frame = _read_netpbm(path)
        if frames and frame.shape != frames[0].shape:
            raise VideoFormatError(
                f"{path}: dimensions {frame.shape} do not match "
                f"first frame {frames[0].shape}"
            )
        frames.append(frame)
    return Video(np.stack(frames))


def frame_paths(directory: str) -> list[str]:
    """PGM/PPM files in a directory, ordered lexicographically."""
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith((".pgm", ".ppm"))
    )
    return [os.path.join(directory, n) for n in names]


def quantize(frame: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero to uint8."""
    return np.floor(np.clip(frame, 0.0, 255.0) + 0.5).astype(np.uint8)


def write_sequence(v: Video, directory: str, prefix: str = "frame") -> list[str]:
    """Write one 8-bit PGM (C=1) or PPM (C=3) per frame; returns written paths."""
    os.makedirs(directory, exist_ok=True)
    ext = "pgm" if v.channels == 1 else "ppm"
    magic = b"P5" if v.channels == 1 else b"P6"
    paths = []
    for t in range(v.frames):
        raw = quantize(v.data[t])
        if v.channels == 3:
            raw = raw.transpose(1, 2, 0)  # interleave for PPM
        path = os.path.join(directory, f"{prefix}_{t:04d}.{ext}")
        with open(path, "wb") as f:
            f.write(magic + b"\n%d %d\n255\n" % (v.cols, v.rows))
            f.write(raw.tobytes())
        paths.append(path)
    return paths

"""Compiled inner loops for the spatio-temporal patch search.

Two implementations of the same contract live here.

The naive kernels evaluate, for every pixel, the full squared L2 patch
distance against every candidate in the search window: cost per candidate is
s*s*C multiply-adds, quadratic in the patch side s.

The fast kernels split each distance into per-column sums.  For a horizontal
run of pixels the column sums against a fixed window offset are shared, so
one pass fills a scratch buffer of column distances and an s-wide running sum
over that buffer yields every full distance in the run.  Cost per candidate
drops to O(s).  Work is blocked into overlapping row segments (default
length 128, overlap s - 1) so scratch and the per-pixel result tables stay
cache resident; segment boundaries do not affect results because every output
pixel sees the identical candidate scan order: t ascending, then y, then x.

Top-n selection keeps an ordered table per pixel: a candidate is shift
inserted only when strictly better than the current last entry, and lands
after all entries less than or equal to it, so earlier candidates win ties.
Distances are accumulated in double precision (the float32 inputs are widened
before squaring) and stored as float32.

All kernels treat frames/rows independently, so parallel execution over rows
cannot change results.
"""

import numpy as np
from numba import njit, prange

# Free-mode search region clamps at borders; one-per-frame mirrors frame
# indices at sequence ends so every pixel gets exactly w_t entries.

MODE_FREE = 0
MODE_ONE_PER_FRAME = 1

SEGMENT_LEN = 128


@njit(cache=True)
def _refl(i, size):
    if size == 1:
        return 0
    period = 2 * (size - 1)
    i = i % period
    if i >= size:
        i = period - i
    return i


@njit(cache=True)
def _patch_dist(src, t0, y0, x0, t1, y1, x1, hs):
    T, C, H, W = src.shape
    acc = 0.0
    for h in range(-hs, hs + 1):
        ya = _refl(y0 + h, H)
        yb = _refl(y1 + h, H)
        for w in range(-hs, hs + 1):
            xa = _refl(x0 + w, W)
            xb = _refl(x1 + w, W)
            for c in range(C):
                d = np.float64(src[t0, c, ya, xa]) - np.float64(src[t1, c, yb, xb])
                acc += d * d
    return acc


@njit(cache=True)
def _insert(dists, px, py, pt, d, x, y, t):
    """Algorithm: shift-insert keeping the table sorted, earlier entries win ties."""
    n = dists.shape[0]
    if d < dists[n - 1]:
        i = n - 1
        while i >= 1:
            if dists[i - 1] <= d:
                break
            dists[i] = dists[i - 1]
            px[i] = px[i - 1]
            py[i] = py[i - 1]
            pt[i] = pt[i - 1]
            i -= 1
        dists[i] = d
        px[i] = x
        py[i] = y
        pt[i] = t


@njit(cache=True, parallel=True)
def search_naive_free(src, frames, y_lo, y_hi, s, ws, wt, n, pos_out, dist_out):
    T, C, H, W = src.shape
    F = frames.shape[0]
    hs = s // 2
    hws = ws // 2
    hwt = wt // 2
    nrows = y_hi - y_lo
    for ri in prange(F * nrows):
        fi = ri // nrows
        y0 = y_lo + ri % nrows
        t0 = frames[fi]
        dists = np.empty(n, np.float64)
        px = np.empty(n, np.int32)
        py = np.empty(n, np.int32)
        pt = np.empty(n, np.int32)
        for x0 in range(W):
            for k in range(1, n):
                dists[k] = np.inf
            dists[0] = 0.0
            px[0] = x0
            py[0] = y0
            pt[0] = t0
            for dt in range(-hwt, hwt + 1):
                tt = t0 + dt
                if tt < 0 or tt >= T:
                    continue
                for dy in range(-hws, hws + 1):
                    yy = y0 + dy
                    if yy < 0 or yy >= H:
                        continue
                    for dx in range(-hws, hws + 1):
                        xx = x0 + dx
                        if xx < 0 or xx >= W:
                            continue
                        if tt == t0 and yy == y0 and xx == x0:
                            continue
                        d = _patch_dist(src, t0, y0, x0, tt, yy, xx, hs)
                        _insert(dists, px, py, pt, d, xx, yy, tt)
            for k in range(n):
                pos_out[fi, y0 - y_lo, x0, k, 0] = px[k]
                pos_out[fi, y0 - y_lo, x0, k, 1] = py[k]
                pos_out[fi, y0 - y_lo, x0, k, 2] = pt[k]
                dist_out[fi, y0 - y_lo, x0, k] = dists[k]


@njit(cache=True, parallel=True)
def search_naive_opf(src, frames, y_lo, y_hi, s, ws, wt, pos_out, dist_out):
    T, C, H, W = src.shape
    F = frames.shape[0]
    hs = s // 2
    hws = ws // 2
    hwt = wt // 2
    nrows = y_hi - y_lo
    for ri in prange(F * nrows):
        fi = ri // nrows
        y0 = y_lo + ri % nrows
        t0 = frames[fi]
        for x0 in range(W):
            for k in range(wt):
                dt = k - hwt
                if dt == 0:
                    pos_out[fi, y0 - y_lo, x0, k, 0] = x0
                    pos_out[fi, y0 - y_lo, x0, k, 1] = y0
                    pos_out[fi, y0 - y_lo, x0, k, 2] = t0
                    dist_out[fi, y0 - y_lo, x0, k] = 0.0
                    continue
                tt = _refl(t0 + dt, T)
                best = np.inf
                bx = x0
                by = y0
                for dy in range(-hws, hws + 1):
                    yy = y0 + dy
                    if yy < 0 or yy >= H:
                        continue
                    for dx in range(-hws, hws + 1):
                        xx = x0 + dx
                        if xx < 0 or xx >= W:
                            continue
                        d = _patch_dist(src, t0, y0, x0, tt, yy, xx, hs)
                        if d < best:
                            best = d
                            bx = xx
                            by = yy
                pos_out[fi, y0 - y_lo, x0, k, 0] = bx
                pos_out[fi, y0 - y_lo, x0, k, 1] = by
                pos_out[fi, y0 - y_lo, x0, k, 2] = tt
                dist_out[fi, y0 - y_lo, x0, k] = best


@njit(cache=True, parallel=True)
def search_fast_free(src, frames, y_lo, y_hi, s, ws, wt, n, seg_len, pos_out, dist_out):
    T, C, H, W = src.shape
    F = frames.shape[0]
    hs = s // 2
    hws = ws // 2
    hwt = wt // 2
    lout_max = seg_len - (s - 1)
    nrows = y_hi - y_lo
    for ri in prange(F * nrows):
        fi = ri // nrows
        y0 = y_lo + ri % nrows
        t0 = frames[fi]
        scratch = np.empty(seg_len, np.float64)
        xa = np.empty(seg_len, np.int32)
        ya = np.empty(s, np.int32)
        yb = np.empty(s, np.int32)
        dists = np.empty((lout_max, n), np.float64)
        px = np.empty((lout_max, n), np.int32)
        py = np.empty((lout_max, n), np.int32)
        pt = np.empty((lout_max, n), np.int32)
        for h in range(s):
            ya[h] = _refl(y0 + h - hs, H)
        x_start = 0
        while x_start < W:
            lout = min(lout_max, W - x_start)
            nscr = lout + s - 1
            for j in range(lout):
                dists[j, 0] = 0.0
                px[j, 0] = x_start + j
                py[j, 0] = y0
                pt[j, 0] = t0
                for k in range(1, n):
                    dists[j, k] = np.inf
            for i in range(nscr):
                xa[i] = _refl(x_start - hs + i, W)
            for dt in range(-hwt, hwt + 1):
                tt = t0 + dt
                if tt < 0 or tt >= T:
                    continue
                for dy in range(-hws, hws + 1):
                    yy = y0 + dy
                    if yy < 0 or yy >= H:
                        continue
                    for h in range(s):
                        yb[h] = _refl(yy + h - hs, H)
                    for dx in range(-hws, hws + 1):
                        if tt == t0 and dy == 0 and dx == 0:
                            continue
                        for i in range(nscr):
                            xbi = _refl(x_start - hs + i + dx, W)
                            xai = xa[i]
                            acc = 0.0
                            for h in range(s):
                                yah = ya[h]
                                ybh = yb[h]
                                for c in range(C):
                                    d = np.float64(src[t0, c, yah, xai]) - np.float64(
                                        src[tt, c, ybh, xbi]
                                    )
                                    acc += d * d
                            scratch[i] = acc
                        for j in range(lout):
                            xx = x_start + j + dx
                            if xx < 0 or xx >= W:
                                continue
                            dsum = 0.0
                            for k2 in range(s):
                                dsum += scratch[j + k2]
                            _insert(dists[j], px[j], py[j], pt[j], dsum, xx, yy, tt)
            for j in range(lout):
                x0 = x_start + j
                for k in range(n):
                    pos_out[fi, y0 - y_lo, x0, k, 0] = px[j, k]
                    pos_out[fi, y0 - y_lo, x0, k, 1] = py[j, k]
                    pos_out[fi, y0 - y_lo, x0, k, 2] = pt[j, k]
                    dist_out[fi, y0 - y_lo, x0, k] = dists[j, k]
            x_start += lout


@njit(cache=True, parallel=True)
def search_fast_opf(src, frames, y_lo, y_hi, s, ws, wt, seg_len, pos_out, dist_out):
    T, C, H, W = src.shape
    F = frames.shape[0]
    hs = s // 2
    hws = ws // 2
    hwt = wt // 2
    lout_max = seg_len - (s - 1)
    nrows = y_hi - y_lo
    for ri in prange(F * nrows):
        fi = ri // nrows
        y0 = y_lo + ri % nrows
        t0 = frames[fi]
        scratch = np.empty(seg_len, np.float64)
        xa = np.empty(seg_len, np.int32)
        ya = np.empty(s, np.int32)
        yb = np.empty(s, np.int32)
        best = np.empty(lout_max, np.float64)
        bx = np.empty(lout_max, np.int32)
        by = np.empty(lout_max, np.int32)
        for h in range(s):
            ya[h] = _refl(y0 + h - hs, H)
        x_start = 0
        while x_start < W:
            lout = min(lout_max, W - x_start)
            nscr = lout + s - 1
            for i in range(nscr):
                xa[i] = _refl(x_start - hs + i, W)
            for k in range(wt):
                dt = k - hwt
                if dt == 0:
                    for j in range(lout):
                        x0 = x_start + j
                        pos_out[fi, y0 - y_lo, x0, k, 0] = x0
                        pos_out[fi, y0 - y_lo, x0, k, 1] = y0
                        pos_out[fi, y0 - y_lo, x0, k, 2] = t0
                        dist_out[fi, y0 - y_lo, x0, k] = 0.0
                    continue
                tt = _refl(t0 + dt, T)
                for j in range(lout):
                    best[j] = np.inf
                    bx[j] = x_start + j
                    by[j] = y0
                for dy in range(-hws, hws + 1):
                    yy = y0 + dy
                    if yy < 0 or yy >= H:
                        continue
                    for h in range(s):
                        yb[h] = _refl(yy + h - hs, H)
                    for dx in range(-hws, hws + 1):
                        for i in range(nscr):
                            xbi = _refl(x_start - hs + i + dx, W)
                            xai = xa[i]
                            acc = 0.0
                            for h in range(s):
                                yah = ya[h]
                                ybh = yb[h]
                                for c in range(C):
                                    d = np.float64(src[t0, c, yah, xai]) - np.float64(
                                        src[tt, c, ybh, xbi]
                                    )
                                    acc += d * d
                            scratch[i] = acc
                        for j in range(lout):
                            xx = x_start + j + dx
                            if xx < 0 or xx >= W:
                                continue
                            dsum = 0.0
                            for k2 in range(s):
                                dsum += scratch[j + k2]
                            if dsum < best[j]:
                                best[j] = dsum
                                bx[j] = xx
                                by[j] = yy
                for j in range(lout):
                    x0 = x_start + j
                    pos_out[fi, y0 - y_lo, x0, k, 0] = bx[j]
                    pos_out[fi, y0 - y_lo, x0, k, 1] = by[j]
                    pos_out[fi, y0 - y_lo, x0, k, 2] = tt
                    dist_out[fi, y0 - y_lo, x0, k] = best[j]
            x_start += lout

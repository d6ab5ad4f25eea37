"""Hot numeric kernels.

Every kernel exists twice: ``<name>_nb`` is a loop body compiled with numba,
``<name>_np`` is a vectorised numpy (or scipy) route.  The bare ``<name>``
is bound to one of them at import time, see :mod:`bridgefuse._accel`.
Both variants are kept importable so tests and the benchmark can compare
them directly.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._accel import USE_NUMBA, jit

TAN_22_5 = 0.41421356237309503
TAN_67_5 = 2.414213562373095


# ---------------------------------------------------------------------------
# cross-correlation


@jit
def xcorr_full_nb(a, b):
    n = a.shape[0]
    out = np.zeros(2 * n - 1)
    for m in range(2 * n - 1):
        lag = m - (n - 1)
        lo = max(0, -lag)
        hi = min(n, n - lag)
        acc = 0.0
        for i in range(lo, hi):
            acc += a[i] * b[i + lag]
        out[m] = acc
    return out


def xcorr_full_np(a, b):
    """Correlation ``sum_i a[i] * b[i + lag]`` for lags ``-(n-1) .. n-1``."""
    return np.correlate(b, a, mode="full")


# ---------------------------------------------------------------------------
# optimal 1-D partition (k-means objective)


@jit
def kmeans_dp_nb(x, k):
    n = x.shape[0]
    s1 = np.zeros(n + 1)
    s2 = np.zeros(n + 1)
    for i in range(n):
        s1[i + 1] = s1[i] + x[i]
        s2[i + 1] = s2[i] + x[i] * x[i]
    cost = np.full((k, n + 1), np.inf)
    back = np.zeros((k, n + 1), dtype=np.int64)
    for j in range(1, n + 1):
        d = s1[j]
        cost[0, j] = max(s2[j] - d * d / j, 0.0)
    for m in range(1, k):
        for j in range(m + 1, n + 1):
            best = np.inf
            arg = m
            for i in range(m, j):
                cnt = j - i
                d = s1[j] - s1[i]
                c = s2[j] - s2[i] - d * d / cnt
                if c < 0.0:
                    c = 0.0
                tot = cost[m - 1, i] + c
                if tot < best:
                    best = tot
                    arg = i
            cost[m, j] = best
            back[m, j] = arg
    cuts = np.zeros(k - 1, dtype=np.int64)
    j = n
    for m in range(k - 1, 0, -1):
        j = back[m, j]
        cuts[m - 1] = j
    return cuts


def kmeans_dp_np(x, k):
    """Break indices of the optimal contiguous ``k``-partition of sorted ``x``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    s1 = np.concatenate(([0.0], np.cumsum(x)))
    s2 = np.concatenate(([0.0], np.cumsum(x * x)))
    cost = np.full((k, n + 1), np.inf)
    back = np.zeros((k, n + 1), dtype=np.int64)
    j = np.arange(1, n + 1)
    cost[0, 1:] = np.maximum(s2[1:] - s1[1:] ** 2 / j, 0.0)
    for m in range(1, k):
        for jj in range(m + 1, n + 1):
            i = np.arange(m, jj)
            d = s1[jj] - s1[i]
            c = np.maximum(s2[jj] - s2[i] - d * d / (jj - i), 0.0)
            tot = cost[m - 1, i] + c
            a = int(np.argmin(tot))
            cost[m, jj] = tot[a]
            back[m, jj] = i[a]
    cuts = np.zeros(k - 1, dtype=np.int64)
    jj = n
    for m in range(k - 1, 0, -1):
        jj = back[m, jj]
        cuts[m - 1] = jj
    return cuts


# ---------------------------------------------------------------------------
# triangle circumradii


@jit
def circumradius_nb(pts, tris):
    out = np.empty(tris.shape[0])
    for t in range(tris.shape[0]):
        ax, ay = pts[tris[t, 0], 0], pts[tris[t, 0], 1]
        bx, by = pts[tris[t, 1], 0], pts[tris[t, 1], 1]
        cx, cy = pts[tris[t, 2], 0], pts[tris[t, 2], 1]
        a = np.hypot(bx - cx, by - cy)
        b = np.hypot(ax - cx, ay - cy)
        c = np.hypot(ax - bx, ay - by)
        area2 = abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))
        if area2 == 0.0:
            out[t] = np.inf
        else:
            out[t] = a * b * c / (2.0 * area2)
    return out


def circumradius_np(pts, tris):
    p = pts[tris]
    a = np.hypot(*(p[:, 1] - p[:, 2]).T)
    b = np.hypot(*(p[:, 0] - p[:, 2]).T)
    c = np.hypot(*(p[:, 0] - p[:, 1]).T)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a * b * c / (2.0 * area2)
    r[area2 == 0.0] = np.inf
    return r


# ---------------------------------------------------------------------------
# point in polygon (even-odd over an edge soup, inclusive boundary band)


@jit
def points_in_edges_nb(px, py, edges, tol):
    n = px.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    tol2 = tol * tol
    for p in range(n):
        x = px[p]
        y = py[p]
        inside = False
        on_edge = False
        for e in range(edges.shape[0]):
            x1 = edges[e, 0]
            y1 = edges[e, 1]
            x2 = edges[e, 2]
            y2 = edges[e, 3]
            dx = x2 - x1
            dy = y2 - y1
            ll = dx * dx + dy * dy
            t = 0.0
            if ll > 0.0:
                t = ((x - x1) * dx + (y - y1) * dy) / ll
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            qx = x1 + t * dx - x
            qy = y1 + t * dy - y
            if qx * qx + qy * qy <= tol2:
                on_edge = True
                break
            if (y1 > y) != (y2 > y):
                xc = x1 + (y - y1) * dx / dy
                if x < xc:
                    inside = not inside
        out[p] = inside or on_edge
    return out


def points_in_edges_np(px, py, edges, tol):
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(px.shape[0], dtype=bool)
    on_edge = np.zeros(px.shape[0], dtype=bool)
    tol2 = tol * tol
    for x1, y1, x2, y2 in edges:
        dx = x2 - x1
        dy = y2 - y1
        ll = dx * dx + dy * dy
        if ll > 0.0:
            t = np.clip(((px - x1) * dx + (py - y1) * dy) / ll, 0.0, 1.0)
        else:
            t = np.zeros_like(px)
        qx = x1 + t * dx - px
        qy = y1 + t * dy - py
        on_edge |= qx * qx + qy * qy <= tol2
        crosses = (y1 > py) != (y2 > py)
        if np.any(crosses):
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x1 + (py - y1) * dx / dy
            inside ^= crosses & (px < xc)
    return inside | on_edge


# ---------------------------------------------------------------------------
# HSV band mask


@jit
def hsv_mask_nb(rgb, red_max, wrap_min, yellow_max, s_min, v_min):
    h, w = rgb.shape[0], rgb.shape[1]
    out = np.zeros((h, w), dtype=np.bool_)
    for r in range(h):
        for c in range(w):
            R = rgb[r, c, 0] / 255.0
            G = rgb[r, c, 1] / 255.0
            B = rgb[r, c, 2] / 255.0
            mx = max(R, G, B)
            mn = min(R, G, B)
            if mx <= 0.0:
                continue
            d = mx - mn
            s = d / mx
            if s < s_min or mx < v_min or d == 0.0:
                continue
            if mx == R:
                hue = 60.0 * (((G - B) / d) % 6.0)
            elif mx == G:
                hue = 60.0 * ((B - R) / d + 2.0)
            else:
                hue = 60.0 * ((R - G) / d + 4.0)
            if hue >= 360.0:
                hue -= 360.0
            out[r, c] = hue <= yellow_max or hue >= wrap_min or hue <= red_max
    return out


def rgb_to_hsv_np(rgb):
    """Standard RGB -> HSV with H in degrees [0, 360) and S, V in [0, 1]."""
    x = np.asarray(rgb, dtype=np.float64) / 255.0
    R, G, B = x[..., 0], x[..., 1], x[..., 2]
    mx = x.max(axis=-1)
    mn = x.min(axis=-1)
    d = mx - mn
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(mx > 0.0, d / mx, 0.0)
        hr = 60.0 * (((G - B) / d) % 6.0)
        hg = 60.0 * ((B - R) / d + 2.0)
        hb = 60.0 * ((R - G) / d + 4.0)
    hue = np.where(mx == R, hr, np.where(mx == G, hg, hb))
    hue = np.where(d == 0.0, 0.0, hue)
    hue = np.where(hue >= 360.0, hue - 360.0, hue)
    return hue, s, mx


def hsv_mask_np(rgb, red_max, wrap_min, yellow_max, s_min, v_min):
    hue, s, v = rgb_to_hsv_np(rgb)
    band = (hue <= red_max) | (hue >= wrap_min) | (hue <= yellow_max)
    return band & (s >= s_min) & (v >= v_min) & (s * v > 0.0)


# ---------------------------------------------------------------------------
# Canny stages


@jit
def nms_nb(gx, gy, mag, low):
    h, w = mag.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            m = mag[r, c]
            if m <= low:
                continue
            ax = abs(gx[r, c])
            ay = abs(gy[r, c])
            if ay <= ax * TAN_22_5:
                n1 = mag[r, c - 1] if c > 0 else 0.0
                n2 = mag[r, c + 1] if c < w - 1 else 0.0
                keep = m > n1 and m >= n2
            elif ay >= ax * TAN_67_5:
                n1 = mag[r - 1, c] if r > 0 else 0.0
                n2 = mag[r + 1, c] if r < h - 1 else 0.0
                keep = m > n1 and m >= n2
            else:
                if (gx[r, c] > 0) == (gy[r, c] > 0):
                    n1 = mag[r - 1, c - 1] if r > 0 and c > 0 else 0.0
                    n2 = mag[r + 1, c + 1] if r < h - 1 and c < w - 1 else 0.0
                else:
                    n1 = mag[r - 1, c + 1] if r > 0 and c < w - 1 else 0.0
                    n2 = mag[r + 1, c - 1] if r < h - 1 and c > 0 else 0.0
                keep = m > n1 and m > n2
            if keep:
                out[r, c] = m
    return out


def nms_np(gx, gy, mag, low):
    p = np.pad(mag, 1)
    ax = np.abs(gx)
    ay = np.abs(gy)

    def nb(dr, dc):
        return p[1 + dr : 1 + dr + mag.shape[0], 1 + dc : 1 + dc + mag.shape[1]]

    horiz = ay <= ax * TAN_22_5
    vert = ~horiz & (ay >= ax * TAN_67_5)
    diag = ~horiz & ~vert
    same = (gx > 0) == (gy > 0)
    keep_h = (mag > nb(0, -1)) & (mag >= nb(0, 1))
    keep_v = (mag > nb(-1, 0)) & (mag >= nb(1, 0))
    keep_d1 = (mag > nb(-1, -1)) & (mag > nb(1, 1))
    keep_d2 = (mag > nb(-1, 1)) & (mag > nb(1, -1))
    keep = (
        (horiz & keep_h)
        | (vert & keep_v)
        | (diag & same & keep_d1)
        | (diag & ~same & keep_d2)
    )
    return np.where(keep & (mag > low), mag, 0.0)


@jit
def hysteresis_nb(nms, low, high):
    h, w = nms.shape
    out = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty((h * w, 2), dtype=np.int64)
    top = 0
    for r in range(h):
        for c in range(w):
            if nms[r, c] > high and not out[r, c]:
                out[r, c] = True
                stack[top, 0] = r
                stack[top, 1] = c
                top += 1
                while top > 0:
                    top -= 1
                    rr = stack[top, 0]
                    cc = stack[top, 1]
                    for dr in range(-1, 2):
                        for dc in range(-1, 2):
                            r2 = rr + dr
                            c2 = cc + dc
                            if r2 < 0 or r2 >= h or c2 < 0 or c2 >= w:
                                continue
                            if not out[r2, c2] and nms[r2, c2] > low:
                                out[r2, c2] = True
                                stack[top, 0] = r2
                                stack[top, 1] = c2
                                top += 1
    return out


def hysteresis_np(nms, low, high):
    weak = nms > low
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros_like(weak)
    strong_labels = np.unique(labels[nms > high])
    strong_labels = strong_labels[strong_labels > 0]
    return np.isin(labels, strong_labels)


# ---------------------------------------------------------------------------
# square binary morphology (outside the image: 0 for dilation, 1 for erosion)


@jit
def _sweep_nb(src, half, axis, dilate):
    h, w = src.shape
    out = np.empty((h, w), dtype=np.bool_)
    for r in range(h):
        for c in range(w):
            if dilate:
                v = False
            else:
                v = True
            for o in range(-half, half + 1):
                if axis == 0:
                    rr = r + o
                    cc = c
                    inside = 0 <= rr < h
                else:
                    rr = r
                    cc = c + o
                    inside = 0 <= cc < w
                if not inside:
                    continue
                if dilate:
                    if src[rr, cc]:
                        v = True
                        break
                elif not src[rr, cc]:
                    v = False
                    break
            out[r, c] = v
    return out


@jit
def morph_nb(mask, k, iterations, dilate):
    half = k // 2
    out = mask.copy()
    for _ in range(iterations):
        out = _sweep_nb(out, half, 0, dilate)
        out = _sweep_nb(out, half, 1, dilate)
    return out


def morph_np(mask, k, iterations, dilate):
    half = k // 2
    out = np.asarray(mask, dtype=bool)
    pad_value = not dilate
    for _ in range(iterations):
        for axis in (0, 1):
            width = [(0, 0), (0, 0)]
            width[axis] = (half, half)
            p = np.pad(out, width, constant_values=pad_value)
            win = np.lib.stride_tricks.sliding_window_view(p, 2 * half + 1, axis=axis)
            out = win.any(axis=-1) if dilate else win.all(axis=-1)
    return out


# ---------------------------------------------------------------------------
# external component boxes


# neighbour offsets, counter-clockwise starting east (rows grow downward)
_DR = np.array([0, -1, -1, -1, 0, 1, 1, 1], dtype=np.int64)
_DC = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)


@jit
def _direction(dr, dc):
    for d in range(8):
        if _DR[d] == dr and _DC[d] == dc:
            return d
    return -1


@jit
def external_boxes_nb(mask):
    """Suzuki-Abe border following; boxes (row0, col0, row1, col1) of
    outer borders whose parent is the frame, inclusive pixel extents."""
    h, w = mask.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int64)
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                f[r + 1, c + 1] = 1
    cap = 2
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                cap += 1
    is_outer = np.zeros(cap + 1, dtype=np.bool_)
    parent = np.zeros(cap + 1, dtype=np.int64)
    box = np.zeros((cap + 1, 4), dtype=np.int64)
    nbd = 1
    for i in range(1, h + 1):
        lnbd = 1
        for j in range(1, w + 1):
            fij = f[i, j]
            if fij == 0:
                continue
            start = False
            outer = False
            i2 = 0
            j2 = 0
            if fij == 1 and f[i, j - 1] == 0:
                start = True
                outer = True
                i2 = i
                j2 = j - 1
            elif fij >= 1 and f[i, j + 1] == 0:
                start = True
                i2 = i
                j2 = j + 1
                if fij > 1:
                    lnbd = fij
            if start:
                nbd += 1
                is_outer[nbd] = outer
                if outer == is_outer[lnbd]:
                    parent[nbd] = parent[lnbd]
                else:
                    parent[nbd] = lnbd
                box[nbd, 0] = i
                box[nbd, 1] = j
                box[nbd, 2] = i
                box[nbd, 3] = j
                d0 = _direction(i2 - i, j2 - j)
                found = -1
                for s in range(8):
                    d = (d0 - s) % 8
                    if f[i + _DR[d], j + _DC[d]] != 0:
                        found = d
                        break
                if found < 0:
                    f[i, j] = -nbd
                else:
                    i1 = i + _DR[found]
                    j1 = j + _DC[found]
                    i2 = i1
                    j2 = j1
                    i3 = i
                    j3 = j
                    while True:
                        d2 = _direction(i2 - i3, j2 - j3)
                        east_zero = False
                        i4 = i3
                        j4 = j3
                        for s in range(1, 9):
                            d = (d2 + s) % 8
                            rr = i3 + _DR[d]
                            cc = j3 + _DC[d]
                            if f[rr, cc] != 0:
                                i4 = rr
                                j4 = cc
                                break
                            if d == 0:
                                east_zero = True
                        if east_zero:
                            f[i3, j3] = -nbd
                        elif f[i3, j3] == 1:
                            f[i3, j3] = nbd
                        if i3 < box[nbd, 0]:
                            box[nbd, 0] = i3
                        if j3 < box[nbd, 1]:
                            box[nbd, 1] = j3
                        if i3 > box[nbd, 2]:
                            box[nbd, 2] = i3
                        if j3 > box[nbd, 3]:
                            box[nbd, 3] = j3
                        if i4 == i and j4 == j and i3 == i1 and j3 == j1:
                            break
                        i2 = i3
                        j2 = j3
                        i3 = i4
                        j3 = j4
            if f[i, j] != 1:
                lnbd = abs(f[i, j])
    count = 0
    for b in range(2, nbd + 1):
        if is_outer[b] and parent[b] == 1:
            count += 1
    out = np.empty((count, 4), dtype=np.int64)
    k = 0
    for b in range(2, nbd + 1):
        if is_outer[b] and parent[b] == 1:
            out[k, 0] = box[b, 0] - 1
            out[k, 1] = box[b, 1] - 1
            out[k, 2] = box[b, 2] - 1
            out[k, 3] = box[b, 3] - 1
            k += 1
    return out


def external_boxes_np(mask):
    """Hole-fill then 8-connected labelling; same boxes as border following."""
    mask = np.asarray(mask, dtype=bool)
    filled = ndimage.binary_fill_holes(mask)
    labels, n = ndimage.label(filled, structure=np.ones((3, 3), dtype=bool))
    out = np.empty((n, 4), dtype=np.int64)
    for idx, sl in enumerate(ndimage.find_objects(labels)):
        out[idx] = (sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1)
    return out


# ---------------------------------------------------------------------------
# inverse-distance weighting on a node grid


@jit
def idw_nb(px, py, pv, gx, gy, radius, power):
    ny = gy.shape[0]
    nx = gx.shape[0]
    out = np.full((ny, nx), np.nan)
    r2 = radius * radius
    half = power / 2.0
    for iy in range(ny):
        for ix in range(nx):
            num = 0.0
            den = 0.0
            exact = False
            val = 0.0
            for p in range(px.shape[0]):
                dx = px[p] - gx[ix]
                dy = py[p] - gy[iy]
                d2 = dx * dx + dy * dy
                if d2 == 0.0:
                    exact = True
                    val = pv[p]
                    break
                if d2 <= r2:
                    wt = 1.0 / d2**half
                    num += wt * pv[p]
                    den += wt
            if exact:
                out[iy, ix] = val
            elif den > 0.0:
                out[iy, ix] = num / den
    return out


def idw_np(px, py, pv, gx, gy, radius, power, chunk=4096):
    nodes_x, nodes_y = np.meshgrid(gx, gy)
    nx_flat = nodes_x.ravel()
    ny_flat = nodes_y.ravel()
    out = np.full(nx_flat.shape[0], np.nan)
    r2 = radius * radius
    for s in range(0, nx_flat.shape[0], chunk):
        dx = px[None, :] - nx_flat[s : s + chunk, None]
        dy = py[None, :] - ny_flat[s : s + chunk, None]
        d2 = dx * dx + dy * dy
        near = d2 <= r2
        with np.errstate(divide="ignore"):
            wt = np.where(near & (d2 > 0.0), 1.0 / d2 ** (power / 2.0), 0.0)
        den = wt.sum(axis=1)
        num = wt @ pv
        block = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)
        zero = d2 == 0.0
        has_zero = zero.any(axis=1)
        if has_zero.any():
            first = np.argmax(zero, axis=1)
            block = np.where(has_zero, pv[first], block)
        out[s : s + chunk] = block
    return out.reshape(nodes_x.shape)


# ---------------------------------------------------------------------------

if USE_NUMBA:
    xcorr_full = xcorr_full_nb
    kmeans_dp = kmeans_dp_nb
    circumradius = circumradius_nb
    points_in_edges = points_in_edges_nb
    hsv_mask = hsv_mask_nb
    nms = nms_nb
    hysteresis = hysteresis_nb
    morph = morph_nb
    external_boxes = external_boxes_nb
    idw = idw_nb
else:
    xcorr_full = xcorr_full_np
    kmeans_dp = kmeans_dp_np
    circumradius = circumradius_np
    points_in_edges = points_in_edges_np
    hsv_mask = hsv_mask_np
    nms = nms_np
    hysteresis = hysteresis_np
    morph = morph_np
    external_boxes = external_boxes_np
    idw = idw_np

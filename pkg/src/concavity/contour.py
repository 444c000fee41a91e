"""Contour extraction, RDP simplification and k-curvature.

A contour is an ``(n, 2)`` float array of pixel-center coordinates ``(x, y)``
describing a closed curve; the closing edge from the last point back to the
first is implicit. Contours are oriented with positive signed (shoelace)
area in ``(x, y)``; with ``y`` pointing down this reads clockwise on screen,
and it is the orientation for which the object lies to the left of travel
in the mathematical frame. Convex turns then have positive curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

_EIGHT = np.ones((3, 3), dtype=bool)

# Moore neighbourhood in screen-clockwise order, starting west: (dcol, drow).
_NEIGHBOURS = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]


class EmptyMask(ValueError):
    pass


class TinyObject(ValueError):
    pass


@dataclass(frozen=True)
class CurvatureProfile:
    values: np.ndarray
    k: int

    def __len__(self) -> int:
        return len(self.values)


def components(mask: np.ndarray, min_size: int = 1) -> list[np.ndarray]:
    """8-connected components as boolean masks, largest first.

    Ties in size are broken by label order (raster order of first pixel).
    """
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    sizes = np.bincount(labels.ravel())[1:]
    order = sorted(range(n), key=lambda i: (-sizes[i], i))
    return [labels == i + 1 for i in order if sizes[i] >= min_size]


def _moore_trace(obj: np.ndarray) -> list[tuple[int, int]]:
    rows, cols = np.nonzero(obj)
    r0 = rows.min()
    c0 = cols[rows == r0].min()
    h, w = obj.shape

    def filled(c: int, r: int) -> bool:
        return 0 <= r < h and 0 <= c < w and bool(obj[r, c])

    start = (int(c0), int(r0))
    # Topmost-leftmost pixel: its west neighbour is background.
    back = 0
    path = [start]
    cur = start
    first_move = None
    while True:
        nxt = None
        for step in range(1, 9):
            d = (back + step) % 8
            dc, dr = _NEIGHBOURS[d]
            if filled(cur[0] + dc, cur[1] + dr):
                nxt = (cur[0] + dc, cur[1] + dr)
                # background neighbour examined just before nxt, seen from nxt
                pc, pr = _NEIGHBOURS[(d - 1) % 8]
                bc, br = cur[0] + pc - nxt[0], cur[1] + pr - nxt[1]
                back = _NEIGHBOURS.index((bc, br))
                break
        if nxt is None:  # isolated pixel
            return path
        move = (cur, nxt)
        if first_move is None:
            first_move = move
        elif move == first_move:
            path.pop()  # drop the repeated start
            return path
        path.append(nxt)
        cur = nxt


def trace_contour(mask: np.ndarray) -> np.ndarray:
    """Outer boundary of the largest 8-connected object in ``mask``.

    Uses Moore-neighbour tracing from the topmost-then-leftmost pixel, stopping
    when the first move is about to repeat (Jacob's criterion). Returns pixel
    centers in positive-area orientation.
    """
    mask = np.asarray(mask, dtype=bool)
    comps = components(mask)
    if not comps:
        raise EmptyMask("mask has no object pixels")
    return trace_component(comps[0])


def trace_component(obj: np.ndarray) -> np.ndarray:
    if int(obj.sum()) < 4:
        raise TinyObject(f"largest component has {int(obj.sum())} pixels, need at least 4")
    path = _moore_trace(obj)
    return np.asarray(path, dtype=float) + 0.5


def trace_all(mask: np.ndarray, min_size: int = 50) -> list[np.ndarray]:
    """Contours of every component with at least ``min_size`` pixels."""
    return [trace_component(c) for c in components(np.asarray(mask, dtype=bool), max(min_size, 4))]


def signed_area(c: np.ndarray) -> float:
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _seg_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.hypot(*(p - a).T)
    t = np.clip((p - a) @ ab / L2, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def _rdp_open(pts: np.ndarray, epsilon: float) -> list[int]:
    # Iterative split on the farthest point; returns kept indices into pts.
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _seg_distance(pts[i + 1:j], pts[i], pts[j])
        m = int(np.argmax(d))
        # epsilon=0 still drops exactly collinear points
        if d[m] > epsilon:
            m += i + 1
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))
    return list(np.flatnonzero(keep))


def simplify_rdp_indices(c: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices of the points kept by closed-curve Ramer-Douglas-Peucker.

    The curve is cut at two mutually distant points (the point farthest from
    the first one, and the point farthest from that), and each arc is
    simplified independently.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    c = np.asarray(c, dtype=float)
    n = len(c)
    if n < 3:
        return np.arange(n)
    i0 = int(np.argmax(np.hypot(*(c - c[0]).T)))
    i1 = int(np.argmax(np.hypot(*(c - c[i0]).T)))
    lo, hi = sorted((i0, i1))
    if lo == hi:
        return np.arange(n)
    arc1 = np.arange(lo, hi + 1)
    arc2 = np.concatenate([np.arange(hi, n), np.arange(0, lo + 1)])
    kept = {int(arc1[k]) for k in _rdp_open(c[arc1], epsilon)}
    kept |= {int(arc2[k]) for k in _rdp_open(c[arc2], epsilon)}
    return np.array(sorted(kept))


def simplify_rdp(c: np.ndarray, epsilon: float) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return c[simplify_rdp_indices(c, epsilon)]


def polyline_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the closed polyline ``poly``."""
    points = np.asarray(points, dtype=float)
    best = np.full(len(points), np.inf)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        best = np.minimum(best, _seg_distance(points, a, b))
    return best


def denoise(c: np.ndarray, epsilon: float) -> np.ndarray:
    """Project every contour point onto its RDP simplification.

    Point count and ordering are unchanged, so index offsets still measure
    arc length in contour pixels; only jitter below ``epsilon`` is removed.
    Each point is projected onto the simplified edge spanning its index.
    """
    c = np.asarray(c, dtype=float)
    if epsilon <= 0 or len(c) < 4:
        return c.copy()
    keep = simplify_rdp_indices(c, epsilon)
    out = c.copy()
    n = len(c)
    for s, e in zip(keep, np.roll(keep, -1)):
        span = (e - s) % n
        if span < 2:
            continue
        idx = (s + np.arange(1, span)) % n
        a, b = c[s], c[e]
        ab = b - a
        L2 = float(ab @ ab)
        if L2 == 0.0:
            continue
        t = np.clip((c[idx] - a) @ ab / L2, 0.0, 1.0)
        out[idx] = a + t[:, None] * ab
    return out


def wrap_angle(a):
    """Map angles into ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2 * np.pi, w)
    return float(w) if w.ndim == 0 else w


def _check_k(n: int, k: int) -> None:
    if not (1 <= k and 2 * k < n):
        raise ValueError(f"k={k} invalid for a contour of {n} points (need 1 <= k < n/2)")


def k_slope(c: np.ndarray, i: int, k: int) -> float:
    """Angle of the chord from point ``i - k`` to point ``i`` (circular)."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    _check_k(n, k)
    d = c[i % n] - c[(i - k) % n]
    return float(wrap_angle(math.atan2(d[1], d[0])))


def k_slopes(c: np.ndarray, k: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    _check_k(len(c), k)
    d = c - np.roll(c, k, axis=0)
    return np.arctan2(d[:, 1], d[:, 0])


def k_curvature(c: np.ndarray, k: int) -> CurvatureProfile:
    """Turning angle between the backward and forward ``k``-chords at each point."""
    back = k_slopes(c, k)
    fwd = np.roll(back, -k)
    return CurvatureProfile(values=wrap_angle(fwd - back), k=k)

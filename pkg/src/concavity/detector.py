"""Concave point detection from the curvature of an object's contour.

Pipeline: trace the outer contour, remove sub-``epsilon`` jitter, compute
k-curvature, find regions of high curvature and refine them to a bounded
length, take the weighted median of each region as its interest point and
keep the interest points whose k-neighbour chord midpoint is background.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .contour import CurvatureProfile, denoise, k_curvature, trace_all, trace_contour
from .geometry import Containment, point_in_polygon


class NoRegions(Exception):
    """No contour point exceeds the initial curvature threshold."""


class Kind(str, enum.Enum):
    CONCAVE = "concave"
    CONVEX = "convex"


@dataclass(frozen=True)
class DetectorParams:
    """Detector hyperparameters.

    ``t0`` and ``dt`` default to ``None``, meaning: the 80th percentile of
    ``|curvature|`` along the contour, and a tenth of ``t0``.
    """

    k: int = 7
    l_min: int = 2
    l_max: int = 11
    epsilon: float = 0.2
    t0: float | None = None
    dt: float | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (0 < self.l_min <= self.l_max):
            raise ValueError("need 0 < l_min <= l_max")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.t0 is not None and self.t0 <= 0:
            raise ValueError("t0 must be > 0")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be > 0")

    def thresholds(self, profile: CurvatureProfile) -> tuple[float, float]:
        w = np.abs(profile.values)
        t0 = self.t0 if self.t0 is not None else float(np.percentile(w, 80))
        if t0 <= 0:
            # a mostly straight contour; fall back below the smallest nonzero magnitude
            nz = w[w > 0]
            t0 = max(float(nz.min()) / 2, 1e-12) if nz.size else 1e-12
        dt = self.dt if self.dt is not None else 0.1 * t0
        return t0, dt


@dataclass(frozen=True)
class Region:
    """Circular run of contour indices ``start .. end`` (inclusive)."""

    start: int
    end: int
    length: int
    threshold: float
    # formed by absorbing gap points in a merge (or split from such a region)
    merged: bool = field(default=False, compare=False)
    # descends from a merge that overshot l_max; short pieces are dropped
    locked: bool = field(default=False, compare=False)

    def indices(self, n: int) -> np.ndarray:
        return (self.start + np.arange(self.length)) % n

    def contains(self, i: int, n: int) -> bool:
        return (i - self.start) % n < self.length


@dataclass(frozen=True)
class InterestPoint:
    index: int
    location: tuple[float, float]
    kind: Kind


@dataclass
class Detection:
    """Everything the pipeline produced for one contour."""

    contour: np.ndarray
    profile: CurvatureProfile | None
    regions: list[Region]
    interest_points: list[InterestPoint]

    @property
    def concave_points(self) -> list[tuple[float, float]]:
        return [ip.location for ip in self.interest_points if ip.kind is Kind.CONCAVE]


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Linear maximal runs of True as ``(offset, length)`` pairs."""
    padded = np.concatenate([[False], flags, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(s), int(e - s)) for s, e in zip(edges[::2], edges[1::2])]


def _make(start: int, length: int, n: int, threshold: float, merged=False, locked=False) -> Region:
    start %= n
    return Region(start, (start + length - 1) % n, length, threshold, merged, locked)


def initial_regions(profile: CurvatureProfile, t: float) -> list[Region]:
    """Maximal circular runs of points with ``|curvature| > t``."""
    if t <= 0:
        raise ValueError("threshold must be positive")
    above = np.abs(profile.values) > t
    n = len(above)
    if above.all():
        return [_make(0, n, n, t)]
    if not above.any():
        return []
    # rotate so that index 0 of the scan is a point below threshold
    shift = int(np.flatnonzero(~above)[0])
    rolled = np.roll(above, -shift)
    regions = [_make(s + shift, L, n, t) for s, L in _runs(rolled)]
    return sorted(regions, key=lambda r: r.start)


def _split_long(r: Region, w: np.ndarray, dt: float) -> list[Region]:
    n = len(w)
    idx = r.indices(n)
    vals = w[idx]
    # raising t by dt until some point drops out is a jump to the first
    # multiple of dt at or above the region minimum
    steps = max(1, math.ceil((float(vals.min()) - r.threshold) / dt))
    t = r.threshold + steps * dt
    if t < float(vals.max()):
        above = vals > t
        return [_make(r.start + s, L, n, t, r.merged, r.locked) for s, L in _runs(above)]
    if r.length < 3:
        return [_make(r.start + i, 1, n, r.threshold, r.merged, r.locked) for i in range(r.length)]
    # plateau: cut at the weakest interior point, nearest the middle on ties
    inner = vals[1:-1]
    cands = np.flatnonzero(inner == inner.min()) + 1
    m = int(cands[np.argmin(np.abs(cands - (r.length - 1) / 2))])
    return [
        _make(r.start, m, n, r.threshold, r.merged, r.locked),
        _make(r.start + m + 1, r.length - m - 1, n, r.threshold, r.merged, r.locked),
    ]


def refine_regions(
    profile: CurvatureProfile,
    params: DetectorParams,
    max_steps: int | None = None,
) -> list[Region]:
    """Refine high-curvature runs until every region length is in ``[l_min, l_max]``.

    Regions longer than ``l_max`` are re-thresholded at ``t + dt``. Regions
    shorter than ``l_min`` are merged with the nearest pending region closer
    than ``k`` points (ties go to the larger total ``|curvature|``) or dropped
    when there is none. A merge that overshoots ``l_max`` is split again, and
    its short descendants are dropped instead of merged, which bounds the
    recursion.
    """
    w = np.abs(profile.values)
    n = len(w)
    t0, dt = params.thresholds(profile)
    pending = deque(initial_regions(profile, t0))
    if not pending:
        raise NoRegions(f"no point exceeds t0={t0:.4g}")

    final: list[Region] = []
    occupied = np.zeros(n, dtype=bool)
    limit = max_steps if max_steps is not None else 50 * n + 100
    steps = 0
    while pending:
        steps += 1
        if steps > limit:
            raise RuntimeError("region refinement did not terminate")
        r = pending.popleft()
        if params.l_min <= r.length <= params.l_max:
            final.append(r)
            occupied[r.indices(n)] = True
            continue
        if r.length > params.l_max:
            pending.extendleft(reversed(_split_long(r, w, dt)))
            continue
        if r.locked:
            continue
        merged = _merge_nearest(r, pending, occupied, w, params.k)
        if merged is None:
            continue
        if merged.length > params.l_max:
            merged = replace(merged, locked=True)
        pending.appendleft(merged)

    return sorted(final, key=lambda r: r.start)


def _merge_nearest(r: Region, pending: deque, occupied: np.ndarray, w: np.ndarray, k: int) -> Region | None:
    n = len(w)
    best = None
    for j, c in enumerate(pending):
        if c.locked:
            continue
        fwd = (c.start - r.end) % n
        bwd = (r.start - c.end) % n
        d, first, last = (fwd, r, c) if fwd <= bwd else (bwd, c, r)
        if d >= k:
            continue
        gap = (first.end + 1 + np.arange(d - 1)) % n
        if occupied[gap].any():
            continue
        weight = float(w[c.indices(n)].sum())
        key = (d, -weight)
        if best is None or key < best[0]:
            best = (key, j, first, last, d)
    if best is None:
        return None
    _, j, first, last, d = best
    other = pending[j]
    del pending[j]
    length = min(first.length + (d - 1) + last.length, n)
    return _make(first.start, length, n, max(r.threshold, other.threshold), merged=True)


def interest_point(region: Region, profile: CurvatureProfile) -> int:
    """Weighted median index of ``|curvature|`` within the region."""
    n = len(profile.values)
    idx = region.indices(n)
    cum = np.cumsum(np.abs(profile.values[idx]))
    total = cum[-1]
    if total <= 0:
        return int(idx[(len(idx) - 1) // 2])
    m = int(np.searchsorted(cum, total / 2, side="left"))
    # tolerate rounding in the cumulative sum
    while m > 0 and cum[m - 1] >= total / 2 - 1e-12 * total:
        m -= 1
    return int(idx[m])


def midpoint_outside(mask: np.ndarray, x: float, y: float) -> bool:
    col, row = int(np.floor(x)), int(np.floor(y))
    h, w = mask.shape
    if not (0 <= row < h and 0 <= col < w):
        return True
    return not bool(mask[row, col])


def classify_concave(contour: np.ndarray, index: int, k: int, mask: np.ndarray | None = None) -> Kind:
    """Concave iff the midpoint of the chord joining the ``-k`` and ``+k`` neighbours is background."""
    n = len(contour)
    mid = (contour[(index - k) % n] + contour[(index + k) % n]) / 2
    if mask is not None:
        outside = midpoint_outside(mask, mid[0], mid[1])
    else:
        outside = point_in_polygon(contour, mid) is Containment.OUTSIDE
    return Kind.CONCAVE if outside else Kind.CONVEX


def detect_contour(contour: np.ndarray, params: DetectorParams, mask: np.ndarray | None = None) -> Detection:
    """Run region finding and classification on an already traced contour."""
    contour = np.asarray(contour, dtype=float)
    smooth = denoise(contour, params.epsilon)
    if 2 * params.k >= len(contour):
        return Detection(contour, None, [], [])
    profile = k_curvature(smooth, params.k)
    try:
        regions = refine_regions(profile, params)
    except NoRegions:
        return Detection(contour, profile, [], [])
    points = []
    for r in regions:
        i = interest_point(r, profile)
        kind = classify_concave(contour, i, params.k, mask)
        points.append(InterestPoint(i, (float(contour[i, 0]), float(contour[i, 1])), kind))
    return Detection(contour, profile, regions, points)


def detect(mask: np.ndarray, params: DetectorParams | None = None) -> Detection:
    params = params or DetectorParams()
    mask = np.asarray(mask, dtype=bool)
    return detect_contour(trace_contour(mask), params, mask)


def detect_concave_points(mask: np.ndarray, params: DetectorParams | None = None) -> list[tuple[float, float]]:
    """Concave points of the largest object in ``mask``, in contour order."""
    return detect(mask, params).concave_points


def detect_all_components(mask: np.ndarray, params: DetectorParams | None = None, min_size: int = 50):
    """Concave points of every object of at least ``min_size`` pixels."""
    params = params or DetectorParams()
    mask = np.asarray(mask, dtype=bool)
    out: list[tuple[float, float]] = []
    for c in trace_all(mask, min_size):
        out.extend(detect_contour(c, params, mask).concave_points)
    return out

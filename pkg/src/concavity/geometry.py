"""Ellipse algebra, conic intersection, containment tests and rasterization.

Coordinates are image pixels: ``x`` grows to the right (columns) and ``y``
grows downwards (rows). Pixel ``(col, row)`` covers the unit square whose
center is ``(col + 0.5, row + 0.5)``. Binary masks are plain ``numpy`` boolean
arrays of shape ``(height, width)``, indexed ``mask[row, col]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class DegenerateConics(ValueError):
    """Raised when two ellipses describe the same conic."""


class Containment(str, enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Ellipse:
    """Ellipse with semi-axes ``a >= b > 0`` and major-axis angle ``phi``.

    ``phi`` is folded into ``[0, pi)`` on construction; an ellipse is
    symmetric under a half turn so no information is lost.
    """

    cx: float
    cy: float
    a: float
    b: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.cx, self.cy, self.a, self.b, self.phi)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite ellipse parameters: {vals}")
        if not (self.a >= self.b > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a}, b={self.b}")
        phi = math.fmod(self.phi, math.pi)
        if phi < 0:
            phi += math.pi
        if phi >= math.pi:  # fmod rounding can land exactly on pi
            phi = 0.0
        object.__setattr__(self, "phi", phi)

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors along the major and minor axes."""
        c, s = math.cos(self.phi), math.sin(self.phi)
        return np.array([c, s]), np.array([-s, c])

    def point_at(self, t: float | np.ndarray) -> np.ndarray:
        """Boundary point(s) for parameter ``t`` (radians)."""
        u, v = self.axes()
        t = np.asarray(t, dtype=float)
        ct = np.cos(t)[..., None]
        st = np.sin(t)[..., None]
        return np.array([self.cx, self.cy]) + self.a * ct * u + self.b * st * v

    def as_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "a": self.a, "b": self.b, "phi": self.phi}


def ellipse_eval(e: Ellipse, p) -> np.ndarray | float:
    """Return ``lambda1 + lambda2`` for point(s) ``p``.

    The value is below 1 inside the ellipse, 1 on its boundary and above 1
    outside. ``p`` may be a single ``(x, y)`` pair or an array of shape
    ``(..., 2)``.
    """
    p = np.asarray(p, dtype=float)
    dx = p[..., 0] - e.cx
    dy = p[..., 1] - e.cy
    c, s = math.cos(e.phi), math.sin(e.phi)
    lam1 = (dx * c + dy * s) ** 2 / e.a**2
    lam2 = (dx * s - dy * c) ** 2 / e.b**2
    out = lam1 + lam2
    return float(out) if out.ndim == 0 else out


def ellipse_contains(e: Ellipse, p, tol: float = 1e-9) -> Containment:
    v = ellipse_eval(e, p)
    if abs(v - 1.0) <= tol:
        return Containment.BOUNDARY
    return Containment.INSIDE if v < 1.0 else Containment.OUTSIDE


def _param_quadratic(e1: Ellipse, e2: Ellipse):
    # Coordinates of e1's boundary point at parameter t expressed in e2's
    # normalized frame: q(t) = A + B cos t + C sin t, so that
    # ellipse_eval(e2, point_at(t)) = sum_k (A_k + B_k cos t + C_k sin t)^2.
    u1, v1 = e1.axes()
    u2, v2 = e2.axes()
    rot2 = np.vstack([u2 / e2.a, v2 / e2.b])
    d = np.array([e1.cx - e2.cx, e1.cy - e2.cy])
    return rot2 @ d, rot2 @ (e1.a * u1), rot2 @ (e1.b * v1)


def _polish(A, B, C, t: float, iters: int = 60) -> float:
    # Newton on f(t) = |A + B cos t + C sin t|^2 - 1, with scalar arithmetic
    a0, a1 = float(A[0]), float(A[1])
    b0, b1 = float(B[0]), float(B[1])
    c0, c1 = float(C[0]), float(C[1])
    for _ in range(iters):
        ct, st = math.cos(t), math.sin(t)
        q0 = a0 + b0 * ct + c0 * st
        q1 = a1 + b1 * ct + c1 * st
        f = q0 * q0 + q1 * q1 - 1.0
        df = 2.0 * (q0 * (c0 * ct - b0 * st) + q1 * (c1 * ct - b1 * st))
        if f == 0.0 or df == 0.0:
            break
        # damped so a seed far from the unit circle cannot jump across roots
        step = max(-0.25, min(0.25, f / df))
        t -= step
        if abs(step) < 1e-14:
            break
    return t


def ellipse_pair_intersections(e1: Ellipse, e2: Ellipse, tol: float = 1e-9) -> list[tuple[float, float]]:
    """Real intersection points of two ellipse boundaries (0 to 4 points).

    The boundary of ``e1`` is parametrized by angle and substituted into the
    implicit equation of ``e2``. With ``z = exp(i t)`` this becomes a quartic
    whose unit-modulus roots are the intersections. Each root seeds a Newton
    iteration on the real parameter, and only candidates whose residual on
    both conics is within ``tol`` survive. Points closer than ``tol`` are
    merged (tangency).
    """
    A, B, C = _param_quadratic(e1, e2)
    # z * q_k(t) = g_k(z) = (B_k - i C_k)/2 z^2 + A_k z + (B_k + i C_k)/2
    quartic = np.zeros(5, dtype=complex)
    for k in range(2):
        g = np.array([(B[k] - 1j * C[k]) / 2, A[k], (B[k] + 1j * C[k]) / 2])
        quartic += np.polymul(g, g)
    quartic[2] -= 1.0
    scale = float(A @ A + B @ B + C @ C + 1.0)
    if np.max(np.abs(quartic)) <= tol * scale:
        raise DegenerateConics(f"{e1} and {e2} are the same conic")

    lead = np.flatnonzero(np.abs(quartic) > 1e-14 * scale)
    roots = np.roots(quartic[lead[0]:]) if lead.size else np.array([])

    found: list[np.ndarray] = []
    for z in roots:
        if z == 0:
            continue
        t = _polish(A, B, C, float(np.angle(z)))
        p = e1.point_at(t)
        if abs(ellipse_eval(e2, p) - 1.0) > tol or abs(ellipse_eval(e1, p) - 1.0) > tol:
            continue
        if any(np.hypot(*(p - q)) <= tol for q in found):
            continue
        found.append(p)
    found.sort(key=lambda q: (q[0], q[1]))
    return [(float(q[0]), float(q[1])) for q in found]


def point_in_polygon(poly, p, boundary_tol: float = 1e-9) -> Containment:
    """Even-odd containment of ``p`` in the closed polygon ``poly``."""
    pts = np.asarray(poly, dtype=float)
    if len(pts) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    x, y = float(p[0]), float(p[1])
    a = pts
    b = np.roll(pts, -1, axis=0)
    ab = b - a
    ap = np.array([x, y]) - a
    seg_len2 = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.clip(np.where(seg_len2 > 0, np.einsum("ij,ij->i", ap, ab) / seg_len2, 0.0), 0.0, 1.0)
    closest = a + t[:, None] * ab
    if np.min(np.hypot(closest[:, 0] - x, closest[:, 1] - y)) <= boundary_tol:
        return Containment.BOUNDARY

    y0, y1 = a[:, 1], b[:, 1]
    straddles = (y0 > y) != (y1 > y)
    with np.errstate(invalid="ignore", divide="ignore"):
        x_cross = a[:, 0] + (y - y0) * ab[:, 0] / (y1 - y0)
    crossings = int(np.count_nonzero(straddles & (x_cross > x)))
    return Containment.INSIDE if crossings % 2 else Containment.OUTSIDE


def rasterize_union(ellipses: Iterable[Ellipse], width: int, height: int) -> np.ndarray:
    """Boolean mask whose pixels have their center inside at least one ellipse."""
    if width <= 0 or height <= 0:
        raise ValueError("mask dimensions must be positive")
    mask = np.zeros((height, width), dtype=bool)
    for e in ellipses:
        # axis-aligned half extents of the rotated ellipse
        c, s = math.cos(e.phi), math.sin(e.phi)
        hx = math.hypot(e.a * c, e.b * s)
        hy = math.hypot(e.a * s, e.b * c)
        c0 = max(0, int(math.floor(e.cx - hx - 1)))
        c1 = min(width, int(math.ceil(e.cx + hx + 1)))
        r0 = max(0, int(math.floor(e.cy - hy - 1)))
        r1 = min(height, int(math.ceil(e.cy + hy + 1)))
        if c0 >= c1 or r0 >= r1:
            continue
        X, Y = np.meshgrid(np.arange(c0, c1) + 0.5, np.arange(r0, r1) + 0.5)
        mask[r0:r1, c0:c1] |= ellipse_eval(e, np.stack([X, Y], axis=-1)) <= 1.0
    return mask

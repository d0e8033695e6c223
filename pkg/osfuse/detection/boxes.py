"""Oriented bounding boxes: conversions, rotated IoU and Gaussian ProbIoU.

Coordinates are normalized image units. Orientation follows the usual
math convention: positive signed (shoelace) area means counter-clockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..core.errors import ContractError, DegeneracyError

HALF_PI = math.pi / 2.0
DET_FLOOR = 1e-30
_POINT_TOL = 1e-12


@dataclass(frozen=True)
class OrientedBox:
    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        values = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in values):
            raise ContractError(f"box fields must be finite, got {values}")
        if self.w < 0 or self.h < 0:
            raise ContractError(f"box sides must be non-negative, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h, self.theta])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "OrientedBox":
        cx, cy, w, h, theta = (float(v) for v in values)
        return cls(cx, cy, w, h, theta)


@dataclass(frozen=True)
class Quad:
    """Four vertices as a (4, 2) array of (x, y)."""
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        if pts.shape != (4, 2):
            raise ContractError(f"a quad has exactly four vertices, got {pts.shape[0]}")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def signed_area(self) -> float:
        return polygon_signed_area(self.points)

    def canonical(self) -> "Quad":
        """Same vertices in counter-clockwise order."""
        if self.signed_area < 0:
            return Quad(self.points[::-1])
        return self

    def flat(self) -> List[float]:
        return [float(v) for v in self.points.reshape(-1)]


@dataclass(frozen=True)
class GaussianBox:
    mean: np.ndarray  # (2,)
    cov: np.ndarray   # (2, 2)


# ------------------------------------------------------------ conversions
def normalize_angle(b: OrientedBox) -> OrientedBox:
    """Equivalent box with theta in [0, pi/2); a quarter-turn reduction swaps w and h."""
    theta = math.fmod(b.theta, math.pi)
    if theta < 0:
        theta += math.pi
    w, h = b.w, b.h
    if theta >= HALF_PI:
        theta -= HALF_PI
        w, h = h, w
    if theta >= HALF_PI or theta < 0:
        theta = 0.0
    return replace(b, w=w, h=h, theta=theta)


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def obb_to_quad(b: OrientedBox) -> Quad:
    """Rectangle corners, counter-clockwise, unclipped."""
    half = np.array([[-b.w, -b.h], [b.w, -b.h], [b.w, b.h], [-b.w, b.h]]) * 0.5
    return Quad(half @ _rotation(b.theta).T + np.array([b.cx, b.cy]))


def quad_to_obb(q: Quad) -> OrientedBox:
    """Minimum-area rotated rectangle enclosing the quad (rotating calipers on its hull)."""
    pts = np.asarray(q.points if isinstance(q, Quad) else Quad(q).points)
    for i in range(4):
        for j in range(i + 1, 4):
            if np.hypot(*(pts[i] - pts[j])) <= _POINT_TOL:
                raise DegeneracyError(f"quad has duplicate vertices {i} and {j}")
    try:
        hull = ConvexHull(pts)
    except QhullError as e:
        raise DegeneracyError("quad vertices are collinear") from e
    ring = pts[hull.vertices]
    if abs(polygon_signed_area(ring)) <= _POINT_TOL:
        raise DegeneracyError("quad has zero area")

    best = None
    for i in range(len(ring)):
        edge = ring[(i + 1) % len(ring)] - ring[i]
        phi = math.atan2(edge[1], edge[0])
        local = ring @ _rotation(phi)  # coordinates along (edge, normal)
        lo, hi = local.min(axis=0), local.max(axis=0)
        area = float(np.prod(hi - lo))
        if best is None or area < best[0] - 1e-15:
            best = (area, phi, lo, hi)
    _, phi, lo, hi = best
    center = _rotation(phi) @ ((lo + hi) * 0.5)
    w, h = hi - lo
    return normalize_angle(OrientedBox(float(center[0]), float(center[1]), float(w), float(h), phi))


# --------------------------------------------------------------- polygons
def polygon_signed_area(points: np.ndarray) -> float:
    """Shoelace formula; positive for counter-clockwise vertices."""
    if len(points) < 3:
        return 0.0
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o: np.ndarray, a: np.ndarray, p: np.ndarray) -> float:
    return (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])


def clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` by a convex counter-clockwise ``clipper``."""
    output = [np.asarray(p) for p in subject]
    n = len(clipper)
    for i in range(n):
        if not output:
            break
        a, b = clipper[i], clipper[(i + 1) % n]
        current, output = output, []
        for j in range(len(current)):
            p, q = current[j], current[(j + 1) % len(current)]
            p_in = _cross(a, b, p) >= 0
            q_in = _cross(a, b, q) >= 0
            if p_in:
                output.append(p)
            if p_in != q_in:
                dp, dq = _cross(a, b, p), _cross(a, b, q)
                output.append(p + (q - p) * (dp / (dp - dq)))
    return np.array(output).reshape(-1, 2)


def rotated_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection over union of two rotated rectangles; zero-area boxes give 0."""
    area_a, area_b = a.area, b.area
    if area_a <= 0 or area_b <= 0:
        return 0.0
    inter_poly = clip_polygon(obb_to_quad(a).points, obb_to_quad(b).points)
    inter = abs(polygon_signed_area(inter_poly))
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))


def iou_matrix(boxes_a: Sequence[OrientedBox], boxes_b: Sequence[OrientedBox]) -> np.ndarray:
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = rotated_iou(a, b)
    return out


# ---------------------------------------------------------------- ProbIoU
def obb_to_gaussian(b: OrientedBox) -> GaussianBox:
    """Mean at the center; covariance of a uniform rectangle, R diag(w²/12, h²/12) Rᵀ."""
    r = _rotation(b.theta)
    cov = r @ np.diag([b.w ** 2 / 12.0, b.h ** 2 / 12.0]) @ r.T
    cov = 0.5 * (cov + cov.T)
    return GaussianBox(mean=np.array([b.cx, b.cy]), cov=cov)


def bhattacharyya(a: OrientedBox, b: OrientedBox) -> float:
    ga, gb = obb_to_gaussian(a), obb_to_gaussian(b)
    sigma = 0.5 * (ga.cov + gb.cov)
    det = float(np.linalg.det(sigma))
    det_a, det_b = float(np.linalg.det(ga.cov)), float(np.linalg.det(gb.cov))
    if det <= DET_FLOOR or det_a <= DET_FLOOR or det_b <= DET_FLOOR:
        raise DegeneracyError(f"singular box covariance (det {min(det, det_a, det_b):.3g})")
    delta = ga.mean - gb.mean
    term_mean = 0.125 * float(delta @ np.linalg.solve(sigma, delta))
    term_cov = 0.5 * math.log(det / math.sqrt(det_a * det_b))
    return max(0.0, term_mean + term_cov)


def probiou(a: OrientedBox, b: OrientedBox) -> float:
    """Gaussian similarity 1 - Hellinger distance, in [0, 1]."""
    hellinger = math.sqrt(max(0.0, 1.0 - math.exp(-bhattacharyya(a, b))))
    return 1.0 - hellinger


def boxes_array(boxes: Sequence[OrientedBox]) -> np.ndarray:
    """(M, 5) array of cx, cy, w, h, theta."""
    if not boxes:
        return np.zeros((0, 5))
    return np.stack([b.as_array() for b in boxes])

"""Obstacle maps, halfspace algebra for rectangles, and collision predicates.

Obstacles are bare points.  In the dilated map each point grows into a disc
of radius ``R_c`` and the vehicle shrinks to its two disc centres, so every
collision test reduces to a point-to-point or point-to-rectangle distance.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import DiscGeometry, disc_centers_array


class DegenerateGeometryError(ValueError):
    pass


class Bounds(NamedTuple):
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin


class ObstacleMap:
    """Immutable obstacle point set with a uniform spatial hash.

    ``cell_size`` should be at least the query radius used most often
    (``max(R_c, 1 m)`` in the planner) so neighbourhood lookups touch only a
    handful of cells.
    """

    def __init__(self, points, bounds: Bounds, cell_size: float = 1.0):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        bounds = Bounds(*map(float, bounds))
        if bounds.xmax <= bounds.xmin or bounds.ymax <= bounds.ymin:
            raise ValueError(f"empty map bounds {bounds}")
        outside = ~(
            (pts[:, 0] >= bounds.xmin)
            & (pts[:, 0] <= bounds.xmax)
            & (pts[:, 1] >= bounds.ymin)
            & (pts[:, 1] <= bounds.ymax)
        )
        if outside.any():
            bad = pts[np.argmax(outside)]
            raise ValueError(f"obstacle point {tuple(bad)} lies outside map bounds {tuple(bounds)}")
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        pts.setflags(write=False)
        self._points = pts
        self.bounds = bounds
        self.cell_size = float(cell_size)
        buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, (x, y) in enumerate(pts):
            buckets[self._cell(x, y)].append(i)
        self._cells = {k: np.array(v, dtype=np.intp) for k, v in buckets.items()}

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    def indices_in_box(self, xmin: float, ymin: float, xmax: float, ymax: float) -> np.ndarray:
        """Indices of points in hash cells overlapping the box (a superset of the box)."""
        if not self._cells:
            return np.empty(0, dtype=np.intp)
        i0, j0 = self._cell(xmin, ymin)
        i1, j1 = self._cell(xmax, ymax)
        if (i1 - i0 + 1) * (j1 - j0 + 1) > len(self._cells):
            chunks = [idx for (i, j), idx in self._cells.items() if i0 <= i <= i1 and j0 <= j <= j1]
        else:
            chunks = []
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    idx = self._cells.get((i, j))
                    if idx is not None:
                        chunks.append(idx)
        if not chunks:
            return np.empty(0, dtype=np.intp)
        return np.sort(np.concatenate(chunks))

    def points_in_box(self, xmin: float, ymin: float, xmax: float, ymax: float) -> np.ndarray:
        return self._points[self.indices_in_box(xmin, ymin, xmax, ymax)]

    def points_near(self, x: float, y: float, radius: float) -> np.ndarray:
        return self.points_in_box(x - radius, y - radius, x + radius, y + radius)

    def with_points(self, points) -> "ObstacleMap":
        return ObstacleMap(points, self.bounds, self.cell_size)


@dataclass(frozen=True)
class HalfspaceCoeffs:
    """Line ``a x + b y + c = 0`` with a sign chosen so the inside gives ``g < 0``."""

    a: float
    b: float
    c: float
    sign: float = 1.0

    @classmethod
    def from_edge(cls, p1, p2, center) -> "HalfspaceCoeffs":
        a, b, c = line_coeffs(p1, p2)
        at_center = a * center[0] + b * center[1] + c
        if at_center == 0.0:
            raise DegenerateGeometryError("rectangle centre lies on one of its edges")
        return cls(a, b, c, -1.0 if at_center > 0 else 1.0)

    def g(self, point) -> float:
        return self.sign * (self.a * point[0] + self.b * point[1] + self.c)

    def oriented(self) -> tuple[float, float, float]:
        return (self.sign * self.a, self.sign * self.b, self.sign * self.c)


def line_coeffs(p1, p2) -> tuple[float, float, float]:
    """Coefficients of the line through ``p1`` and ``p2``."""
    x1, y1 = float(p1[0]), float(p1[1])
    x2, y2 = float(p2[0]), float(p2[1])
    if x1 == x2 and y1 == y2:
        raise DegenerateGeometryError(f"segment endpoints coincide at {(x1, y1)}")
    return (y2 - y1, x1 - x2, x2 * y1 - x1 * y2)


def oriented_g(point, line: Sequence[float], center) -> float:
    """Signed line value at ``point``; negative iff ``point`` is strictly on ``center``'s side."""
    a, b, c = line
    at_center = a * center[0] + b * center[1] + c
    if at_center == 0.0:
        raise DegenerateGeometryError("reference point lies on the line")
    value = a * point[0] + b * point[1] + c
    return -value if at_center > 0 else value


@dataclass(frozen=True, eq=False)
class Rect:
    """Convex quadrilateral with counter-clockwise vertices P1..P4.

    Built through :meth:`from_frame` it is a rectangle aligned with a unit
    axis; ``extents`` then records (ahead, behind, left, right) growth around
    the skeleton segment that seeded it.  Zero-area rectangles (early
    expansion trials) are allowed; they carry no halfspaces.
    """

    vertices: np.ndarray
    center: np.ndarray
    halfspaces: tuple[HalfspaceCoeffs, ...]
    extents: tuple[float, float, float, float] | None = field(default=None, compare=False)

    @classmethod
    def from_vertices(cls, vertices, extents=None) -> "Rect":
        v = np.asarray(vertices, dtype=float).reshape(4, 2)
        area2 = 0.0
        for k in range(4):
            x1, y1 = v[k]
            x2, y2 = v[(k + 1) % 4]
            area2 += x1 * y2 - x2 * y1
        edges = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        tol = 1e-12 * float(edges.sum()) ** 2
        if area2 < -tol:
            raise DegenerateGeometryError("vertices must be counter-clockwise")
        center = v.mean(axis=0)
        if area2 > tol and edges.min() > 0.0:
            hs = tuple(HalfspaceCoeffs.from_edge(v[k], v[(k + 1) % 4], center) for k in range(4))
        else:
            hs = ()
        v.setflags(write=False)
        center.setflags(write=False)
        return cls(v, center, hs, extents)

    @classmethod
    def from_frame(cls, origin, heading: float, length: float, extents) -> "Rect":
        """Rectangle around the skeleton ``origin -> origin + length * (cos, sin)``."""
        ahead, behind, left, right = extents
        u = np.array([math.cos(heading), math.sin(heading)])
        n = np.array([-u[1], u[0]])
        o = np.asarray(origin, dtype=float)
        lo, hi = -behind, length + ahead
        corners = [o + lo * u - right * n, o + hi * u - right * n, o + hi * u + left * n, o + lo * u + left * n]
        return cls.from_vertices(corners, extents=tuple(float(e) for e in extents))

    @property
    def degenerate(self) -> bool:
        return not self.halfspaces

    @property
    def coeff_array(self) -> np.ndarray:
        """Oriented ``(a, b, c)`` rows, shape (4, 3)."""
        return np.array([h.oriented() for h in self.halfspaces])


def rect_contains(point, r: Rect) -> bool:
    # boundary counts as inside
    if r.degenerate:
        return bool(point_rect_distance(point, r)[0] == 0.0)
    return all(h.g(point) <= 0.0 for h in r.halfspaces)


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(p - a, axis=-1)
    t = np.clip(((p - a) @ ab) / denom, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def point_rect_distance(points, r: Rect) -> np.ndarray:
    """Exact Euclidean distance from each point to the closed rectangle (0 inside)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = r.vertices
    d = np.min([_segment_distance(pts, v[k], v[(k + 1) % 4]) for k in range(4)], axis=0)
    # counter-clockwise order: inside iff left of (or on) every edge
    inside = np.ones(len(pts), dtype=bool)
    for k in range(4):
        e = v[(k + 1) % 4] - v[k]
        rel = pts - v[k]
        inside &= e[0] * rel[:, 1] - e[1] * rel[:, 0] >= 0.0
    return np.where(inside, 0.0, d)


def rect_clear(r: Rect, obstacles: ObstacleMap, radius: float) -> bool:
    """True iff every obstacle is at least ``radius`` away from the closed rectangle."""
    lo = r.vertices.min(axis=0) - radius
    hi = r.vertices.max(axis=0) + radius
    near = obstacles.points_in_box(lo[0], lo[1], hi[0], hi[1])
    if len(near) == 0:
        return True
    return bool(np.all(point_rect_distance(near, r) >= radius))


def pose_collision_free(pose, g: DiscGeometry, obstacles: ObstacleMap, margin: float = 0.0) -> bool:
    return bool(poses_collision_free(np.asarray(pose, dtype=float)[None, :3], g, obstacles, margin)[0])


def poses_collision_free(
    poses: np.ndarray, g: DiscGeometry, obstacles: ObstacleMap, margin: float = 0.0
) -> np.ndarray:
    """Vectorised two-disc clearance test for ``(N, 3)`` poses."""
    poses = np.atleast_2d(poses)
    ok = np.ones(len(poses), dtype=bool)
    if len(obstacles) == 0 or len(poses) == 0:
        return ok
    radius = g.radius + margin
    front, rear = disc_centers_array(poses, g)
    centers = np.concatenate([front, rear])
    lo = centers.min(axis=0) - radius
    hi = centers.max(axis=0) + radius
    near = obstacles.points_in_box(lo[0], lo[1], hi[0], hi[1])
    if len(near) == 0:
        return ok
    diff = centers[:, None, :] - near[None, :, :]
    clear = np.all(np.einsum("ijk,ijk->ij", diff, diff) >= radius * radius, axis=1)
    n = len(poses)
    return clear[:n] & clear[n:]


def min_clearance(points: np.ndarray, obstacles: ObstacleMap) -> np.ndarray:
    """Distance from each point to its nearest obstacle (inf for an empty map)."""
    pts = np.atleast_2d(points)
    if len(obstacles) == 0:
        return np.full(len(pts), np.inf)
    diff = pts[:, None, :] - obstacles.points[None, :, :]
    return np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))

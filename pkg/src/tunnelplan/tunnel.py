"""Spatiotemporal tunnels: obstacle-free rectangles around the disc-centre traces.

Each disc trace is cut into ``N_R`` equal time windows.  The chord joining
the trace positions at the window ends is the skeleton of a rectangle that is
grown outwards in ``delta_s`` steps until obstacles (dilated by ``R_c``) or the
expansion cap stop it.  Keeping a disc centre inside its window's rectangle is
then enough to keep the whole body clear of every obstacle point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ObstacleMap, Rect, point_rect_distance, rect_clear
from .model import DiscGeometry
from .reference import ReferenceTrajectory


class TunnelFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class TunnelConfig:
    n_rect: int | None = None  # None: derive from the reference duration
    delta_s: float = 0.1
    max_expansion: float = 4.0
    seconds_per_rect: float = 1.0

    def __post_init__(self):
        if self.n_rect is not None and self.n_rect < 1:
            raise ValueError("n_rect (N_R) must be at least 1")
        if self.delta_s <= 0:
            raise ValueError("delta_s must be positive")
        if self.max_expansion < self.delta_s:
            raise ValueError("max_expansion must be at least delta_s")
        if self.seconds_per_rect <= 0:
            raise ValueError("seconds_per_rect must be positive")


def default_rect_count(t_f_bar: float, n_intervals: int, seconds_per_rect: float = 1.0) -> int:
    """ceil(t_f_bar / seconds_per_rect) clamped to [2, NE], then lowered to a divisor of NE."""
    n = min(max(math.ceil(t_f_bar / seconds_per_rect), 2), n_intervals)
    return largest_divisor_at_most(n_intervals, n)


def largest_divisor_at_most(total: int, n: int) -> int:
    n = max(1, min(n, total))
    while total % n:
        n -= 1
    return n


@dataclass(frozen=True)
class TunnelSet:
    """Representative rectangles for the front (``rects_f``) and rear (``rects_r``) disc."""

    rects_f: tuple[Rect, ...]
    rects_r: tuple[Rect, ...]
    points_f: np.ndarray
    points_r: np.ndarray

    @property
    def n_rect(self) -> int:
        return len(self.rects_f)

    @property
    def n_halfspaces(self) -> int:
        return sum(len(r.halfspaces) for r in self.rects_f + self.rects_r)

    @property
    def coeffs_f(self) -> np.ndarray:
        """Oriented (a, b, c) per rectangle and edge, shape (N_R, 4, 3)."""
        return np.stack([r.coeff_array for r in self.rects_f])

    @property
    def coeffs_r(self) -> np.ndarray:
        return np.stack([r.coeff_array for r in self.rects_r])

    def interval(self, i: int) -> tuple[float, float]:
        """Normalised time window of rectangle ``i`` (zero-based)."""
        n = self.n_rect
        return (i / n, (i + 1) / n)

    def rect_index(self, tau: float) -> int:
        """Rectangle covering normalised time ``tau`` (the later one on a shared boundary)."""
        return min(int(math.floor(tau * self.n_rect)), self.n_rect - 1)

    def to_dict(self) -> dict:
        """Plain-JSON form: per trace, the representative points and each rectangle."""

        def trace(rects, points):
            return {
                "points": np.asarray(points).tolist(),
                "rects": [
                    {
                        "interval": list(self.interval(i)),
                        "vertices": r.vertices.tolist(),
                        "extents": list(r.extents) if r.extents is not None else None,
                        "coeffs": r.coeff_array.tolist(),
                    }
                    for i, r in enumerate(rects)
                ],
            }

        return {"n_rect": self.n_rect, "front": trace(self.rects_f, self.points_f), "rear": trace(self.rects_r, self.points_r)}


def sample_representative_points(times: np.ndarray, trace: np.ndarray, n_rect: int) -> np.ndarray:
    """Trace positions at ``n_rect + 1`` evenly spaced instants over ``[times[0], times[-1]]``."""
    trace = np.atleast_2d(np.asarray(trace, dtype=float))
    times = np.asarray(times, dtype=float)
    if len(trace) == 0:
        raise ValueError("empty trace")
    if n_rect < 1:
        raise ValueError("n_rect must be at least 1")
    if len(trace) == 1 or times[-1] == times[0]:
        return np.repeat(trace[:1], n_rect + 1, axis=0)
    t = np.linspace(times[0], times[-1], n_rect + 1)
    return np.column_stack([np.interp(t, times, trace[:, j]) for j in range(trace.shape[1])])


def expand_rectangle(
    segment,
    obstacles: ObstacleMap,
    radius: float,
    cfg: TunnelConfig,
    fallback_heading: float = 0.0,
) -> Rect:
    """Grow a rectangle around ``segment`` by round-robin ``delta_s`` trials.

    The four directions (ahead, behind, left, right of the skeleton) take one
    trial per turn; a direction dies at its first rejected trial or when the
    next trial would pass ``max_expansion``.  Every trial checks the whole
    candidate rectangle against the obstacles dilated by ``radius``.
    """
    p0 = np.asarray(segment[0], dtype=float)
    p1 = np.asarray(segment[1], dtype=float)
    chord = p1 - p0
    length = float(np.hypot(*chord))
    heading = math.atan2(chord[1], chord[0]) if length > 0.0 else fallback_heading
    cap = int(math.floor(cfg.max_expansion / cfg.delta_s + 1e-9))

    u = np.array([math.cos(heading), math.sin(heading)])
    n = np.array([-u[1], u[0]])
    # a corner of a rotated rectangle reaches sqrt(2) * cap from the skeleton end
    reach = math.sqrt(2.0) * cfg.max_expansion + radius
    lo = np.minimum(p0, p1) - reach
    hi = np.maximum(p0, p1) + reach
    near = obstacles.points_in_box(lo[0], lo[1], hi[0], hi[1]) - p0
    along, across = near @ u, near @ n
    r2 = radius * radius

    def clear(counts) -> bool:
        if len(near) == 0:
            return True
        ahead, behind, left, right = (c * cfg.delta_s for c in counts)
        ds = np.maximum(np.maximum(-behind - along, along - (length + ahead)), 0.0)
        dn = np.maximum(np.maximum(-right - across, across - left), 0.0)
        return bool(np.all(ds * ds + dn * dn >= r2))

    counts = [0, 0, 0, 0]
    alive = [clear(counts)] * 4
    while any(alive):
        for d in range(4):
            if not alive[d]:
                continue
            if counts[d] >= cap:
                alive[d] = False
                continue
            counts[d] += 1
            if not clear(counts):
                counts[d] -= 1
                alive[d] = False
    extents = tuple(c * cfg.delta_s for c in counts)
    return Rect.from_frame(p0, heading, length, extents)


def _chord_headings(times, thetas, n_rect):
    t = np.linspace(times[0], times[-1], 2 * n_rect + 1)[1::2]
    return np.interp(t, times, thetas) if len(times) > 1 else np.full(n_rect, thetas[0])


def build_tunnels(
    ref: ReferenceTrajectory,
    obstacles: ObstacleMap,
    discs: DiscGeometry,
    cfg: TunnelConfig,
    n_rect: int | None = None,
) -> TunnelSet:
    """Representative rectangles along both disc traces of ``ref``.

    ``n_rect`` overrides ``cfg.n_rect``; when both are unset the count follows
    :func:`default_rect_count` for the reference's grid.
    """
    n_intervals = max(ref.n_samples - 1, 1)
    n = n_rect or cfg.n_rect or default_rect_count(ref.t_f_bar, n_intervals, cfg.seconds_per_rect)
    headings = _chord_headings(ref.times, ref.states[:, 4], n)
    traces = []
    for trace in (ref.traj_f, ref.traj_r):
        pts = sample_representative_points(ref.times, trace, n)
        rects = []
        for i in range(n):
            r = expand_rectangle((pts[i], pts[i + 1]), obstacles, discs.radius, cfg, headings[i])
            if r.degenerate:
                raise TunnelFailure(f"rectangle {i} collapsed to zero width (extents {r.extents})")
            # skeleton endpoints may sit on an edge; allow for rounding there
            if np.max(point_rect_distance(pts[i : i + 2], r)) > 1e-9:
                raise TunnelFailure(f"rectangle {i} does not contain its skeleton")
            if not rect_clear(r, obstacles, discs.radius):
                raise TunnelFailure(f"rectangle {i} intersects a dilated obstacle")
            rects.append(r)
        traces.append((tuple(rects), pts))
    (rf, pf), (rr, pr) = traces
    return TunnelSet(rf, rr, pf, pr)

"""Hybrid A* over (x, y, theta) with Reeds-Shepp analytic expansions."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..geometry import ObstacleMap, poses_collision_free
from ..model import DiscGeometry, VehicleParams
from .reeds_shepp import rs_length, rs_shortest

FORWARD, REVERSE = 1, -1


class SearchFailure(RuntimeError):
    """Raised when no path is found; ``reason`` is a short machine-readable tag."""

    def __init__(self, reason: str, message: str, expansions: int = 0):
        super().__init__(message)
        self.reason = reason
        self.expansions = expansions


class Waypoint(NamedTuple):
    x: float
    y: float
    theta: float
    direction: int  # motion direction arriving at this waypoint (+1 / -1)


@dataclass(frozen=True)
class SearchConfig:
    xy_resolution: float = 0.5
    heading_bins: int = 24
    primitive_arc_length: float | None = None  # None -> xy_resolution * sqrt(2)
    steering_samples: int = 3
    reverse_penalty: float = 1.5
    switch_penalty: float = 2.0
    steering_penalty: float = 0.2
    rs_shot_period: int = 5
    node_budget: int = 200_000
    # extra clearance demanded from search poses (start/goal checks use the bare radius)
    collision_margin: float = 0.0
    # padding of the holonomic-heuristic window around start and goal (m)
    heuristic_margin: float = 10.0

    def __post_init__(self):
        for name in ("xy_resolution", "reverse_penalty", "rs_shot_period", "node_budget", "heuristic_margin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"search.{name} must be positive")
        for name in ("switch_penalty", "steering_penalty", "collision_margin"):
            if getattr(self, name) < 0:
                raise ValueError(f"search.{name} must be non-negative")
        if self.heading_bins < 8:
            raise ValueError("search.heading_bins must be at least 8")
        if self.steering_samples < 1:
            raise ValueError("search.steering_samples must be at least 1")
        if self.primitive_arc_length is not None and self.primitive_arc_length <= 0:
            raise ValueError("search.primitive_arc_length must be positive")

    @property
    def arc_length(self) -> float:
        if self.primitive_arc_length is None:
            return self.xy_resolution * math.sqrt(2.0)
        return self.primitive_arc_length


class _Node(NamedTuple):
    pose: tuple[float, float, float]
    g: float
    parent: int  # node id, -1 for the root
    samples: np.ndarray  # (k, 3) poses after the parent, ending at ``pose``
    direction: int
    steer: float


def _angle_diff(a: float, b: float) -> float:
    return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi)


class HybridAStar:
    """One planner instance per query; the instance owns all mutable search state."""

    def __init__(
        self,
        obstacles: ObstacleMap,
        discs: DiscGeometry,
        vehicle: VehicleParams,
        cfg: SearchConfig | None = None,
    ):
        self.obstacles = obstacles
        self.discs = discs
        self.vehicle = vehicle
        self.cfg = cfg or SearchConfig()
        self.rho = vehicle.min_turn_radius
        self.check_step = min(self.cfg.xy_resolution, discs.radius) / 2.0
        self.expansions = 0
        self._primitives = self._make_primitives()

    # -- primitives -------------------------------------------------------------------

    def _make_primitives(self):
        cfg = self.cfg
        n = cfg.steering_samples
        steers = [0.0] if n == 1 else list(np.linspace(-self.vehicle.phi_max, self.vehicle.phi_max, n))
        k = max(1, math.ceil(cfg.arc_length / self.check_step))
        fractions = np.arange(1, k + 1) / k
        prims = []
        for direction in (FORWARD, REVERSE):
            for steer in steers:
                s = direction * cfg.arc_length * fractions
                curv = math.tan(steer) / self.vehicle.wheelbase
                dth = s * curv
                if abs(curv) < 1e-12:
                    dx, dy = s, np.zeros_like(s)
                else:
                    dx = np.sin(dth) / curv
                    dy = (1.0 - np.cos(dth)) / curv
                prims.append((direction, float(steer), dx, dy, dth))
        return prims

    def _expand_samples(self, pose):
        x, y, th = pose
        c, s = math.cos(th), math.sin(th)
        out = []
        for direction, steer, dx, dy, dth in self._primitives:
            xs = x + c * dx - s * dy
            ys = y + s * dx + c * dy
            out.append((direction, steer, np.column_stack([xs, ys, th + dth])))
        return out

    # -- validity ---------------------------------------------------------------------

    def _in_bounds(self, poses: np.ndarray) -> np.ndarray:
        b = self.obstacles.bounds
        return (poses[:, 0] >= b.xmin) & (poses[:, 0] <= b.xmax) & (poses[:, 1] >= b.ymin) & (poses[:, 1] <= b.ymax)

    def _valid(self, poses: np.ndarray) -> np.ndarray:
        ok = self._in_bounds(poses)
        if ok.any():
            ok[ok] = poses_collision_free(poses[ok], self.discs, self.obstacles, self.cfg.collision_margin)
        return ok

    # -- heuristic --------------------------------------------------------------------

    def _holonomic_field(self, start, goal):
        """Grid distance-to-goal for the rear-axle point, 8-connected, R_c-dilated cells."""
        cfg, b = self.cfg, self.obstacles.bounds
        res = cfg.xy_resolution
        pad = cfg.heuristic_margin
        x0 = max(b.xmin, min(start[0], goal[0]) - pad)
        y0 = max(b.ymin, min(start[1], goal[1]) - pad)
        x1 = min(b.xmax, max(start[0], goal[0]) + pad)
        y1 = min(b.ymax, max(start[1], goal[1]) + pad)
        nx = max(1, int(math.ceil((x1 - x0) / res)))
        ny = max(1, int(math.ceil((y1 - y0) / res)))
        cx = x0 + (np.arange(nx) + 0.5) * res
        cy = y0 + (np.arange(ny) + 0.5) * res
        free = np.ones((nx, ny), dtype=bool)
        pts = self.obstacles.points_in_box(x0 - 1.0, y0 - 1.0, x1 + 1.0, y1 + 1.0)
        r = self.discs.radius
        for px, py in pts:
            i0, i1 = np.searchsorted(cx, [px - r, px + r])
            j0, j1 = np.searchsorted(cy, [py - r, py + r])
            if i0 >= i1 or j0 >= j1:
                continue
            d2 = (cx[i0:i1, None] - px) ** 2 + (cy[None, j0:j1] - py) ** 2
            free[i0:i1, j0:j1] &= d2 >= r * r
        gi = min(nx - 1, max(0, int((goal[0] - x0) / res)))
        gj = min(ny - 1, max(0, int((goal[1] - y0) / res)))
        free[gi, gj] = True

        ids = np.arange(nx * ny).reshape(nx, ny)
        rows, cols, wts = [], [], []
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            a = free[max(0, -di) : nx - max(0, di), max(0, -dj) : ny - max(0, dj)]
            bb = free[max(0, di) : nx + min(0, di), max(0, dj) : ny + min(0, dj)]
            both = a & bb
            src = ids[max(0, -di) : nx - max(0, di), max(0, -dj) : ny - max(0, dj)][both]
            dst = ids[max(0, di) : nx + min(0, di), max(0, dj) : ny + min(0, dj)][both]
            rows.append(src)
            cols.append(dst)
            wts.append(np.full(len(src), res * math.hypot(di, dj)))
        graph = coo_matrix(
            (np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny, nx * ny)
        ).tocsr()
        dist = dijkstra(graph, directed=False, indices=gi * ny + gj).reshape(nx, ny)
        self._field = (x0, y0, res, nx, ny, dist)

    def _holonomic(self, x: float, y: float) -> float:
        x0, y0, res, nx, ny, dist = self._field
        i = int((x - x0) // res)
        j = int((y - y0) // res)
        if 0 <= i < nx and 0 <= j < ny:
            d = dist[i, j]
            # unreachable cells stay expandable but are explored last
            return d if math.isfinite(d) else 1e6
        return 0.0

    def heuristic(self, pose, goal) -> float:
        return max(rs_length(pose, goal, self.rho), self._holonomic(pose[0], pose[1]))

    # -- search -----------------------------------------------------------------------

    def _key(self, pose) -> tuple[int, int, int]:
        res = self.cfg.xy_resolution
        bins = self.cfg.heading_bins
        th = pose[2] % (2.0 * math.pi)
        return (math.floor(pose[0] / res), math.floor(pose[1] / res), int(th / (2.0 * math.pi) * bins) % bins)

    def _try_shot(self, pose, goal):
        path = rs_shortest(pose, goal, self.rho)
        if not path.segments:
            return np.empty((0, 4))
        samples = path.sample(pose, self.check_step)[1:]
        if self._valid(samples[:, :3]).all():
            return samples
        return None

    def plan(self, start, goal) -> list[Waypoint]:
        start = tuple(float(v) for v in start[:3])
        goal = tuple(float(v) for v in goal[:3])
        cfg = self.cfg
        for name, pose in (("start", start), ("goal", goal)):
            p = np.array([pose])
            if not self._in_bounds(p)[0]:
                raise SearchFailure(f"{name}_out_of_bounds", f"{name} pose {pose} is outside the map")
            if not poses_collision_free(p, self.discs, self.obstacles)[0]:
                raise SearchFailure(f"{name}_in_collision", f"{name} pose {pose} is in collision")

        if math.hypot(goal[0] - start[0], goal[1] - start[1]) < 1e-9 and _angle_diff(goal[2], start[2]) < 1e-9:
            return [Waypoint(*start, FORWARD)]

        self._holonomic_field(start, goal)
        nodes: list[_Node] = [_Node(start, 0.0, -1, np.empty((0, 3)), FORWARD, 0.0)]
        best_g: dict[tuple[int, int, int], float] = {self._key(start): 0.0}
        closed: set[tuple[int, int, int]] = set()
        counter = itertools.count()
        h0 = self.heuristic(start, goal)
        heap = [(h0, h0, next(counter), 0)]
        goal_tol_xy = cfg.xy_resolution
        goal_tol_th = 2.0 * math.pi / cfg.heading_bins
        self.expansions = 0

        while heap:
            _, _, _, nid = heapq.heappop(heap)
            node = nodes[nid]
            key = self._key(node.pose)
            if key in closed:
                continue
            closed.add(key)
            self.expansions += 1
            if self.expansions > cfg.node_budget:
                raise SearchFailure("budget", f"node budget of {cfg.node_budget} exhausted", self.expansions - 1)

            near_goal = (
                math.hypot(node.pose[0] - goal[0], node.pose[1] - goal[1]) <= goal_tol_xy
                and _angle_diff(node.pose[2], goal[2]) <= goal_tol_th
            )
            if near_goal or (self.expansions - 1) % cfg.rs_shot_period == 0:
                shot = self._try_shot(node.pose, goal)
                if shot is not None:
                    return self._reconstruct(nodes, nid, shot, goal)

            for direction, steer, samples in self._expand_samples(node.pose):
                if not self._valid(samples).all():
                    continue
                end = tuple(samples[-1])
                k = self._key(end)
                if k in closed:
                    continue
                step = cfg.arc_length * (cfg.reverse_penalty if direction == REVERSE else 1.0)
                step += cfg.steering_penalty * abs(steer) * cfg.arc_length
                if nid != 0 and direction != node.direction:
                    step += cfg.switch_penalty
                g = node.g + step
                if best_g.get(k, math.inf) <= g:
                    continue
                best_g[k] = g
                h = self.heuristic(end, goal)
                nodes.append(_Node(end, g, nid, samples, direction, steer))
                heapq.heappush(heap, (g + h, h, next(counter), len(nodes) - 1))

        raise SearchFailure("exhausted", "open list exhausted without reaching the goal", self.expansions)

    def _reconstruct(self, nodes, nid, shot, goal) -> list[Waypoint]:
        chain = []
        while nid != -1:
            chain.append(nodes[nid])
            nid = nodes[nid].parent
        chain.reverse()
        rows: list[tuple[float, float, float, int]] = []
        for node in chain[1:]:
            rows.extend((x, y, th, node.direction) for x, y, th in node.samples)
        rows.extend((x, y, th, int(d)) for x, y, th, d in shot)
        first_dir = rows[0][3] if rows else FORWARD
        start = chain[0].pose
        wps = [Waypoint(start[0], start[1], start[2], first_dir)]
        wps.extend(Waypoint(float(x), float(y), float(th), int(d)) for x, y, th, d in rows)
        # terminate exactly on the goal pose (heading kept on the unwrapped branch)
        theta = np.unwrap([w.theta for w in wps])
        last = wps[-1]
        goal_theta = theta[-1] + ((goal[2] - theta[-1] + math.pi) % (2.0 * math.pi) - math.pi)
        wps[-1] = Waypoint(goal[0], goal[1], goal_theta, last.direction)
        theta[-1] = goal_theta
        return [Waypoint(w.x, w.y, float(t), w.direction) for w, t in zip(wps, theta)]


def plan_path(
    start,
    goal,
    obstacles: ObstacleMap,
    discs: DiscGeometry,
    vehicle: VehicleParams,
    cfg: SearchConfig | None = None,
) -> list[Waypoint]:
    """Collision-free waypoint sequence from ``start`` to ``goal``; raises :class:`SearchFailure`."""
    return HybridAStar(obstacles, discs, vehicle, cfg).plan(start, goal)

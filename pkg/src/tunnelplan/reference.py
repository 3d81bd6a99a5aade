"""Turn a hybrid A* path into a timed reference trajectory.

The path is cut at its cusps, each piece gets the rest-to-rest minimum-time
speed profile, and the result is resampled on the uniform grid later used by
the optimiser so the warm start maps one-to-one onto decision variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DiscGeometry, VehicleParams, disc_centers_array
from .search import Waypoint


@dataclass(frozen=True)
class SpeedProfile:
    """Rest-to-rest minimum-time profile over ``length`` metres."""

    length: float
    v_max: float
    a_max: float
    duration: float
    ramp_time: float
    peak_speed: float

    def speed(self, t: float) -> float:
        if t <= 0.0 or t >= self.duration:
            return 0.0
        if self.ramp_time == 0.0:
            return self.peak_speed
        if t < self.ramp_time:
            return self.a_max * t
        if t > self.duration - self.ramp_time:
            return self.a_max * (self.duration - t)
        return self.peak_speed

    def distance(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= self.duration:
            return self.length
        tr = self.ramp_time
        if tr == 0.0:
            return self.peak_speed * t
        if t < tr:
            return 0.5 * self.a_max * t * t
        if t > self.duration - tr:
            rem = self.duration - t
            return self.length - 0.5 * self.a_max * rem * rem
        return 0.5 * self.a_max * tr * tr + self.peak_speed * (t - tr)


def min_time_profile(arc_length: float, v_max: float, a_max: float) -> SpeedProfile:
    """Bang-bang (or constant-speed, when ``a_max`` is infinite) rest-to-rest profile."""
    if arc_length < 0:
        raise ValueError(f"arc length must be non-negative, got {arc_length}")
    if v_max <= 0 or a_max <= 0:
        raise ValueError("v_max and a_max must be positive")
    s = float(arc_length)
    if s == 0.0:
        return SpeedProfile(0.0, v_max, a_max, 0.0, 0.0, 0.0)
    if math.isinf(a_max):
        return SpeedProfile(s, v_max, a_max, s / v_max, 0.0, v_max)
    if s >= v_max * v_max / a_max:
        return SpeedProfile(s, v_max, a_max, s / v_max + v_max / a_max, v_max / a_max, v_max)
    tr = math.sqrt(s / a_max)
    return SpeedProfile(s, v_max, a_max, 2.0 * tr, tr, a_max * tr)


@dataclass(frozen=True)
class PathSegment:
    waypoints: tuple[Waypoint, ...]
    direction: int

    @property
    def cumulative(self) -> np.ndarray:
        xy = np.array([(w.x, w.y) for w in self.waypoints])
        if len(xy) < 2:
            return np.zeros(len(xy))
        return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(xy, axis=0).T))])

    @property
    def arc_length(self) -> float:
        return float(self.cumulative[-1])


def split_at_cusps(path: Sequence[Waypoint]) -> list[PathSegment]:
    """Cut the path wherever the driving direction flips.

    A cusp waypoint ends one segment and starts the next, so the segments
    partition the path's motion.
    """
    if not path:
        raise ValueError("empty path")
    wps = list(path)
    if len(wps) == 1:
        return [PathSegment((wps[0],), wps[0].direction)]
    segments = []
    start = 0
    for i in range(1, len(wps) - 1):
        if wps[i + 1].direction != wps[i].direction:
            segments.append(PathSegment(tuple(wps[start : i + 1]), wps[i].direction))
            start = i
    segments.append(PathSegment(tuple(wps[start:]), wps[-1].direction))
    return segments


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Reference samples on a uniform time grid.

    ``states`` rows are ``(x, y, v, phi, theta)``; ``controls`` rows are
    ``(a, omega)`` with the last row repeating the previous one.
    """

    t_f_bar: float
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    traj_f: np.ndarray
    traj_r: np.ndarray
    cusp_times: tuple[float, ...] = ()

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def poses(self) -> np.ndarray:
        return self.states[:, [0, 1, 4]]

    def resample(self, n_intervals: int) -> "ReferenceTrajectory":
        """Same trajectory on ``n_intervals + 1`` grid points (by linear interpolation)."""
        if self.n_samples == n_intervals + 1:
            return self
        if self.n_samples == 1:
            reps = n_intervals + 1
            return ReferenceTrajectory(
                self.t_f_bar,
                np.zeros(reps),
                np.repeat(self.states, reps, axis=0),
                np.repeat(self.controls, reps, axis=0),
                np.repeat(self.traj_f, reps, axis=0),
                np.repeat(self.traj_r, reps, axis=0),
                self.cusp_times,
            )
        t = np.linspace(0.0, self.t_f_bar, n_intervals + 1)
        interp = lambda arr: np.column_stack([np.interp(t, self.times, arr[:, j]) for j in range(arr.shape[1])])
        return ReferenceTrajectory(
            self.t_f_bar, t, interp(self.states), interp(self.controls), interp(self.traj_f), interp(self.traj_r),
            self.cusp_times,
        )


def _segment_steering(seg: PathSegment, p: VehicleParams) -> np.ndarray:
    """Steering angle at each waypoint from finite-difference path curvature."""
    n = len(seg.waypoints)
    if n < 2:
        return np.zeros(n)
    sigma = seg.direction * seg.cumulative
    theta = np.unwrap([w.theta for w in seg.waypoints])
    kappa = np.zeros(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        if n == 2:
            kappa[:] = (theta[1] - theta[0]) / (sigma[1] - sigma[0]) if sigma[1] != sigma[0] else 0.0
        else:
            kappa[1:-1] = (theta[2:] - theta[:-2]) / (sigma[2:] - sigma[:-2])
            kappa[0] = (theta[1] - theta[0]) / (sigma[1] - sigma[0])
            kappa[-1] = (theta[-1] - theta[-2]) / (sigma[-1] - sigma[-2])
    kappa = np.nan_to_num(kappa, nan=0.0, posinf=0.0, neginf=0.0)
    kmax = p.max_curvature
    return np.arctan(p.wheelbase * np.clip(kappa, -kmax, kmax))


def build_reference(
    path: Sequence[Waypoint],
    discs: DiscGeometry,
    p: VehicleParams,
    n_intervals: int = 60,
) -> ReferenceTrajectory:
    """Time-parameterise ``path`` on ``n_intervals + 1`` uniform samples."""
    if n_intervals < 1:
        raise ValueError("n_intervals must be at least 1")
    segments = split_at_cusps(path)
    profiles = [min_time_profile(seg.arc_length, p.v_max, p.a_max) for seg in segments]
    durations = np.array([prof.duration for prof in profiles])
    t_f_bar = float(durations.sum())

    first = path[0]
    theta0 = first.theta
    if t_f_bar == 0.0:
        states = np.array([[first.x, first.y, 0.0, 0.0, theta0]])
        controls = np.zeros((1, 2))
        front, rear = disc_centers_array(states[:, [0, 1, 4]], discs)
        return ReferenceTrajectory(0.0, np.zeros(1), states, controls, front, rear)

    seg_tables = []
    for seg in segments:
        cum = seg.cumulative
        wps = seg.waypoints
        seg_tables.append(
            (
                cum,
                np.array([w.x for w in wps]),
                np.array([w.y for w in wps]),
                np.unwrap([w.theta for w in wps]),
                _segment_steering(seg, p),
            )
        )
    # keep headings continuous across segment joins
    for j in range(1, len(seg_tables)):
        prev_end = seg_tables[j - 1][3][-1]
        th = seg_tables[j][3]
        seg_tables[j] = seg_tables[j][:3] + (th + 2.0 * math.pi * round((prev_end - th[0]) / (2.0 * math.pi)),) + seg_tables[j][4:]

    starts = np.concatenate([[0.0], np.cumsum(durations)])
    times = np.linspace(0.0, t_f_bar, n_intervals + 1)
    states = np.zeros((n_intervals + 1, 5))
    for k, t in enumerate(times):
        j = int(np.searchsorted(starts, t, side="right") - 1)
        j = min(max(j, 0), len(segments) - 1)
        if k == n_intervals:
            j, local = len(segments) - 1, durations[-1]
        else:
            local = t - starts[j]
        prof = profiles[j]
        dist = prof.distance(local)
        cum, xs, ys, ths, phis = seg_tables[j]
        states[k] = (
            np.interp(dist, cum, xs),
            np.interp(dist, cum, ys),
            segments[j].direction * prof.speed(local),
            np.interp(dist, cum, phis),
            np.interp(dist, cum, ths),
        )
    h = t_f_bar / n_intervals
    controls = np.zeros((n_intervals + 1, 2))
    controls[:-1, 0] = np.diff(states[:, 2]) / h
    controls[:-1, 1] = np.diff(states[:, 3]) / h
    if p.accel_bounded:
        controls[:, 0] = np.clip(controls[:, 0], -p.a_max, p.a_max)
    controls[:, 1] = np.clip(controls[:, 1], -p.omega_max, p.omega_max)
    controls[-1] = controls[-2]
    front, rear = disc_centers_array(states[:, [0, 1, 4]], discs)
    return ReferenceTrajectory(t_f_bar, times, states, controls, front, rear, tuple(float(t) for t in starts[1:-1]))

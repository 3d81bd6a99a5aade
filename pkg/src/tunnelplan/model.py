"""Vehicle parameters, bicycle kinematics and the two-disc body cover."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

INF = math.inf


class State(NamedTuple):
    """Vehicle state in the stacking order of the kinematic ODE.

    ``(x, y)`` is the mid-point of the rear axle, ``v`` the signed speed of
    that point (negative means reversing), ``phi`` the front-wheel steering
    angle and ``theta`` the heading.  Headings are never wrapped here.
    """

    x: float
    y: float
    v: float
    phi: float
    theta: float


class Control(NamedTuple):
    a: float
    omega: float


class Pose(NamedTuple):
    x: float
    y: float
    theta: float


class BoundaryState(NamedTuple):
    """Full configuration pinned at the start or end of a manoeuvre."""

    x: float
    y: float
    theta: float
    v: float = 0.0
    phi: float = 0.0
    a: float = 0.0
    omega: float = 0.0

    @property
    def pose(self) -> Pose:
        return Pose(self.x, self.y, self.theta)

    def state(self) -> State:
        return State(self.x, self.y, self.v, self.phi, self.theta)


@dataclass(frozen=True)
class VehicleParams:
    """Geometry and actuation limits.  Defaults are the small off-road AGV."""

    front_hang: float = 0.55  # L_F
    wheelbase: float = 0.85  # L_W
    rear_hang: float = 0.40  # L_R
    width: float = 0.80  # L_B
    a_max: float = INF
    v_max: float = 1.0
    phi_max: float = 0.30
    omega_max: float = 0.5

    # symbols used in error messages so users can map back to the usual notation
    SYMBOLS = {
        "front_hang": "L_F",
        "wheelbase": "L_W",
        "rear_hang": "L_R",
        "width": "L_B",
        "a_max": "a_max",
        "v_max": "v_max",
        "phi_max": "Phi_max",
        "omega_max": "Omega_max",
    }

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            label = f"{f.name} ({self.SYMBOLS[f.name]})"
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ValueError(f"{label} must be a number, got {value!r}")
            if value <= 0:
                raise ValueError(f"{label} must be strictly positive, got {value}")
            if math.isinf(value) and f.name != "a_max":
                raise ValueError(f"{label} must be finite")
        if self.phi_max >= math.pi / 2:
            raise ValueError(f"phi_max (Phi_max) must be below pi/2, got {self.phi_max}")

    @property
    def length(self) -> float:
        return self.rear_hang + self.wheelbase + self.front_hang

    @property
    def accel_bounded(self) -> bool:
        return math.isfinite(self.a_max)

    @property
    def max_curvature(self) -> float:
        return math.tan(self.phi_max) / self.wheelbase

    @property
    def min_turn_radius(self) -> float:
        return self.wheelbase / math.tan(self.phi_max)


@dataclass(frozen=True)
class DiscGeometry:
    """Two congruent discs centred on the quartile points of the body axis.

    Offsets are measured from the rear-axle mid-point along the heading.
    """

    front_offset: float
    rear_offset: float
    radius: float

    @classmethod
    def from_vehicle(cls, p: VehicleParams) -> "DiscGeometry":
        lf, lw, lr = p.front_hang, p.wheelbase, p.rear_hang
        return cls(
            front_offset=(3.0 * lw + 3.0 * lf - lr) / 4.0,
            rear_offset=(lw + lf - 3.0 * lr) / 4.0,
            radius=0.5 * math.hypot((lr + lw + lf) / 2.0, p.width),
        )

    @property
    def spacing(self) -> float:
        return self.front_offset - self.rear_offset


def kinematics_rhs(s: State, u: Control, p: VehicleParams) -> State:
    """Time derivative of ``s`` under control ``u``, returned in State order."""
    return State(
        x=s.v * math.cos(s.theta),
        y=s.v * math.sin(s.theta),
        v=u.a,
        phi=u.omega,
        theta=s.v * math.tan(s.phi) / p.wheelbase,
    )


def euler_step(s: State, u: Control, h: float, p: VehicleParams) -> State:
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    d = kinematics_rhs(s, u, p)
    return State(*(si + h * di for si, di in zip(s, d)))


def kinematics_rhs_array(states: np.ndarray, controls: np.ndarray, wheelbase: float) -> np.ndarray:
    """Vectorised right-hand side; rows are ``(x, y, v, phi, theta)`` / ``(a, omega)``."""
    v, phi, theta = states[:, 2], states[:, 3], states[:, 4]
    out = np.empty_like(states, dtype=float)
    out[:, 0] = v * np.cos(theta)
    out[:, 1] = v * np.sin(theta)
    out[:, 2] = controls[:, 0]
    out[:, 3] = controls[:, 1]
    out[:, 4] = v * np.tan(phi) / wheelbase
    return out


def disc_centers(pose, g: DiscGeometry) -> tuple[tuple[float, float], tuple[float, float]]:
    x, y, theta = pose[0], pose[1], pose[2]
    c, s = math.cos(theta), math.sin(theta)
    front = (x + g.front_offset * c, y + g.front_offset * s)
    rear = (x + g.rear_offset * c, y + g.rear_offset * s)
    return front, rear


def disc_centers_array(poses: np.ndarray, g: DiscGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Disc centres for an ``(N, 3)`` array of ``(x, y, theta)`` poses."""
    poses = np.atleast_2d(poses)
    heading = np.stack([np.cos(poses[:, 2]), np.sin(poses[:, 2])], axis=1)
    front = poses[:, :2] + g.front_offset * heading
    rear = poses[:, :2] + g.rear_offset * heading
    return front, rear


def footprint_vertices(pose, p: VehicleParams) -> np.ndarray:
    """Corners A, B, C, D of the body rectangle, counter-clockwise, shape (4, 2)."""
    x, y, theta = pose[0], pose[1], pose[2]
    back, front = -p.rear_hang, p.wheelbase + p.front_hang
    half = p.width / 2.0
    body = np.array([[back, -half], [front, -half], [front, half], [back, half]])
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return body @ rot.T + np.array([x, y])

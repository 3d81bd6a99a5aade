"""Independent feasibility check of a trajectory against the nominal constraints.

Nothing here uses the tunnel machinery except the optional membership check:
clearance is measured against the raw obstacle points, bounds and boundary
conditions are read from the vehicle and scenario, and the Euler defects are
recomputed from the scalar kinematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import ObstacleMap, min_clearance, point_rect_distance
from ..model import BoundaryState, Control, DiscGeometry, State, VehicleParams, disc_centers_array, euler_step
from .transcription import Trajectory


@dataclass(frozen=True)
class Check:
    passed: bool
    margin: float  # worst slack, negative when violated
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    clearance: Check
    bounds: Check
    boundary: Check
    dynamics: Check
    tunnel: Check | None = None
    tolerances: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict[str, Check]:
        out = {"clearance": self.clearance, "bounds": self.bounds, "boundary": self.boundary, "dynamics": self.dynamics}
        if self.tunnel is not None:
            out["tunnel"] = self.tunnel
        return out

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]


def _wrap(angle):
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def verify(
    traj: Trajectory,
    obstacles: ObstacleMap,
    vehicle: VehicleParams,
    discs: DiscGeometry,
    start: BoundaryState,
    goal: BoundaryState,
    tunnels=None,
    *,
    clearance_tol: float = 1e-6,
    bound_tol: float = 1e-6,
    boundary_tol: float = 1e-4,
    defect_tol: float = 1e-6,
) -> VerificationReport:
    S = np.asarray(traj.states, dtype=float)
    U = np.asarray(traj.controls, dtype=float)
    ne = len(U)
    tol = {"clearance": clearance_tol, "bounds": bound_tol, "boundary": boundary_tol, "dynamics": defect_tol}

    # clearance of both disc centres from every obstacle point
    front, rear = disc_centers_array(S[:, [0, 1, 4]], discs)
    if len(obstacles):
        worst = float(min(min_clearance(front, obstacles).min(), min_clearance(rear, obstacles).min()))
        c_margin = worst - discs.radius
    else:
        c_margin = math.inf
    clearance = Check(c_margin >= -clearance_tol, c_margin, "min disc clearance minus R_c")

    # actuation and state bounds
    slacks = [vehicle.v_max - np.abs(S[:, 2]), vehicle.phi_max - np.abs(S[:, 3])]
    if ne:
        slacks.append(vehicle.omega_max - np.abs(U[:, 1]))
        if vehicle.accel_bounded:
            slacks.append(vehicle.a_max - np.abs(U[:, 0]))
    b_margin = float(min(np.min(x) for x in slacks))
    if traj.t_f <= 0:
        b_margin = min(b_margin, traj.t_f)
    bounds = Check(b_margin >= -bound_tol, b_margin, "worst bound slack")

    # boundary configurations (headings compared modulo 2 pi)
    errs = []
    for row, b in ((S[0], start), (S[-1], goal)):
        errs += [row[0] - b.x, row[1] - b.y, row[2] - b.v, row[3] - b.phi, _wrap(row[4] - b.theta)]
    if ne:
        errs += [U[0, 1] - start.omega, U[-1, 1] - goal.omega]
        if vehicle.accel_bounded:
            errs += [U[0, 0] - start.a, U[-1, 0] - goal.a]
    bc_err = float(np.max(np.abs(errs)))
    boundary = Check(bc_err <= boundary_tol, -bc_err, "max boundary-condition error")

    # forward-Euler defects, recomputed one node at a time
    worst_defect = 0.0
    if ne:
        h = traj.t_f / ne
        for k in range(ne):
            if h <= 0:
                worst_defect = math.inf
                break
            nxt = euler_step(State(*S[k]), Control(*U[k]), h, vehicle)
            worst_defect = max(worst_defect, float(np.max(np.abs(np.asarray(nxt) - S[k + 1]))))
    dynamics = Check(worst_defect <= defect_tol, -worst_defect, "max Euler defect")

    tunnel = None
    if tunnels is not None and ne:
        n_r = tunnels.n_rect
        worst = 0.0
        per = ne / n_r
        for i in range(n_r):
            k0, k1 = int(round(i * per)), int(round((i + 1) * per))
            for pts, rect in ((front[k0 : k1 + 1], tunnels.rects_f[i]), (rear[k0 : k1 + 1], tunnels.rects_r[i])):
                worst = max(worst, float(np.max(point_rect_distance(pts, rect))))
        tunnel = Check(worst <= clearance_tol, -worst, "max distance outside assigned rectangle")

    return VerificationReport(clearance, bounds, boundary, dynamics, tunnel, tol)

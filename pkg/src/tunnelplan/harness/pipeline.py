"""Three-stage planner: search + reference, tunnels, then the NLP."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..geometry import ObstacleMap
from ..model import DiscGeometry
from ..optimize import IpmOptions, NlpProblem, NlpSolution, VerificationReport, solve, transcribe, verify
from ..reference import ReferenceTrajectory, build_reference
from ..search import SearchFailure, Waypoint, plan_path
from ..tunnel import TunnelFailure, TunnelSet, build_tunnels, default_rect_count, largest_divisor_at_most
from .scenario import Scenario

STAGES = ("stage1", "stage2", "stage3")


@dataclass
class PlanResult:
    stage1_ok: bool = False
    stage2_ok: bool | None = None
    stage3_ok: bool | None = None
    times: dict[str, float] = field(default_factory=dict)
    failure: str = ""
    path: list[Waypoint] | None = None
    reference: ReferenceTrajectory | None = None
    tunnels: TunnelSet | None = None
    nlp: NlpProblem | None = None
    solution: NlpSolution | None = None
    report: VerificationReport | None = None

    @property
    def ok(self) -> bool:
        return bool(self.stage1_ok and self.stage2_ok and self.stage3_ok)

    @property
    def total_time(self) -> float:
        return sum(self.times.values())

    @property
    def failed_stage(self) -> str | None:
        for name in STAGES:
            flag = getattr(self, f"{name}_ok")
            if flag is False:
                return name
        return None


def run_pipeline(scenario: Scenario, ipm_options: IpmOptions | None = None) -> PlanResult:
    """Run all stages, stopping at the first failure.

    Dilated-map setup is timed with stage 1, whose statistics it belongs to.
    Stage 3 succeeds only when the solver converges and the independent
    verification passes.
    """
    res = PlanResult()
    p, ne = scenario.vehicle, scenario.nlp.n_intervals
    clock = time.perf_counter

    t0 = clock()
    discs = DiscGeometry.from_vehicle(p)
    obstacles = scenario.obstacles
    cell = max(discs.radius, 1.0)
    if obstacles.cell_size != cell:
        obstacles = ObstacleMap(obstacles.points, obstacles.bounds, cell_size=cell)
    try:
        res.path = plan_path(scenario.start.pose, scenario.goal.pose, obstacles, discs, p, scenario.search)
        res.reference = build_reference(res.path, discs, p, ne).resample(ne)
        res.stage1_ok = True
    except SearchFailure as exc:
        res.failure = f"stage1: {exc.reason}: {exc}"
    res.times["stage1"] = clock() - t0
    if not res.stage1_ok:
        return res

    t0 = clock()
    cfg = scenario.tunnel
    if cfg.n_rect is not None:
        counts = [largest_divisor_at_most(ne, cfg.n_rect)]
    else:
        # a chord between representative points can cut a corner of the disc
        # trace into a dilated obstacle; denser rectangles follow the trace closer
        first = default_rect_count(res.reference.t_f_bar, ne, cfg.seconds_per_rect)
        counts = [k for k in range(first, ne + 1) if ne % k == 0]
    for n_rect in counts:
        try:
            res.tunnels = build_tunnels(res.reference, obstacles, discs, cfg, n_rect)
        except TunnelFailure as exc:
            res.failure = f"stage2: {exc}"
            continue
        res.failure = ""
        break
    res.stage2_ok = res.tunnels is not None
    res.times["stage2"] = clock() - t0
    if not res.stage2_ok:
        return res

    t0 = clock()
    nc = scenario.nlp
    opts = ipm_options or IpmOptions(tol=nc.tol, max_iter=nc.max_iter)
    res.nlp = transcribe(
        scenario,
        res.tunnels,
        discs,
        ne,
        goal_heading_hint=float(res.reference.states[-1, 4]),
        t_min=nc.t_min,
        margin=nc.margin,
        smoothing=nc.smoothing,
    )
    res.solution = solve(res.nlp, res.reference, opts)
    res.report = verify(
        res.solution.trajectory, obstacles, p, discs, scenario.start, scenario.goal, res.tunnels
    )
    res.stage3_ok = res.solution.converged and res.report.passed
    if not res.stage3_ok:
        why = res.solution.status.value if not res.solution.converged else "verification: " + ",".join(res.report.failures())
        res.failure = f"stage3: {why}"
    res.times["stage3"] = clock() - t0
    return res

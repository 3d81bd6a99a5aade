import csv
import io

import numpy as np
import pytest

from conftest import straight_scenario
from tunnelplan.harness import run_pipeline
from tunnelplan.model import BoundaryState
from tunnelplan.optimize import IpmOptions, Status, solve


def test_straight_case_near_analytic_floor(straight_result):
    sol = straight_result.solution
    assert straight_result.ok and sol.converged
    # s / v_max = 5 s; Euler with v_0 = 0 loses one interval
    assert 5.0 <= sol.t_f <= 5.0 * 1.02
    assert sol.primal_inf <= 1e-6 and sol.dual_inf <= 1e-6 and sol.complementarity <= 1e-6
    S = sol.trajectory.states
    assert np.abs(S[:, 1]).max() < 1e-6 and np.abs(S[:, 4]).max() < 1e-6
    assert np.abs(S[:, 2]).max() <= 1.0 + 1e-8


def test_frozen_straight_duration(straight_result):
    # the discrete optimum v_0 = 0, then v = 1 for 59 intervals: t_f = 5 * 60 / 59
    assert straight_result.solution.t_f == pytest.approx(5 * 60 / 59, rel=1e-5)


def test_start_equals_goal_gives_minimum_duration():
    sc = straight_scenario(length=0.0)
    res = run_pipeline(sc)
    assert res.ok
    sol = res.solution
    assert sol.t_f == pytest.approx(sc.nlp.t_min, abs=1e-5)
    assert np.abs(sol.trajectory.controls).max() < 1e-6
    assert np.abs(sol.trajectory.states[:, :2]).max() < 1e-6


def test_warm_start_from_solution_is_a_fixed_point(straight_result):
    sol = straight_result.solution
    again = solve(straight_result.nlp, sol)
    assert again.converged
    assert again.iterations <= 3
    assert abs(again.t_f - sol.t_f) <= 1e-6


def test_warm_start_from_trajectory(straight_result):
    sol = straight_result.solution
    again = solve(straight_result.nlp, sol.trajectory)
    assert again.converged and again.t_f == pytest.approx(sol.t_f, abs=1e-5)


def test_iteration_limit_status(straight_result):
    res = straight_result
    out = solve(res.nlp, res.reference, IpmOptions(max_iter=1))
    assert out.status is Status.ITERATION_LIMIT and not out.converged


def test_iteration_log(straight_result):
    buf = io.StringIO()
    out = solve(straight_result.nlp, straight_result.reference, IpmOptions(log=buf))
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["iteration", "mu", "objective", "primal_inf", "dual_inf", "complementarity"]
    assert len(rows) - 1 == len(out.history) >= out.iterations
    mus = [float(r[1]) for r in rows[1:]]
    assert all(b <= a for a, b in zip(mus, mus[1:]))  # monotone barrier schedule


def test_multipliers_are_nonnegative(parking_result):
    sol = parking_result.solution
    assert sol.converged
    assert np.all(sol.lam_ineq >= 0)


def test_infeasible_fixed_boundary_reported():
    # start speed above v_max violates a bound on a pinned variable
    sc = straight_scenario()
    res = run_pipeline(sc)
    bad = res.nlp.__class__(
        vehicle=res.nlp.vehicle, discs=res.nlp.discs, n_intervals=60,
        start=BoundaryState(0.0, 0.0, 0.0, v=2.0), goal=res.nlp.goal, tunnels=res.tunnels,
    )
    out = solve(bad, res.reference)
    assert out.status is Status.INFEASIBLE and "fixed" in out.message


def test_parking_solution(parking_result):
    sol = parking_result.solution
    assert parking_result.ok
    assert sol.t_f == pytest.approx(11.8915, abs=1e-3)
    assert sol.iterations <= 100

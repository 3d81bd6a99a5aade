import math

import numpy as np
import pytest

from conftest import straight_scenario
from tunnelplan.geometry import Bounds, ObstacleMap
from tunnelplan.model import DiscGeometry, VehicleParams
from tunnelplan.optimize import TranscriptionError, nearest_branch, transcribe
from tunnelplan.reference import build_reference
from tunnelplan.search import FORWARD, Waypoint
from tunnelplan.tunnel import TunnelConfig, build_tunnels

P = VehicleParams()
G = DiscGeometry.from_vehicle(P)
EMPTY = ObstacleMap(np.empty((0, 2)), Bounds(-20, -20, 25, 20))


def straight_nlp(n_rect=6, ne=60, **kw):
    sc = straight_scenario(vehicle=kw.pop("vehicle", P))
    wps = [Waypoint(float(x), 0.0, 0.0, FORWARD) for x in np.linspace(0, 5, 51)]
    ref = build_reference(wps, G, sc.vehicle, ne)
    tunnels = build_tunnels(ref, EMPTY, G, TunnelConfig(), n_rect)
    return transcribe(sc, tunnels, G, ne, **kw), ref


def fd_jacobian(f, z, eps=1e-6):
    cols = []
    for i in range(len(z)):
        e = np.zeros_like(z)
        e[i] = eps
        cols.append((f(z + e) - f(z - e)) / (2 * eps))
    return np.array(cols).T


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def test_counts():
    nlp, _ = straight_nlp()
    assert nlp.n_vars == 5 * 61 + 2 * 60 + 1 == 426
    assert nlp.n_defects == 300
    assert nlp.n_tunnel_rows == 8 * 61 + 8 * 5 == 528
    # 10 state pins and the two end steering rates; a is free when unbounded
    assert nlp.n_eq == 300 + 12
    # |v|, |phi| on 61 nodes, |omega| on 60 controls, and t_f >= t_min
    assert nlp.n_bound_rows == 2 * 61 + 2 * 61 + 2 * 60 + 1
    assert nlp.n_ineq == nlp.n_bound_rows + 528
    sl = nlp.ineq_slices()
    assert sl["tunnel"].stop - sl["tunnel"].start == 528 and sl["t_min"].stop == nlp.n_ineq


def test_bounded_acceleration_adds_rows_and_pins():
    nlp, _ = straight_nlp(vehicle=VehicleParams(a_max=2.0))
    assert nlp.n_eq == 300 + 14
    assert nlp.n_bound_rows == 2 * 61 + 2 * 61 + 2 * 60 + 2 * 60 + 1


def test_single_rectangle_constrains_every_node_once():
    nlp, _ = straight_nlp(n_rect=1)
    assert nlp.n_tunnel_rows == 8 * 61
    assert np.all(np.bincount(nlp._t_node) == 8)


def test_incompatible_rect_count():
    with pytest.raises(TranscriptionError):
        straight_nlp(n_rect=7)


def test_pack_unpack_roundtrip():
    nlp, _ = straight_nlp()
    rng = np.random.default_rng(0)
    z = rng.standard_normal(nlp.n_vars)
    traj = nlp.unpack(z)
    assert traj.states.shape == (61, 5) and traj.controls.shape == (60, 2)
    assert np.array_equal(nlp.pack(traj.states, traj.controls, traj.t_f), z)
    assert traj.times[-1] == pytest.approx(traj.t_f)


def test_initial_point_pins_and_lifts_t_f():
    nlp, ref = straight_nlp()
    z = nlp.initial_point(ref.states, ref.controls, 0.0)
    assert z[nlp.it] > nlp.t_min
    for i, val in nlp.pinned.items():
        assert z[i] == val


def test_variable_box():
    nlp, _ = straight_nlp()
    lo, hi = nlp.variable_box()
    assert hi[nlp.sidx(3, 2)] == 1.0 and lo[nlp.sidx(3, 2)] == -1.0
    assert hi[nlp.sidx(3, 3)] == pytest.approx(0.3) and lo[nlp.sidx(3, 3)] == pytest.approx(-0.3)
    assert hi[nlp.uidx(3, 1)] == 0.5
    assert np.isinf(hi[nlp.uidx(3, 0)]) and np.isinf(hi[nlp.sidx(3, 0)])
    assert lo[nlp.it] == pytest.approx(0.1) and np.isinf(hi[nlp.it])


def test_defects_vanish_on_euler_rollout():
    nlp, _ = straight_nlp()
    rng = np.random.default_rng(1)
    U = rng.uniform(-0.3, 0.3, (60, 2))
    S = np.zeros((61, 5))
    S[0] = (0, 0, 0.5, 0.1, 0.2)
    h = 4.0 / 60
    for k in range(60):
        S[k + 1] = S[k] + h * nlp.rhs(S[k : k + 1], U[k : k + 1])[0]
    assert np.abs(nlp.defects(nlp.pack(S, U, 4.0))).max() < 1e-14


def test_tunnel_rows_match_halfspace_values():
    nlp, ref = straight_nlp()
    z = nlp.initial_point(ref.states, ref.controls, ref.t_f_bar)
    g = nlp.ineq_residual(z)[nlp.ineq_slices()["tunnel"]]
    # the reference itself sits well inside the 4 m rectangles
    assert g.max() < -1.0


def test_margin_tightens_tunnel_rows():
    nlp0, ref = straight_nlp()
    nlp1, _ = straight_nlp(margin=0.2)
    z = nlp0.initial_point(ref.states, ref.controls, ref.t_f_bar)
    sl = nlp0.ineq_slices()["tunnel"]
    g0, g1 = nlp0.ineq_residual(z)[sl], nlp1.ineq_residual(z)[sl]
    coef = nlp0._t_coef
    assert g1 - g0 == pytest.approx(0.2 * np.hypot(coef[:, 0], coef[:, 1]))


@pytest.mark.parametrize("smoothing", [0.0, 0.3])
def test_derivatives_match_finite_differences(smoothing):
    nlp, ref = straight_nlp(smoothing=smoothing)
    rng = np.random.default_rng(2)
    z = nlp.initial_point(ref.states, ref.controls, ref.t_f_bar) + 0.1 * rng.standard_normal(nlp.n_vars)
    assert rel_err(nlp.eq_jacobian(z).toarray(), fd_jacobian(nlp.eq_residual, z)) < 1e-6
    assert rel_err(nlp.ineq_jacobian(z).toarray(), fd_jacobian(nlp.ineq_residual, z)) < 1e-6
    grad_fd = fd_jacobian(lambda w: np.array([nlp.objective(w)]), z)[0]
    assert nlp.objective_grad(z) == pytest.approx(grad_fd, abs=1e-7)

    lam, nu = rng.standard_normal(nlp.n_eq), rng.random(nlp.n_ineq)

    def grad_lagrangian(w):
        return nlp.objective_grad(w) + nlp.eq_jacobian(w).T @ lam + nlp.ineq_jacobian(w).T @ nu

    H = nlp.lagrangian_hessian(z, lam, nu).toarray()
    assert rel_err(H, fd_jacobian(grad_lagrangian, z)) < 1e-6
    assert np.array_equal(H, H.T)


def test_nearest_branch():
    assert nearest_branch(0.1, 2 * math.pi) == pytest.approx(0.1 + 2 * math.pi)
    assert nearest_branch(-3.0, 3.0) == pytest.approx(-3.0 + 2 * math.pi)
    assert nearest_branch(1.0, 1.2) == 1.0


def test_goal_heading_hint_moves_goal_branch():
    sc = straight_scenario()
    nlp, _ = straight_nlp(goal_heading_hint=2 * math.pi)
    assert nlp.goal.theta == pytest.approx(2 * math.pi)
    assert nlp.pinned[nlp.sidx(60, 4)] == pytest.approx(2 * math.pi)
    assert sc.goal.theta == 0.0

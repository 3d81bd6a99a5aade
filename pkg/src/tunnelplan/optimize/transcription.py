"""Direct transcription of the tunnel-constrained minimum-time problem.

Decision vector layout (``NE`` finite elements)::

    z = [s_0, ..., s_NE, u_0, ..., u_{NE-1}, t_f]

with ``s_k = (x, y, v, phi, theta)`` and ``u_k = (a, omega)``.  Equalities
are the forward-Euler defects followed by boundary pins; inequalities are
written ``g(z) <= 0`` and hold the variable bounds, the tunnel halfspaces and
``t_f >= t_min``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..model import BoundaryState, DiscGeometry, VehicleParams
from ..tunnel import TunnelSet

NX, NU = 5, 2
IX, IY, IV, IPHI, ITH = range(5)
IA, IOM = range(2)


class TranscriptionError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """States on ``NE + 1`` nodes, controls on ``NE`` nodes, and the duration."""

    t_f: float
    states: np.ndarray
    controls: np.ndarray

    @property
    def n_intervals(self) -> int:
        return len(self.controls)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_f, self.n_intervals + 1)


@dataclass(eq=False)
class NlpProblem:
    vehicle: VehicleParams
    discs: DiscGeometry
    n_intervals: int
    start: BoundaryState
    goal: BoundaryState
    tunnels: TunnelSet
    t_min: float = 0.1
    margin: float = 0.0
    smoothing: float = 0.0
    # filled in by __post_init__
    n_vars: int = field(init=False)
    pinned: dict = field(init=False)

    def __post_init__(self):
        ne = self.n_intervals
        self.n_vars = NX * (ne + 1) + NU * ne + 1
        self.u0 = NX * (ne + 1)
        self.it = self.n_vars - 1
        self._build_pins()
        self._build_bounds()
        self._build_tunnel_rows()

    # -- indexing -----------------------------------------------------------

    def sidx(self, k, j):
        return NX * k + j

    def uidx(self, k, j):
        return self.u0 + NU * k + j

    def unpack(self, z) -> Trajectory:
        z = np.asarray(z, dtype=float)
        ne = self.n_intervals
        return Trajectory(
            float(z[self.it]),
            z[: self.u0].reshape(ne + 1, NX).copy(),
            z[self.u0 : self.it].reshape(ne, NU).copy(),
        )

    def pack(self, states, controls, t_f) -> np.ndarray:
        return np.concatenate([np.ravel(states), np.ravel(controls), [t_f]]).astype(float)

    # -- structure ----------------------------------------------------------

    def _build_pins(self):
        ne = self.n_intervals
        s0, sf = self.start, self.goal
        pins = {}
        for k, b in ((0, s0), (ne, sf)):
            for j, val in zip((IX, IY, IV, IPHI, ITH), (b.x, b.y, b.v, b.phi, b.theta)):
                pins[self.sidx(k, j)] = float(val)
        pins[self.uidx(0, IOM)] = float(s0.omega)
        pins[self.uidx(ne - 1, IOM)] = float(sf.omega)
        if self.vehicle.accel_bounded:
            pins[self.uidx(0, IA)] = float(s0.a)
            pins[self.uidx(ne - 1, IA)] = float(sf.a)
        self.pinned = pins
        self._pin_idx = np.fromiter(pins.keys(), dtype=np.intp)
        self._pin_val = np.fromiter(pins.values(), dtype=float)

    def _build_bounds(self):
        ne, p = self.n_intervals, self.vehicle
        idx, sign, bound = [], [], []

        def add(indices, limit):
            for s in (1.0, -1.0):
                idx.extend(indices)
                sign.extend([s] * len(indices))
                bound.extend([limit] * len(indices))

        nodes = range(ne + 1)
        add([self.sidx(k, IV) for k in nodes], p.v_max)
        add([self.sidx(k, IPHI) for k in nodes], p.phi_max)
        if p.accel_bounded:
            add([self.uidx(k, IA) for k in range(ne)], p.a_max)
        add([self.uidx(k, IOM) for k in range(ne)], p.omega_max)
        # t_min - t_f <= 0
        idx.append(self.it)
        sign.append(-1.0)
        bound.append(-self.t_min)
        self._b_idx = np.array(idx, dtype=np.intp)
        self._b_sign = np.array(sign)
        self._b_val = np.array(bound)

    def _build_tunnel_rows(self):
        ne, n_r = self.n_intervals, self.tunnels.n_rect
        if n_r < 1:
            raise TranscriptionError("empty tunnel")
        if ne < n_r or ne % n_r:
            raise TranscriptionError(f"NE={ne} must be a positive multiple of N_R={n_r}")
        per = ne // n_r
        node, off, coef = [], [], []
        cf, cr = self.tunnels.coeffs_f, self.tunnels.coeffs_r
        for i in range(n_r):
            for k in range(i * per, (i + 1) * per + 1):
                for coeffs, d in ((cf[i], self.discs.front_offset), (cr[i], self.discs.rear_offset)):
                    node.extend([k] * 4)
                    off.extend([d] * 4)
                    coef.append(coeffs)
        self._t_node = np.array(node, dtype=np.intp)
        self._t_off = np.array(off)
        self._t_coef = np.concatenate(coef)
        self._t_coef = self._t_coef.copy()
        self._t_coef[:, 2] += self.margin * np.hypot(self._t_coef[:, 0], self._t_coef[:, 1])

    @property
    def n_defects(self) -> int:
        return NX * self.n_intervals

    @property
    def n_eq(self) -> int:
        return self.n_defects + len(self._pin_idx)

    @property
    def n_bound_rows(self) -> int:
        return len(self._b_idx)

    @property
    def n_tunnel_rows(self) -> int:
        return len(self._t_node)

    @property
    def n_ineq(self) -> int:
        # bounds, tunnel halfspaces, then the t_min row (stored with the bounds)
        return self.n_bound_rows + self.n_tunnel_rows

    def variable_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-variable ``(lower, upper)`` implied by the simple bound rows."""
        lo = np.full(self.n_vars, -np.inf)
        hi = np.full(self.n_vars, np.inf)
        up = self._b_sign > 0
        np.minimum.at(hi, self._b_idx[up], self._b_val[up])
        np.maximum.at(lo, self._b_idx[~up], -self._b_val[~up])
        return lo, hi

    def ineq_slices(self):
        nb = self.n_bound_rows - 1
        return {
            "bounds": slice(0, nb),
            "tunnel": slice(nb, nb + self.n_tunnel_rows),
            "t_min": slice(nb + self.n_tunnel_rows, self.n_ineq),
        }

    # -- functions ----------------------------------------------------------

    def _split(self, z):
        ne = self.n_intervals
        S = z[: self.u0].reshape(ne + 1, NX)
        U = z[self.u0 : self.it].reshape(ne, NU)
        return S, U, z[self.it]

    def objective(self, z) -> float:
        val = float(z[self.it])
        if self.smoothing:
            _, U, tf = self._split(z)
            val += self.smoothing * float(np.sum(U * U)) * tf / self.n_intervals
        return val

    def objective_grad(self, z) -> np.ndarray:
        g = np.zeros(self.n_vars)
        g[self.it] = 1.0
        if self.smoothing:
            _, U, tf = self._split(z)
            h = tf / self.n_intervals
            g[self.u0 : self.it] = 2.0 * self.smoothing * h * U.ravel()
            g[self.it] += self.smoothing * float(np.sum(U * U)) / self.n_intervals
        return g

    def rhs(self, S, U):
        L = self.vehicle.wheelbase
        v, phi, th = S[:, IV], S[:, IPHI], S[:, ITH]
        return np.column_stack([v * np.cos(th), v * np.sin(th), U[:, IA], U[:, IOM], v * np.tan(phi) / L])

    def defects(self, z) -> np.ndarray:
        S, U, tf = self._split(z)
        h = tf / self.n_intervals
        return (S[1:] - S[:-1] - h * self.rhs(S[:-1], U)).ravel()

    def eq_residual(self, z) -> np.ndarray:
        return np.concatenate([self.defects(z), z[self._pin_idx] - self._pin_val])

    def dynamics_blocks(self, z):
        """Per-interval ``A_k = I + h df/ds``, ``B_k = h df/du`` and ``c_k = f / NE``."""
        S, U, tf = self._split(z)
        ne = self.n_intervals
        h = tf / ne
        L = self.vehicle.wheelbase
        Sk = S[:-1]
        v, phi, th = Sk[:, IV], Sk[:, IPHI], Sk[:, ITH]
        c, s = np.cos(th), np.sin(th)
        fs = np.zeros((ne, NX, NX))
        fs[:, IX, IV] = c
        fs[:, IX, ITH] = -v * s
        fs[:, IY, IV] = s
        fs[:, IY, ITH] = v * c
        fs[:, ITH, IV] = np.tan(phi) / L
        fs[:, ITH, IPHI] = v / (L * np.cos(phi) ** 2)
        A = np.eye(NX)[None] + h * fs
        B = np.zeros((ne, NX, NU))
        B[:, IV, IA] = h
        B[:, IPHI, IOM] = h
        cvec = self.rhs(Sk, U) / ne
        return A, B, cvec

    def eq_jacobian(self, z) -> sp.csr_matrix:
        ne = self.n_intervals
        A, B, cvec = self.dynamics_blocks(z)
        rows, cols, vals = [], [], []
        r = np.arange(NX)
        for k in range(ne):
            base = NX * k
            rows.append(base + r)
            cols.append(self.sidx(k + 1, r))
            vals.append(np.ones(NX))
            rr, cc = np.meshgrid(r, r, indexing="ij")
            rows.append((base + rr).ravel())
            cols.append(self.sidx(k, cc).ravel())
            vals.append(-A[k].ravel())
            rows.append(np.array([base + IV, base + IPHI]))
            cols.append(np.array([self.uidx(k, IA), self.uidx(k, IOM)]))
            vals.append(-np.array([B[k, IV, IA], B[k, IPHI, IOM]]))
            rows.append(base + r)
            cols.append(np.full(NX, self.it))
            vals.append(-cvec[k])
        npin = len(self._pin_idx)
        rows.append(self.n_defects + np.arange(npin))
        cols.append(self._pin_idx)
        vals.append(np.ones(npin))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_eq, self.n_vars)
        )

    def _tunnel_terms(self, z):
        S = z[: self.u0].reshape(self.n_intervals + 1, NX)
        k = self._t_node
        x, y, th = S[k, IX], S[k, IY], S[k, ITH]
        a, b, c = self._t_coef.T
        d = self._t_off
        cos, sin = np.cos(th), np.sin(th)
        g = a * (x + d * cos) + b * (y + d * sin) + c
        dth = d * (b * cos - a * sin)
        d2th = -d * (a * cos + b * sin)
        return g, dth, d2th

    def ineq_residual(self, z) -> np.ndarray:
        gb = self._b_sign * z[self._b_idx] - self._b_val
        gt, _, _ = self._tunnel_terms(z)
        return np.concatenate([gb[:-1], gt, gb[-1:]])

    def ineq_jacobian(self, z) -> sp.csr_matrix:
        nb = self.n_bound_rows - 1
        nt = self.n_tunnel_rows
        _, dth, _ = self._tunnel_terms(z)
        k = self._t_node
        tr = nb + np.arange(nt)
        rows = np.concatenate([np.arange(nb), tr, tr, tr, [nb + nt]])
        cols = np.concatenate(
            [self._b_idx[:-1], self.sidx(k, IX), self.sidx(k, IY), self.sidx(k, ITH), [self.it]]
        )
        vals = np.concatenate([self._b_sign[:-1], self._t_coef[:, 0], self._t_coef[:, 1], dth, [-1.0]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_ineq, self.n_vars))

    def lagrangian_hessian(self, z, lam_eq, lam_ineq) -> sp.csr_matrix:
        """Hessian of ``f + lam_eq . c_eq + lam_ineq . g`` (full symmetric)."""
        ne = self.n_intervals
        S, U, tf = self._split(z)
        h = tf / ne
        L = self.vehicle.wheelbase
        lam = np.asarray(lam_eq[: self.n_defects]).reshape(ne, NX)
        Sk = S[:-1]
        v, phi, th = Sk[:, IV], Sk[:, IPHI], Sk[:, ITH]
        c, s = np.cos(th), np.sin(th)
        sec2 = 1.0 / np.cos(phi) ** 2
        lx, ly, lv, lp, lt = lam.T
        # second derivatives of F = lam . f(s, u) in the state block
        f_vth = -lx * s + ly * c
        f_vphi = lt * sec2 / L
        f_thth = -v * (lx * c + ly * s)
        f_phiphi = lt * v * 2.0 * sec2 * np.tan(phi) / L
        # gradient of F (for the t_f cross terms)
        F_v = lx * c + ly * s + lt * np.tan(phi) / L
        F_th = -lx * v * s + ly * v * c
        F_phi = lt * v * sec2 / L

        kk = np.arange(ne)
        rows, cols, vals = [], [], []

        def put(r, cidx, val, sym=True):
            rows.append(r)
            cols.append(cidx)
            vals.append(val)
            if sym:
                rows.append(cidx)
                cols.append(r)
                vals.append(val)

        put(self.sidx(kk, IV), self.sidx(kk, ITH), -h * f_vth)
        put(self.sidx(kk, IV), self.sidx(kk, IPHI), -h * f_vphi)
        put(self.sidx(kk, ITH), self.sidx(kk, ITH), -h * f_thth, sym=False)
        put(self.sidx(kk, IPHI), self.sidx(kk, IPHI), -h * f_phiphi, sym=False)
        it = np.full(ne, self.it)
        put(self.sidx(kk, IV), it, -F_v / ne)
        put(self.sidx(kk, ITH), it, -F_th / ne)
        put(self.sidx(kk, IPHI), it, -F_phi / ne)
        put(self.uidx(kk, IA), it, -lv / ne)
        put(self.uidx(kk, IOM), it, -lp / ne)

        nu = np.asarray(lam_ineq)[self.ineq_slices()["tunnel"]]
        _, _, d2th = self._tunnel_terms(z)
        put(self.sidx(self._t_node, ITH), self.sidx(self._t_node, ITH), nu * d2th, sym=False)

        if self.smoothing:
            ui = np.arange(self.u0, self.it)
            put(ui, ui, np.full(len(ui), 2.0 * self.smoothing * h), sym=False)
            put(ui, np.full(len(ui), self.it), 2.0 * self.smoothing * U.ravel() / ne)

        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_vars, self.n_vars)
        )

    # -- initial guesses ----------------------------------------------------

    def initial_point(self, states, controls, t_f) -> np.ndarray:
        """Pack a warm start, overwriting pinned entries and lifting ``t_f`` above ``t_min``."""
        ne = self.n_intervals
        S = np.array(states, dtype=float).reshape(ne + 1, NX)
        U = np.array(controls, dtype=float)[:ne].reshape(ne, NU)
        z = self.pack(S, U, max(float(t_f), self.t_min + 1e-2))
        z[self._pin_idx] = self._pin_val
        return z


def nearest_branch(theta: float, target: float) -> float:
    """``theta + 2 pi k`` closest to ``target``."""
    return theta + 2.0 * math.pi * round((target - theta) / (2.0 * math.pi))


def transcribe(
    scenario,
    tunnels: TunnelSet,
    discs: DiscGeometry,
    n_intervals: int = 60,
    *,
    goal_heading_hint: float | None = None,
    t_min: float = 0.1,
    margin: float = 0.0,
    smoothing: float = 0.0,
) -> NlpProblem:
    """Build the NLP for ``scenario`` (anything with ``vehicle``, ``start`` and ``goal``).

    Headings are not wrapped in the NLP, so the terminal heading is moved to
    the ``2 pi`` branch nearest ``goal_heading_hint`` (normally the
    reference's final heading).
    """
    start = BoundaryState(*scenario.start)
    goal = BoundaryState(*scenario.goal)
    if goal_heading_hint is not None:
        goal = goal._replace(theta=nearest_branch(goal.theta, goal_heading_hint))
    if n_intervals < 1:
        raise TranscriptionError("NE must be at least 1")
    return NlpProblem(
        vehicle=scenario.vehicle,
        discs=discs,
        n_intervals=n_intervals,
        start=start,
        goal=goal,
        tunnels=tunnels,
        t_min=t_min,
        margin=margin,
        smoothing=smoothing,
    )

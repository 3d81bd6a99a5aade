"""Primal-dual interior-point solver specialised to the transcribed problem.

Inequalities ``g(z) <= 0`` get slacks ``s > 0`` and a log barrier.  Each
Newton step is computed in the null space of the linearised Euler defects:
states at nodes ``1..NE-1`` follow from the free controls and ``t_f`` by a
forward sweep, leaving a small dense saddle-point system (free variables plus
the five terminal-state rows) whose inertia is read off an LDL^T
factorisation and corrected by diagonal regularisation when wrong.  Defect
multipliers are recovered afterwards by a backward (adjoint) sweep.

Globalisation is a backtracking filter line search on (constraint violation,
barrier objective) with a fraction-to-boundary rule and one second-order
correction per iteration.  Steps that the slacks cut very short are
recomputed with more regularisation, which damps the nearly flat directions
that free acceleration introduces.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import IO

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .transcription import NU, NX, NlpProblem, Trajectory



class Status(str, Enum):
    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class IpmOptions:
    tol: float = 1e-6
    max_iter: int = 500
    mu_init: float = 0.1
    mu_factor: float = 5.0
    kappa_eps: float = 10.0
    tau_min: float = 0.99
    slack_floor: float = 1e-3
    bound_push: float = 1e-2
    short_step: float = 0.1
    max_reg_retries: int = 3
    nu_init: float = 1.0
    armijo: float = 1e-4
    max_backtracks: int = 40
    max_ls_failures: int = 5
    log: IO[str] | None = None  # CSV iteration log when set


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    mu: float
    objective: float
    primal_inf: float
    dual_inf: float
    complementarity: float
    alpha_primal: float
    alpha_dual: float
    regularization: float


@dataclass
class NlpSolution:
    status: Status
    trajectory: Trajectory
    z: np.ndarray
    primal_inf: float
    dual_inf: float
    complementarity: float
    iterations: int
    wall_time: float
    history: list[IterationRecord] = field(default_factory=list)
    lam_defects: np.ndarray | None = None
    lam_ineq: np.ndarray | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def t_f(self) -> float:
        return self.trajectory.t_f


class _Layout:
    """Fixed / dependent / free split of the decision vector."""

    def __init__(self, nlp: NlpProblem):
        ne, n = nlp.n_intervals, nlp.n_vars
        fixed = np.zeros(n, dtype=bool)
        fixed[list(nlp.pinned)] = True
        # states at both ends are pinned by the boundary conditions
        fixed[nlp.sidx(0, np.arange(NX))] = True
        fixed[nlp.sidx(ne, np.arange(NX))] = True
        dep = np.zeros(n, dtype=bool)
        dep[NX : NX * ne] = True
        free = ~fixed & ~dep
        self.fixed, self.dep = fixed, dep
        self.free_idx = np.flatnonzero(free)
        self.nf = len(self.free_idx)
        col = -np.ones(n, dtype=np.intp)
        col[self.free_idx] = np.arange(self.nf)
        self.ucol = col[nlp.u0 : nlp.it].reshape(ne, NU)
        self.tcol = int(col[nlp.it])
        self.dep_rows = np.flatnonzero(dep)

        jac = nlp.ineq_jacobian(nlp.initial_point(np.zeros((ne + 1, NX)), np.zeros((ne, NU)), 1.0)).tocsc()
        touches = np.asarray(abs(jac[:, ~fixed]).sum(axis=1)).ravel() > 0
        self.active = np.flatnonzero(touches)
        self.constant = np.flatnonzero(~touches)


def _inertia(lu: np.ndarray, ipiv: np.ndarray) -> tuple[int, int, int]:
    """Eigenvalue sign counts of the block-diagonal factor of ``dsytrf``."""
    n = len(ipiv)
    pos = neg = zero = 0
    i = 0
    while i < n:
        if ipiv[i] > 0:
            d = lu[i, i]
            if d == 0.0:
                zero += 1
            elif d > 0:
                pos += 1
            else:
                neg += 1
            i += 1
        else:
            a, b, c = lu[i, i], lu[i, i + 1], lu[i + 1, i + 1]
            det = a * c - b * b
            if det < 0:
                pos += 1
                neg += 1
            elif det == 0.0:
                zero += 2
            elif a + c > 0:
                pos += 2
            else:
                neg += 2
            i += 2
    return pos, neg, zero


class _ReducedKkt:
    """Factorised ``[[Hr + dw I, C^T], [C, -dc I]]`` with the right inertia.

    Too few positive pivots is fixed by raising ``dw``; too few negative ones
    (a rank-deficient ``C``) by a small ``dc``.
    """

    def __init__(
        self, Hr: np.ndarray, C: np.ndarray, mu: float, last_dw: float, metric: np.ndarray | None = None, dw_min: float = 0.0
    ):
        nf, m = Hr.shape[0], C.shape[0]
        metric = np.eye(nf) if metric is None else metric
        K0 = np.zeros((nf + m, nf + m))
        K0[:nf, :nf] = Hr
        K0[nf:, :nf] = C
        K0[:nf, nf:] = C.T
        dw, dc = dw_min, 0.0
        diag_c = np.arange(nf, nf + m)
        for _ in range(80):
            K = K0.copy()
            if dw:
                K[:nf, :nf] += dw * metric
            K[diag_c, diag_c] -= dc
            lu, ipiv, info = lapack.dsytrf(K)
            if info < 0:
                raise np.linalg.LinAlgError("dsytrf rejected its input")
            pos, neg, zero = _inertia(lu, ipiv)
            if pos == nf and neg == m and zero == 0:
                break
            if neg < m and dc == 0.0:
                dc = 1e-8 * mu**0.25
                continue
            if dw == 0.0:
                dw = 1e-4 if last_dw == 0.0 else max(1e-20, last_dw / 3.0)
            else:
                dw *= 100.0 if last_dw == 0.0 else 8.0
            if dw > 1e40:
                raise np.linalg.LinAlgError("could not correct KKT inertia")
        else:
            raise np.linalg.LinAlgError("could not correct KKT inertia")
        self.lu, self.ipiv = lu, ipiv
        self.nf = nf
        self.dw, self.dc = dw, dc

    def solve(self, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, info = lapack.dsytrs(self.lu, self.ipiv, rhs)
        if info != 0:
            raise np.linalg.LinAlgError("dsytrs failed")
        return x[: self.nf], x[self.nf :]


class _Filter:
    """Pairs (constraint violation, barrier objective) that trial points must improve on."""

    def __init__(self, theta_max: float):
        self.entries: list[tuple[float, float]] = [(theta_max, -math.inf)]

    def acceptable(self, theta: float, phi: float) -> bool:
        return all(theta < th or phi < ph for th, ph in self.entries)

    def add(self, theta: float, phi: float) -> None:
        keep = [(th, ph) for th, ph in self.entries if th < theta or ph < phi]
        keep.append((theta, phi))
        self.entries = keep


def _fraction_to_boundary(x: np.ndarray, dx: np.ndarray, tau: float) -> float:
    neg = dx < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-tau * x[neg] / dx[neg])))


def _push_inside(nlp: NlpProblem, z: np.ndarray, fixed: np.ndarray, push: float) -> np.ndarray:
    """Move free variables strictly inside their simple bounds."""
    lo, hi = nlp.variable_box()
    width = hi - lo
    with np.errstate(invalid="ignore"):
        lo_in = np.where(np.isfinite(lo), lo + np.minimum(push * np.maximum(1.0, np.abs(lo)), push * width), -np.inf)
        hi_in = np.where(np.isfinite(hi), hi - np.minimum(push * np.maximum(1.0, np.abs(hi)), push * width), np.inf)
    out = np.clip(z, lo_in, hi_in)
    out[fixed] = z[fixed]
    return out


def _initial_vector(nlp: NlpProblem, init) -> np.ndarray:
    if isinstance(init, NlpSolution):
        init = init.z
    if isinstance(init, np.ndarray) and init.ndim == 1:
        z = init.astype(float).copy()
        z[list(nlp.pinned)] = list(nlp.pinned.values())
        return z
    t_f = getattr(init, "t_f", None)
    if t_f is None:
        t_f = init.t_f_bar
    return nlp.initial_point(init.states, init.controls, t_f)


def solve(nlp: NlpProblem, init, options: IpmOptions | None = None) -> NlpSolution:
    """Minimise ``t_f`` from the warm start ``init``.

    ``init`` is a :class:`Trajectory`, a reference trajectory sampled on the
    same grid, a packed decision vector, or a previous :class:`NlpSolution`
    (whose multipliers are then reused and whose final barrier parameter
    replaces ``mu_init``).
    """
    opt = options or IpmOptions()
    t_start = time.perf_counter()
    ne = nlp.n_intervals
    lay = _Layout(nlp)
    act = lay.active
    nd = nlp.n_defects

    z = _initial_vector(nlp, init)
    writer = None
    if opt.log is not None:
        writer = csv.writer(opt.log)
        writer.writerow(["iteration", "mu", "objective", "primal_inf", "dual_inf", "complementarity"])

    g_const = nlp.ineq_residual(z)[lay.constant]
    if g_const.size and g_const.max() > opt.tol:
        traj = nlp.unpack(z)
        return NlpSolution(
            Status.INFEASIBLE, traj, z, float(g_const.max()), math.inf, math.inf, 0,
            time.perf_counter() - t_start, message="boundary configuration violates a fixed constraint",
        )

    if isinstance(init, NlpSolution) and init.lam_ineq is not None and init.lam_defects is not None:
        # restart from a previous solution and its multipliers near its final barrier value
        g = nlp.ineq_residual(z)[act]
        s = np.maximum(-g, 1e-12)
        nu = np.maximum(init.lam_ineq[act], 1e-12)
        mu = float(np.clip(np.median(s * nu), opt.tol / 10.0, opt.mu_init))
        lam = init.lam_defects.copy()
    else:
        z = _push_inside(nlp, z, lay.fixed, opt.bound_push)
        mu = opt.mu_init
        g = nlp.ineq_residual(z)[act]
        s = np.maximum(-g, opt.slack_floor)
        nu = np.full(len(act), opt.nu_init)
        lam = np.zeros(nd)
    last_dw = 0.0
    history: list[IterationRecord] = []
    ls_failures = 0
    status = Status.ITERATION_LIMIT
    message = ""
    nonfixed = ~lay.fixed
    nm = nd + len(act)

    def theta(zz, ss):
        return np.abs(nlp.defects(zz)).sum() + np.abs(nlp.ineq_residual(zz)[act] + ss).sum()

    def barrier(zz, ss, mu_):
        return nlp.objective(zz) - mu_ * np.log(ss).sum()

    theta_init = theta(z, s)
    theta_max = 1e4 * max(1.0, theta_init)
    theta_min = 1e-4 * max(1.0, theta_init)
    filt, filter_mu = _Filter(theta_max), mu

    def jac_eq_t(A, B, cvec, lam_):
        """``J_defects^T lam`` from the dynamics blocks."""
        L = lam_.reshape(ne, NX)
        out = np.zeros(nlp.n_vars)
        S = out[: nlp.u0].reshape(ne + 1, NX)
        S[1:] += L
        S[:-1] -= np.einsum("kij,ki->kj", A, L)
        U = out[nlp.u0 : nlp.it].reshape(ne, NU)
        U -= np.einsum("kij,ki->kj", B, L)
        out[nlp.it] = -np.sum(cvec * L)
        return out

    it = 0
    for it in range(opt.max_iter + 1):
        E = nlp.defects(z)
        g = nlp.ineq_residual(z)[act]
        Jg = nlp.ineq_jacobian(z)[act]
        A, B, cvec = nlp.dynamics_blocks(z)
        grad_f = nlp.objective_grad(z)
        rg = g + s

        rd = (grad_f + jac_eq_t(A, B, cvec, lam) + Jg.T @ nu)[nonfixed]
        primal = max(np.max(np.abs(E), initial=0.0), np.max(np.abs(rg), initial=0.0))
        s_d = max(100.0, (np.abs(lam).sum() + np.abs(nu).sum()) / max(nm, 1)) / 100.0
        s_c = max(100.0, np.abs(nu).sum() / max(len(nu), 1)) / 100.0
        dual = float(np.max(np.abs(rd), initial=0.0))
        compl0 = float(np.max(s * nu, initial=0.0))
        err0 = max(dual / s_d, primal, compl0 / s_c)

        rec = IterationRecord(it, mu, nlp.objective(z), primal, dual, compl0, math.nan, math.nan, last_dw)
        if err0 <= opt.tol:
            history.append(rec)
            if writer:
                writer.writerow([it, mu, rec.objective, primal, dual, compl0])
            status = Status.CONVERGED
            break
        if it == opt.max_iter:
            history.append(rec)
            break

        # barrier update (possibly several times in a row)
        while mu > opt.tol / 10.0:
            err_mu = max(dual / s_d, primal, float(np.max(np.abs(s * nu - mu), initial=0.0)) / s_c)
            if err_mu > opt.kappa_eps * mu:
                break
            mu = max(opt.tol / 10.0, mu / opt.mu_factor)
        tau = max(opt.tau_min, 1.0 - mu)

        sigma = nu / s
        lam_full = np.concatenate([lam, np.zeros(nlp.n_eq - nd)])
        nu_full = np.zeros(nlp.n_ineq)
        nu_full[act] = nu
        W = nlp.lagrangian_hessian(z, lam_full, nu_full)
        Ht = (W + Jg.T @ sp.diags(sigma) @ Jg).tocsr()

        # null-space basis from the linearised defects
        nf = lay.nf
        Zs = np.zeros((ne + 1, NX, nf))
        for k in range(ne):
            Zn = A[k] @ Zs[k]
            for j in range(NU):
                c = lay.ucol[k, j]
                if c >= 0:
                    Zn[:, c] += B[k][:, j]
            Zn[:, lay.tcol] += cvec[k]
            Zs[k + 1] = Zn
        Zfull = np.zeros((nlp.n_vars, nf))
        Zfull[lay.dep_rows] = Zs[1:ne].reshape(-1, nf)
        Zfull[lay.free_idx, np.arange(nf)] = 1.0
        HZ = Ht @ Zfull
        Hr = Zfull.T @ HZ
        C = Zs[ne]

        def direction(kkt, rE, rg_):
            p = np.zeros((ne + 1, NX))
            Er = rE.reshape(ne, NX)
            for k in range(ne):
                p[k + 1] = A[k] @ p[k] - Er[k]
            pbar = np.zeros(nlp.n_vars)
            pbar[lay.dep_rows] = p[1:ne].ravel()
            q = grad_f + Jg.T @ (sigma * rg_ + mu / s)
            gr = Zfull.T @ (Ht @ pbar + q)
            dy, kappa = kkt.solve(np.concatenate([-gr, -p[ne]]))
            dz = Zfull @ dy + pbar
            w = (Ht @ dz + q).reshape(-1)
            lam_new = np.zeros((ne, NX))
            lam_new[ne - 1] = -kappa
            ws = w[: nlp.u0].reshape(ne + 1, NX)
            for j in range(ne - 1, 0, -1):
                lam_new[j - 1] = A[j].T @ lam_new[j] - ws[j]
            Jdz = Jg @ dz
            ds = -rg_ - Jdz
            dnu = mu / s - nu + sigma * (rg_ + Jdz)
            return dz, ds, lam_new.ravel(), dnu

        # a step cut short by the slacks usually comes from a nearly flat
        # direction (free acceleration); damp it with more regularisation
        Hs, metric = 0.5 * (Hr + Hr.T), Zfull.T @ Zfull
        try:
            kkt = _ReducedKkt(Hs, C, mu, last_dw, metric)
            last_dw = kkt.dw
            step = direction(kkt, E, rg)
            alpha_max = _fraction_to_boundary(s, step[1], tau)
            dw_try = max(1e-4, 10.0 * kkt.dw)
            for _ in range(opt.max_reg_retries if alpha_max < opt.short_step else 0):
                kkt_try = _ReducedKkt(Hs, C, mu, 0.0, metric, dw_try)
                step_try = direction(kkt_try, E, rg)
                a_try = _fraction_to_boundary(s, step_try[1], tau)
                if a_try >= opt.short_step:
                    kkt, step, alpha_max = kkt_try, step_try, a_try
                    break
                dw_try *= 10.0
        except np.linalg.LinAlgError as exc:
            status, message = Status.NUMERICAL_FAILURE, str(exc)
            history.append(rec)
            break
        dz, ds, lam_plus, dnu = step
        alpha_dual = _fraction_to_boundary(nu, dnu, tau)

        theta0 = np.abs(E).sum() + np.abs(rg).sum()
        phi0 = barrier(z, s, mu)
        dphi = float(grad_f @ dz - mu * np.sum(ds / s))
        if mu != filter_mu:
            filt, filter_mu = _Filter(theta_max), mu
        if dphi < 0.0:
            alpha_min = 0.05 * min(1e-5, 1e-8 * theta0 / -dphi, theta0**1.1 / (-dphi) ** 2.3)
        else:
            alpha_min = 0.05 * 1e-5
        switching_ok = theta0 <= theta_min

        def acceptable(zt, st, alpha):
            """Filter test; returns (accepted, f_type, theta)."""
            theta_t = theta(zt, st)
            phi_t = barrier(zt, st, mu)
            if not filt.acceptable(theta_t, phi_t):
                return False, False, theta_t
            if switching_ok and dphi < 0.0 and alpha * (-dphi) ** 2.3 > theta0**1.1:
                return phi_t <= phi0 + opt.armijo * alpha * dphi, True, theta_t
            ok = theta_t <= (1.0 - 1e-5) * theta0 or phi_t <= phi0 - 1e-8 * theta0
            return ok, False, theta_t

        alpha = alpha_max
        accepted = f_type = False
        best = None
        for trial in range(opt.max_backtracks):
            zt, st = z + alpha * dz, s + alpha * ds
            accepted, f_type, theta_t = acceptable(zt, st, alpha)
            if accepted:
                break
            if best is None or theta_t < best[0]:
                best = (theta_t, zt, st, alpha)
            if trial == 0 and theta_t >= theta0:
                # second-order correction against the Maratos effect
                E_t = nlp.defects(zt)
                rg_t = nlp.ineq_residual(zt)[act] + st
                dz2, ds2, _, _ = direction(kkt, alpha * E + E_t, alpha * rg + rg_t)
                a2 = _fraction_to_boundary(s, ds2, tau)
                z2, s2 = z + a2 * dz2, s + a2 * ds2
                accepted, f_type, _ = acceptable(z2, s2, alpha)
                if accepted:
                    zt, st = z2, s2
                    break
            alpha *= 0.5
            if alpha < alpha_min:
                break
        if accepted:
            ls_failures = 0
            if not f_type:
                filt.add((1.0 - 1e-5) * theta0, phi0 - 1e-8 * theta0)
        else:
            # no acceptable point: take the least infeasible trial and start a fresh filter
            ls_failures += 1
            if ls_failures >= opt.max_ls_failures:
                status, message = Status.NUMERICAL_FAILURE, "line search failed repeatedly"
                history.append(rec)
                break
            _, zt, st, alpha = best
            filt = _Filter(theta_max)

        z, s = zt, st
        lam = lam + alpha * (lam_plus - lam)
        nu = nu + alpha_dual * dnu
        nu = np.clip(nu, mu / (1e10 * s), 1e10 * mu / s)

        rec = IterationRecord(it, mu, nlp.objective(z), primal, dual, compl0, alpha, alpha_dual, kkt.dw)
        history.append(rec)
        if writer:
            writer.writerow([it, mu, rec.objective, primal, dual, compl0])

    E = nlp.defects(z)
    g_all = nlp.ineq_residual(z)
    primal = max(np.max(np.abs(E), initial=0.0), float(np.max(g_all, initial=0.0)))
    nu_full = np.zeros(nlp.n_ineq)
    nu_full[act] = nu
    return NlpSolution(
        status=status,
        trajectory=nlp.unpack(z),
        z=z,
        primal_inf=primal,
        dual_inf=history[-1].dual_inf if history else math.nan,
        complementarity=history[-1].complementarity if history else math.nan,
        iterations=it,
        wall_time=time.perf_counter() - t_start,
        history=history,
        lam_defects=lam,
        lam_ineq=nu_full,
        message=message,
    )

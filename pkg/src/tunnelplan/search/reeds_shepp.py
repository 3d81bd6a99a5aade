"""Shortest Reeds-Shepp connections between two poses.

Paths are computed in a normalised frame (start at the origin, unit turning
radius) over the CSC, CCC, CCCC, CCSC and CCSCC families together with their
time-flip, reflection and backwards variants, then scaled by the turning
radius.  Segment lengths are signed: negative means reverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

LEFT, STRAIGHT, RIGHT = "L", "S", "R"
TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
_ZERO = 10 * np.finfo(float).eps
_DROP = 1e-10


class Segment(NamedTuple):
    kind: str  # "L", "S" or "R"
    length: float  # metres, signed (negative = reverse)

    @property
    def direction(self) -> int:
        return 1 if self.length >= 0 else -1


@dataclass(frozen=True)
class RSPath:
    segments: tuple[Segment, ...]
    rho: float

    @property
    def length(self) -> float:
        return sum(abs(s.length) for s in self.segments)

    @property
    def word(self) -> str:
        return "".join(s.kind + ("+" if s.length >= 0 else "-") for s in self.segments)

    def sample(self, start, step: float) -> np.ndarray:
        """Poses ``(x, y, theta, direction)`` along the path, at most ``step`` apart.

        The start pose is included; every segment end is included exactly.
        """
        x, y, th = float(start[0]), float(start[1]), float(start[2])
        rows = [(x, y, th, self.segments[0].direction if self.segments else 1)]
        for seg in self.segments:
            n = max(1, math.ceil(abs(seg.length) / step))
            x0, y0, th0 = x, y, th
            for i in range(1, n + 1):
                ds = seg.length * i / n
                x, y, th = advance(x0, y0, th0, seg.kind, ds, self.rho)
                rows.append((x, y, th, seg.direction))
        return np.array(rows)

    def end_pose(self, start) -> tuple[float, float, float]:
        x, y, th = float(start[0]), float(start[1]), float(start[2])
        for seg in self.segments:
            x, y, th = advance(x, y, th, seg.kind, seg.length, self.rho)
        return x, y, th


def advance(x: float, y: float, theta: float, kind: str, length: float, rho: float):
    """Move along one primitive of signed ``length`` (metres) with radius ``rho``."""
    if kind == STRAIGHT:
        return x + length * math.cos(theta), y + length * math.sin(theta), theta
    t = length / rho
    if kind == LEFT:
        return (
            x + rho * (math.sin(theta + t) - math.sin(theta)),
            y + rho * (math.cos(theta) - math.cos(theta + t)),
            theta + t,
        )
    return (
        x + rho * (math.sin(theta) - math.sin(theta - t)),
        y + rho * (math.cos(theta - t) - math.cos(theta)),
        theta - t,
    )


def mod2pi(x: float) -> float:
    """Wrap to (-pi, pi]."""
    v = math.fmod(x, TWO_PI)
    if v < -math.pi:
        v += TWO_PI
    elif v > math.pi:
        v -= TWO_PI
    return v


def _polar(x: float, y: float) -> tuple[float, float]:
    return math.hypot(x, y), math.atan2(y, x)


def _tau_omega(u, v, xi, eta, phi):
    delta = mod2pi(u - v)
    a = math.sin(u) - math.sin(delta)
    b = math.cos(u) - math.cos(delta) - 1.0
    t1 = math.atan2(eta * a - xi * b, xi * a + eta * b)
    t2 = 2.0 * (math.cos(delta) - math.cos(v) - math.cos(u)) + 3.0
    tau = mod2pi(t1 + math.pi) if t2 < 0 else mod2pi(t1)
    omega = mod2pi(tau - u + v - phi)
    return tau, omega


# Each base formula returns (t, u, v) or None.


def _lp_sp_lp(x, y, phi):
    u, t = _polar(x - math.sin(phi), y - 1.0 + math.cos(phi))
    if t >= -_ZERO:
        v = mod2pi(phi - t)
        if v >= -_ZERO:
            return t, u, v
    return None


def _lp_sp_rp(x, y, phi):
    u1, t1 = _polar(x + math.sin(phi), y - 1.0 - math.cos(phi))
    u1 = u1 * u1
    if u1 >= 4.0:
        u = math.sqrt(u1 - 4.0)
        theta = math.atan2(2.0, u)
        t = mod2pi(t1 + theta)
        v = mod2pi(t - phi)
        if t >= -_ZERO and v >= -_ZERO:
            return t, u, v
    return None


def _lp_rm_l(x, y, phi):
    xi, eta = x - math.sin(phi), y - 1.0 + math.cos(phi)
    u1, theta = _polar(xi, eta)
    if u1 <= 4.0:
        u = -2.0 * math.asin(0.25 * u1)
        t = mod2pi(theta + 0.5 * u + math.pi)
        v = mod2pi(phi - t + u)
        if t >= -_ZERO and u <= _ZERO:
            return t, u, v
    return None


def _lp_rup_lum_rm(x, y, phi):
    xi, eta = x + math.sin(phi), y - 1.0 - math.cos(phi)
    rho = 0.25 * (2.0 + math.hypot(xi, eta))
    if rho <= 1.0:
        u = math.acos(rho)
        t, v = _tau_omega(u, -u, xi, eta, phi)
        if t >= -_ZERO and v <= _ZERO:
            return t, u, v
    return None


def _lp_rum_lum_rp(x, y, phi):
    xi, eta = x + math.sin(phi), y - 1.0 - math.cos(phi)
    rho = (20.0 - xi * xi - eta * eta) / 16.0
    if 0.0 <= rho <= 1.0:
        u = -math.acos(rho)
        if u >= -HALF_PI:
            t, v = _tau_omega(u, u, xi, eta, phi)
            if t >= -_ZERO and v >= -_ZERO:
                return t, u, v
    return None


def _lp_rm_sm_lm(x, y, phi):
    xi, eta = x - math.sin(phi), y - 1.0 + math.cos(phi)
    rho, theta = _polar(xi, eta)
    if rho >= 2.0:
        r = math.sqrt(rho * rho - 4.0)
        u = 2.0 - r
        t = mod2pi(theta + math.atan2(r, -2.0))
        v = mod2pi(phi - HALF_PI - t)
        if t >= -_ZERO and u <= _ZERO and v <= _ZERO:
            return t, u, v
    return None


def _lp_rm_sm_rm(x, y, phi):
    xi, eta = x + math.sin(phi), y - 1.0 - math.cos(phi)
    rho, theta = _polar(-eta, xi)
    if rho >= 2.0:
        t = theta
        u = 2.0 - rho
        v = mod2pi(t + HALF_PI - phi)
        if t >= -_ZERO and u <= _ZERO and v <= _ZERO:
            return t, u, v
    return None


def _lp_rm_slm_rp(x, y, phi):
    xi, eta = x + math.sin(phi), y - 1.0 - math.cos(phi)
    rho, _ = _polar(xi, eta)
    if rho >= 2.0:
        u = 4.0 - math.sqrt(rho * rho - 4.0)
        if u <= _ZERO:
            t = mod2pi(math.atan2((4.0 - u) * xi - 2.0 * eta, -2.0 * xi + (u - 4.0) * eta))
            v = mod2pi(t - phi)
            if t >= -_ZERO and v >= -_ZERO:
                return t, u, v
    return None


def _flip(word: str) -> str:
    return word.translate(str.maketrans("LR", "RL"))


def _candidates(x: float, y: float, phi: float):
    """Yield ``(word, lengths)`` in normalised units for every admissible family member."""
    # time-flip negates all lengths, reflect swaps L and R
    variants = ((1, 1, 1, False, 1), (-1, 1, -1, False, -1), (1, -1, -1, True, 1), (-1, -1, 1, True, -1))

    for sx, sy, sp, refl, sgn in variants:
        xx, yy, pp = sx * x, sy * y, sp * phi
        r = _lp_sp_lp(xx, yy, pp)
        if r:
            yield ("RSR" if refl else "LSL"), (sgn * r[0], sgn * r[1], sgn * r[2])
        r = _lp_sp_rp(xx, yy, pp)
        if r:
            yield ("RSL" if refl else "LSR"), (sgn * r[0], sgn * r[1], sgn * r[2])

    xb = x * math.cos(phi) + y * math.sin(phi)
    yb = x * math.sin(phi) - y * math.cos(phi)

    for sx, sy, sp, refl, sgn in variants:
        word = "RLR" if refl else "LRL"
        r = _lp_rm_l(sx * x, sy * y, sp * phi)
        if r:
            yield word, (sgn * r[0], sgn * r[1], sgn * r[2])
        r = _lp_rm_l(sx * xb, sy * yb, sp * phi)
        if r:
            yield word, (sgn * r[2], sgn * r[1], sgn * r[0])

    for sx, sy, sp, refl, sgn in variants:
        word = "RLRL" if refl else "LRLR"
        xx, yy, pp = sx * x, sy * y, sp * phi
        r = _lp_rup_lum_rm(xx, yy, pp)
        if r:
            t, u, v = r
            yield word, (sgn * t, sgn * u, -sgn * u, sgn * v)
        r = _lp_rum_lum_rp(xx, yy, pp)
        if r:
            t, u, v = r
            yield word, (sgn * t, sgn * u, sgn * u, sgn * v)

    for sx, sy, sp, refl, sgn in variants:
        xx, yy, pp = sx * x, sy * y, sp * phi
        r = _lp_rm_sm_lm(xx, yy, pp)
        if r:
            t, u, v = r
            yield _flip("LRSL") if refl else "LRSL", (sgn * t, -sgn * HALF_PI, sgn * u, sgn * v)
        r = _lp_rm_sm_rm(xx, yy, pp)
        if r:
            t, u, v = r
            yield _flip("LRSR") if refl else "LRSR", (sgn * t, -sgn * HALF_PI, sgn * u, sgn * v)
        xx, yy = sx * xb, sy * yb
        r = _lp_rm_sm_lm(xx, yy, pp)
        if r:
            t, u, v = r
            yield _flip("LSRL") if refl else "LSRL", (sgn * v, sgn * u, -sgn * HALF_PI, sgn * t)
        r = _lp_rm_sm_rm(xx, yy, pp)
        if r:
            t, u, v = r
            yield _flip("RSRL") if refl else "RSRL", (sgn * v, sgn * u, -sgn * HALF_PI, sgn * t)

    for sx, sy, sp, refl, sgn in variants:
        r = _lp_rm_slm_rp(sx * x, sy * y, sp * phi)
        if r:
            t, u, v = r
            word = _flip("LRSLR") if refl else "LRSLR"
            yield word, (sgn * t, -sgn * HALF_PI, sgn * u, -sgn * HALF_PI, sgn * v)


def _normalise(start, goal, rho: float) -> tuple[float, float, float]:
    dx, dy = goal[0] - start[0], goal[1] - start[1]
    c, s = math.cos(start[2]), math.sin(start[2])
    return (c * dx + s * dy) / rho, (-s * dx + c * dy) / rho, mod2pi(goal[2] - start[2])


def rs_length(start, goal, rho_min: float) -> float:
    """Length of the shortest Reeds-Shepp path (metres)."""
    x, y, phi = _normalise(start, goal, rho_min)
    best = math.inf
    for _, lengths in _candidates(x, y, phi):
        total = sum(abs(v) for v in lengths)
        if total < best:
            best = total
    return best * rho_min


def rs_shortest(start, goal, rho_min: float) -> RSPath:
    """Shortest Reeds-Shepp connection from ``start`` to ``goal`` (poses ``(x, y, theta)``)."""
    if rho_min <= 0:
        raise ValueError("rho_min must be positive")
    x, y, phi = _normalise(start, goal, rho_min)
    if abs(x) < _DROP and abs(y) < _DROP and abs(phi) < _DROP:
        return RSPath((), rho_min)
    best_word, best_lengths, best = "", (), math.inf
    for word, lengths in _candidates(x, y, phi):
        total = sum(abs(v) for v in lengths)
        if total < best - 1e-12:
            best_word, best_lengths, best = word, lengths, total
    segments = tuple(
        Segment(kind, length * rho_min) for kind, length in zip(best_word, best_lengths) if abs(length) > _DROP
    )
    return RSPath(_merge(segments), rho_min)


def _merge(segments: tuple[Segment, ...]) -> tuple[Segment, ...]:
    out: list[Segment] = []
    for seg in segments:
        if out and out[-1].kind == seg.kind and out[-1].direction == seg.direction:
            out[-1] = Segment(seg.kind, out[-1].length + seg.length)
        else:
            out.append(seg)
    return tuple(out)

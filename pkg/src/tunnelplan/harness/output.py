"""Trajectory CSV and SVG scene plots."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..model import DiscGeometry, disc_centers_array
from ..optimize import Trajectory

CSV_HEADER = ("t", "x", "y", "theta", "v", "phi", "a", "omega")


def trajectory_rows(traj: Trajectory) -> list[list[float]]:
    """One row per node; the last node repeats the final control."""
    S, U = np.asarray(traj.states), np.asarray(traj.controls)
    U = np.vstack([U, U[-1:]]) if len(U) else np.zeros((len(S), 2))
    rows = []
    for t, s, u in zip(traj.times, S, U):
        x, y, v, phi, theta = s
        rows.append([float(t), x, y, theta, v, phi, u[0], u[1]])
    return rows


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for row in trajectory_rows(traj):
            w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return np.array(rows[1:], dtype=float)


class _Svg:
    """Tiny SVG writer in world coordinates (y axis flipped)."""

    def __init__(self, lo, hi, width_px=900):
        span = np.maximum(np.asarray(hi) - np.asarray(lo), 1e-9)
        self.lo, self.hi = np.asarray(lo, float), np.asarray(hi, float)
        self.scale = width_px / span[0]
        self.w, self.h = width_px, span[1] * self.scale
        self.items: list[str] = []

    def _xy(self, p):
        return (p[0] - self.lo[0]) * self.scale, (self.hi[1] - p[1]) * self.scale

    def circle(self, c, r, **style):
        x, y = self._xy(c)
        self.items.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r * self.scale:.2f}"{_attrs(style)}/>')

    def polyline(self, pts, closed=False, **style):
        if len(pts) == 0:
            return
        coords = " ".join("{:.2f},{:.2f}".format(*self._xy(p)) for p in pts)
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{coords}"{_attrs(style)}/>')

    def text(self, p, s, **style):
        x, y = self._xy(p)
        self.items.append(f'<text x="{x:.2f}" y="{y:.2f}"{_attrs(style)}>{escape(s)}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" height="{self.h:.0f}" '
                f'viewBox="0 0 {self.w:.2f} {self.h:.2f}">')
        body = "\n".join(self.items)
        return f'{head}\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'


def _attrs(style) -> str:
    return "".join(f' {k.replace("_", "-")}="{v}"' for k, v in style.items())


def scene_svg(scenario, result, discs: DiscGeometry | None = None, pad: float = 3.0) -> str:
    """Obstacles with their R_c discs, reference, rectangles and optimised path.

    The view is cropped to the planned items plus ``pad`` metres; obstacle
    points outside it are skipped.
    """
    discs = discs or DiscGeometry.from_vehicle(scenario.vehicle)
    pts = [np.array([[scenario.start.x, scenario.start.y], [scenario.goal.x, scenario.goal.y]])]
    ref, tunnels, sol = result.reference, result.tunnels, result.solution
    if ref is not None:
        pts += [ref.traj_f, ref.traj_r]
    if tunnels is not None:
        pts += [r.vertices for r in tunnels.rects_f + tunnels.rects_r]
    if sol is not None:
        pts.append(sol.trajectory.states[:, :2])
    allp = np.vstack(pts)
    lo, hi = allp.min(axis=0) - pad, allp.max(axis=0) + pad
    svg = _Svg(lo, hi)

    obs = scenario.obstacles.points
    if len(obs):
        inside = np.all((obs >= lo - discs.radius) & (obs <= hi + discs.radius), axis=1)
        for p in obs[inside]:
            svg.circle(p, discs.radius, fill="#f4c7c3", stroke="#d93025", stroke_width=0.5, fill_opacity=0.6)
            svg.circle(p, 0.08, fill="#d93025")
    if tunnels is not None:
        for rect in tunnels.rects_f:
            svg.polyline(rect.vertices, closed=True, fill="none", stroke="#1a73e8", stroke_width=1, stroke_opacity=0.6)
        for rect in tunnels.rects_r:
            svg.polyline(rect.vertices, closed=True, fill="none", stroke="#188038", stroke_width=1,
                         stroke_opacity=0.6, stroke_dasharray="4,3")
    if ref is not None:
        svg.polyline(ref.states[:, :2], fill="none", stroke="#9aa0a6", stroke_width=2, stroke_dasharray="6,4")
    if sol is not None:
        S = sol.trajectory.states
        svg.polyline(S[:, :2], fill="none", stroke="#202124", stroke_width=2)
        front, rear = disc_centers_array(S[:, [0, 1, 4]], discs)
        svg.polyline(front, fill="none", stroke="#1a73e8", stroke_width=1)
        svg.polyline(rear, fill="none", stroke="#188038", stroke_width=1)
    for b, label in ((scenario.start, "start"), (scenario.goal, "goal")):
        tip = (b.x + 1.5 * np.cos(b.theta), b.y + 1.5 * np.sin(b.theta))
        svg.polyline([(b.x, b.y), tip], stroke="#e37400", stroke_width=3)
        svg.text((b.x, b.y), label, font_size=12, font_family="sans-serif")
    return svg.render()


def write_svg(scenario, result, path, discs: DiscGeometry | None = None) -> None:
    Path(path).write_text(scene_svg(scenario, result, discs))

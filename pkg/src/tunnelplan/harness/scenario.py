"""Scenario files and the randomised benchmark case generator."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from ..geometry import Bounds, ObstacleMap
from ..model import BoundaryState, DiscGeometry, VehicleParams
from ..search import SearchConfig
from ..tunnel import TunnelConfig


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class NlpConfig:
    n_intervals: int = 60  # NE
    t_min: float = 0.1
    margin: float = 0.0
    smoothing: float = 0.0
    tol: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        if self.n_intervals < 1:
            raise ValueError("nlp.NE must be at least 1")
        if self.t_min <= 0:
            raise ValueError("nlp.t_min must be positive")
        if self.margin < 0 or self.smoothing < 0:
            raise ValueError("nlp.margin and nlp.smoothing must be non-negative")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("nlp.tol must be positive and nlp.max_iter at least 1")


@dataclass(frozen=True)
class Scenario:
    vehicle: VehicleParams
    obstacles: ObstacleMap
    start: BoundaryState
    goal: BoundaryState
    search: SearchConfig = field(default_factory=SearchConfig)
    tunnel: TunnelConfig = field(default_factory=TunnelConfig)
    nlp: NlpConfig = field(default_factory=NlpConfig)
    name: str = ""

    @property
    def bounds(self) -> Bounds:
        return self.obstacles.bounds


# file keys for vehicle parameters use the customary symbols
_VEHICLE_KEYS = {
    "L_F": "front_hang",
    "L_W": "wheelbase",
    "L_R": "rear_hang",
    "L_B": "width",
    "a_max": "a_max",
    "v_max": "v_max",
    "Phi_max": "phi_max",
    "Omega_max": "omega_max",
}
_TUNNEL_KEYS = {"N_R": "n_rect", "delta_s": "delta_s", "L_max": "max_expansion", "seconds_per_rect": "seconds_per_rect"}
_NLP_KEYS = {"NE": "n_intervals", "t_min": "t_min", "margin": "margin", "smoothing": "smoothing", "tol": "tol", "max_iter": "max_iter"}
_BOUNDARY_KEYS = ("x", "y", "theta", "v", "phi", "a", "omega")
_TOP_KEYS = {"name", "vehicle", "bounds", "obstacles", "start", "goal", "search", "tunnel", "nlp"}


def _number(value, where: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _block(data: dict, key: str, mapping: dict[str, str], cls, where: str):
    raw = data.get(key) or {}
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected an object")
    kwargs = {}
    for k, v in raw.items():
        if k not in mapping:
            raise ScenarioError(f"{where}.{k}: unknown key (expected one of {sorted(mapping)})")
        name = mapping[k]
        if v is None:
            kwargs[name] = None
        elif name in ("n_rect", "n_intervals", "max_iter", "heading_bins", "steering_samples", "rs_shot_period", "node_budget"):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioError(f"{where}.{k}: expected an integer, got {v!r}")
            kwargs[name] = v
        else:
            kwargs[name] = _number(v, f"{where}.{k}")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        # reword the dataclass message so it names the file key
        msg = str(exc)
        for k, name in mapping.items():
            if msg.startswith(name) or f".{name}" in msg:
                raise ScenarioError(f"{where}.{k}: {msg}") from None
        raise ScenarioError(f"{where}: {msg}") from None


def _boundary(raw, where: str) -> BoundaryState:
    if isinstance(raw, (list, tuple)):
        if not 3 <= len(raw) <= 7:
            raise ScenarioError(f"{where}: expected 3 to 7 numbers (x, y, theta, v, phi, a, omega)")
        return BoundaryState(*(_number(v, f"{where}[{i}]") for i, v in enumerate(raw)))
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected an object or a list")
    unknown = set(raw) - set(_BOUNDARY_KEYS)
    if unknown:
        raise ScenarioError(f"{where}.{sorted(unknown)[0]}: unknown key")
    for k in ("x", "y", "theta"):
        if k not in raw:
            raise ScenarioError(f"{where}.{k}: missing")
    vals = {k: _number(v, f"{where}.{k}") for k, v in raw.items()}
    for k, v in vals.items():
        if not math.isfinite(v):
            raise ScenarioError(f"{where}.{k}: must be finite")
    return BoundaryState(**vals)


def _default_bounds(points: np.ndarray, start: BoundaryState, goal: BoundaryState, pad: float = 10.0) -> Bounds:
    xy = np.vstack([points.reshape(-1, 2), [[start.x, start.y], [goal.x, goal.y]]])
    lo, hi = xy.min(axis=0) - pad, xy.max(axis=0) + pad
    return Bounds(lo[0], lo[1], hi[0], hi[1])


def scenario_from_dict(data: dict[str, Any], where: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: top level must be an object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"{where}.{sorted(unknown)[0]}: unknown key")
    for key in ("start", "goal"):
        if key not in data:
            raise ScenarioError(f"{where}.{key}: missing")

    vehicle = _block(data, "vehicle", _VEHICLE_KEYS, VehicleParams, f"{where}.vehicle")
    search_keys = {f.name: f.name for f in fields(SearchConfig)}
    search = _block(data, "search", search_keys, SearchConfig, f"{where}.search")
    tunnel = _block(data, "tunnel", _TUNNEL_KEYS, TunnelConfig, f"{where}.tunnel")
    nlp = _block(data, "nlp", _NLP_KEYS, NlpConfig, f"{where}.nlp")
    start = _boundary(data["start"], f"{where}.start")
    goal = _boundary(data["goal"], f"{where}.goal")

    raw_obs = data.get("obstacles") or []
    try:
        pts = np.array([[_number(p[0], f"{where}.obstacles[{i}]"), _number(p[1], f"{where}.obstacles[{i}]")]
                        for i, p in enumerate(raw_obs)], dtype=float).reshape(-1, 2)
    except (TypeError, IndexError, KeyError):
        raise ScenarioError(f"{where}.obstacles: expected a list of [x, y] pairs") from None
    if not np.all(np.isfinite(pts)):
        raise ScenarioError(f"{where}.obstacles: coordinates must be finite")

    if "bounds" in data and data["bounds"] is not None:
        b = data["bounds"]
        if isinstance(b, dict):
            b = [b.get(k) for k in ("xmin", "ymin", "xmax", "ymax")]
        if not isinstance(b, (list, tuple)) or len(b) != 4:
            raise ScenarioError(f"{where}.bounds: expected [xmin, ymin, xmax, ymax]")
        bounds = Bounds(*(_number(v, f"{where}.bounds[{i}]") for i, v in enumerate(b)))
    else:
        bounds = _default_bounds(pts, start, goal)

    cell = max(DiscGeometry.from_vehicle(vehicle).radius, 1.0)
    try:
        obstacles = ObstacleMap(pts, bounds, cell_size=cell)
    except ValueError as exc:
        raise ScenarioError(f"{where}.obstacles: {exc}") from None
    for key, b in (("start", start), ("goal", goal)):
        if not bounds.contains(b.x, b.y):
            raise ScenarioError(f"{where}.{key}: position ({b.x}, {b.y}) lies outside the map bounds")
    return Scenario(vehicle, obstacles, start, goal, search, tunnel, nlp, str(data.get("name", "")))


def _encode_number(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    veh = {k: _encode_number(getattr(sc.vehicle, name)) for k, name in _VEHICLE_KEYS.items()}
    return {
        "name": sc.name,
        "vehicle": veh,
        "bounds": list(sc.bounds),
        "obstacles": sc.obstacles.points.tolist(),
        "start": sc.start._asdict(),
        "goal": sc.goal._asdict(),
        "search": asdict(sc.search),
        "tunnel": {k: getattr(sc.tunnel, name) for k, name in _TUNNEL_KEYS.items()},
        "nlp": {k: getattr(sc.nlp, name) for k, name in _NLP_KEYS.items()},
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data, where=path.name)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


@dataclass(frozen=True)
class GenConfig:
    """Random case generator settings (defaults follow the 80 m benchmark protocol)."""

    map_size: float = 80.0
    max_distance: float = 10.0
    min_obstacles: int = 10
    max_obstacles: int = 100


def random_case(seed, gen: GenConfig | None = None, **overrides) -> Scenario:
    """Seeded random scenario; ``seed`` is anything ``numpy.random.default_rng`` accepts.

    The goal lies at a uniform distance in ``(0, max_distance]`` and uniform
    bearing from the start; draws whose goal would leave the map are redrawn.
    Start/goal collisions are left in: they are part of the benchmark's
    failure statistics.
    """
    gen = gen or GenConfig()
    rng = np.random.default_rng(seed)
    size = gen.map_size
    x0, y0 = rng.uniform(0.0, size, 2)
    while True:
        dist = gen.max_distance - rng.uniform(0.0, gen.max_distance)  # (0, max]
        bearing = rng.uniform(0.0, 2.0 * math.pi)
        xf, yf = x0 + dist * math.cos(bearing), y0 + dist * math.sin(bearing)
        if 0.0 <= xf <= size and 0.0 <= yf <= size:
            break
    th0, thf = rng.uniform(0.0, 2.0 * math.pi, 2)
    n_obs = int(rng.integers(gen.min_obstacles, gen.max_obstacles, endpoint=True))
    pts = rng.uniform(0.0, size, (n_obs, 2))
    vehicle = overrides.pop("vehicle", VehicleParams())
    cell = max(DiscGeometry.from_vehicle(vehicle).radius, 1.0)
    sc = Scenario(
        vehicle=vehicle,
        obstacles=ObstacleMap(pts, Bounds(0.0, 0.0, size, size), cell_size=cell),
        start=BoundaryState(float(x0), float(y0), float(th0)),
        goal=BoundaryState(float(xf), float(yf), float(thf)),
        name=f"random-{seed}",
    )
    return replace(sc, **overrides) if overrides else sc

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for ``oracles``

from tunnelplan.geometry import Bounds, ObstacleMap  # noqa: E402
from tunnelplan.harness import Scenario, load_scenario, run_benchmark, run_pipeline  # noqa: E402
from tunnelplan.model import BoundaryState, VehicleParams  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
PARKING = ROOT / "scenarios" / "parking.json"

BENCH_CASES = 500
BENCH_SEED = 2024

CRITERIA = {
    1: "tunnel safety lemma",
    2: "scale independence of the NLP size",
    3: "analytic minimum-time floor",
    4: "velocity-profile oracle",
    5: "derivative correctness",
    6: "benchmark regression",
    7: "timing sanity",
    8: "expansion-extent oracle",
    9: "parking-scheme qualitative regression",
}


def straight_scenario(length=5.0, obstacles=None, **kw) -> Scenario:
    pts = np.empty((0, 2)) if obstacles is None else np.asarray(obstacles, float)
    return Scenario(
        vehicle=kw.pop("vehicle", VehicleParams()),
        obstacles=ObstacleMap(pts, Bounds(-20, -20, 25, 20)),
        start=BoundaryState(0.0, 0.0, 0.0),
        goal=BoundaryState(length, 0.0, 0.0),
        **kw,
    )


@pytest.fixture(scope="session")
def straight_result():
    return run_pipeline(straight_scenario())


@pytest.fixture(scope="session")
def parking_scenario():
    return load_scenario(PARKING)


@pytest.fixture(scope="session")
def parking_result(parking_scenario):
    return run_pipeline(parking_scenario)


@pytest.fixture(scope="session")
def benchmark_500():
    """The 500-case single-worker run shared by the benchmark and timing checks."""
    return run_benchmark(BENCH_CASES, BENCH_SEED, workers=1)


# -- acceptance summary ---------------------------------------------------------------

_outcomes: dict[int, list[bool]] = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _outcomes.setdefault(crit, []).append(not failed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            state = "NOT RUN"
        else:
            state = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {state} - {title}")

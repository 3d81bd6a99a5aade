"""Randomised benchmark: per-stage success rates and CPU-time statistics."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .pipeline import STAGES, run_pipeline
from .scenario import GenConfig, random_case

SEED_MASK = (1 << 64) - 1


def nearest_rank(values, pct: float) -> float:
    """Nearest-rank percentile of ``values`` (NaN when empty)."""
    xs = sorted(values)
    if not xs:
        return math.nan
    rank = max(1, math.ceil(pct / 100.0 * len(xs)))
    return float(xs[rank - 1])


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan


@dataclass(frozen=True)
class CaseOutcome:
    index: int
    stage1_ok: bool
    stage2_ok: bool | None
    stage3_ok: bool | None
    times: dict
    failure: str = ""
    t_f: float | None = None
    iterations: int | None = None
    # verification margins by check name (negative means violated); None before stage 3
    margins: dict | None = None

    @property
    def ok(self) -> bool:
        return bool(self.stage1_ok and self.stage2_ok and self.stage3_ok)

    @property
    def total_time(self) -> float:
        return sum(self.times.values())


@dataclass(frozen=True)
class StageStats:
    reached: int
    succeeded: int
    success_rate: float
    mean_time_succeeded: float
    mean_time_failed: float
    mean_time_overall: float
    max_time: float
    p99_time: float


@dataclass
class BenchStats:
    n_cases: int
    seed: int
    stages: dict[str, StageStats]
    end_to_end_median: float
    end_to_end_p99: float
    overall_success_rate: float
    workers: int = 1
    cases: list[CaseOutcome] = field(default_factory=list, repr=False)

    def to_dict(self, with_cases: bool = False) -> dict:
        out = {
            "n_cases": self.n_cases,
            "seed": self.seed,
            "workers": self.workers,
            "stages": {k: asdict(v) for k, v in self.stages.items()},
            "end_to_end_median": self.end_to_end_median,
            "end_to_end_p99": self.end_to_end_p99,
            "overall_success_rate": self.overall_success_rate,
        }
        if with_cases:
            out["cases"] = [{**asdict(c), "ok": c.ok} for c in self.cases]
        return _json_safe(out)


def _json_safe(obj):
    # NaN is not valid JSON; empty cells (e.g. no failed cases) become null
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def stage_stats(cases: list[CaseOutcome], stage: str) -> StageStats:
    """Statistics over the cases that reached ``stage``."""
    flag = f"{stage}_ok"
    reached = [c for c in cases if getattr(c, flag) is not None]
    ok = [c.times[stage] for c in reached if getattr(c, flag)]
    bad = [c.times[stage] for c in reached if not getattr(c, flag)]
    every = ok + bad
    return StageStats(
        reached=len(reached),
        succeeded=len(ok),
        success_rate=len(ok) / len(reached) if reached else math.nan,
        mean_time_succeeded=_mean(ok),
        mean_time_failed=_mean(bad),
        mean_time_overall=_mean(every),
        max_time=max(every) if every else math.nan,
        p99_time=nearest_rank(every, 99.0),
    )


def summarize(cases: list[CaseOutcome], seed: int, workers: int = 1) -> BenchStats:
    cases = sorted(cases, key=lambda c: c.index)
    totals = [c.total_time for c in cases]
    return BenchStats(
        n_cases=len(cases),
        seed=seed,
        stages={s: stage_stats(cases, s) for s in STAGES},
        end_to_end_median=float(np.median(totals)) if totals else math.nan,
        end_to_end_p99=nearest_rank(totals, 99.0),
        overall_success_rate=sum(c.ok for c in cases) / len(cases) if cases else math.nan,
        workers=workers,
        cases=cases,
    )


def case_seed(seed: int, index: int) -> tuple[int, int]:
    return (seed & SEED_MASK, index)


def run_case(seed: int, index: int, gen: GenConfig | None = None) -> CaseOutcome:
    res = run_pipeline(random_case(case_seed(seed, index), gen))
    sol = res.solution
    # stage1 carries a flag even on failure; the later ones only once reached
    return CaseOutcome(
        index=index,
        stage1_ok=res.stage1_ok,
        stage2_ok=res.stage2_ok,
        stage3_ok=res.stage3_ok,
        times=dict(res.times),
        failure=res.failure,
        t_f=sol.t_f if sol is not None else None,
        iterations=sol.iterations if sol is not None else None,
        margins={k: c.margin for k, c in res.report.checks.items()} if res.report is not None else None,
    )


def _run_case_args(args) -> CaseOutcome:
    return run_case(*args)


def run_benchmark(
    n_cases: int, seed: int = 0, gen: GenConfig | None = None, workers: int = 1, progress=None
) -> BenchStats:
    """Run the pipeline on ``n_cases`` seeded random scenarios.

    Case ``i`` is generated from the seed pair ``(seed, i)``, so outcomes do
    not depend on the worker count.  ``progress`` is called with each
    finished :class:`CaseOutcome` when given.
    """
    if n_cases < 1:
        raise ValueError("n_cases must be at least 1")
    jobs = [(seed, i, gen) for i in range(n_cases)]
    cases = []
    if workers <= 1:
        for job in jobs:
            cases.append(_run_case_args(job))
            if progress:
                progress(cases[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for out in pool.map(_run_case_args, jobs, chunksize=4):
                cases.append(out)
                if progress:
                    progress(out)
    return summarize(cases, seed, workers)


def format_table(stats: BenchStats) -> str:
    """Fixed-width text rendering of the per-stage KPIs (times in ms)."""

    def ms(v):
        return "-" if v is None or not math.isfinite(v) else f"{1000.0 * v:.1f}"

    def pct(v):
        return "-" if not math.isfinite(v) else f"{100.0 * v:.2f}%"

    rows = [
        ("Success rate", lambda s: pct(s.success_rate)),
        ("Cases reached", lambda s: str(s.reached)),
        ("Mean time, succeeded (ms)", lambda s: ms(s.mean_time_succeeded)),
        ("Mean time, failed (ms)", lambda s: ms(s.mean_time_failed)),
        ("Mean time, overall (ms)", lambda s: ms(s.mean_time_overall)),
        ("Max time (ms)", lambda s: ms(s.max_time)),
        ("99th percentile time (ms)", lambda s: ms(s.p99_time)),
    ]
    w0, w = 28, 12
    lines = [f"{'':<{w0}}" + "".join(f"{name.capitalize():>{w}}" for name in STAGES)]
    lines.append("-" * (w0 + w * len(STAGES)))
    for label, fmt in rows:
        lines.append(f"{label:<{w0}}" + "".join(f"{fmt(stats.stages[s]):>{w}}" for s in STAGES))
    lines.append("-" * (w0 + w * len(STAGES)))
    lines.append(f"cases={stats.n_cases} seed={stats.seed} workers={stats.workers} "
                 f"overall={pct(stats.overall_success_rate)} "
                 f"median={ms(stats.end_to_end_median)} ms p99={ms(stats.end_to_end_p99)} ms")
    return "\n".join(lines)


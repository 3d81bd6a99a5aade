"""Command-line entry point: ``plan``, ``bench`` and ``rand-case``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ScenarioError, load_scenario, random_case, run_pipeline, save_scenario
from .harness.bench import case_seed, format_table, run_benchmark
from .harness.output import write_svg, write_trajectory_csv
from .optimize import IpmOptions

EXIT_OK, EXIT_ERROR, EXIT_STAGE_FAILURE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; 2 is reserved for stage failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _parse_args(argv):
    parser = _Parser(prog="tunnelplan", description="Tunnel-based trajectory planning for a car-like vehicle.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="plan one scenario file")
    p.add_argument("scenario", type=Path)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current directory)")
    p.add_argument("--svg", action="store_true", help="also write scene.svg")
    p.add_argument("--verbose", "-v", action="store_true", help="print the solver iteration log to stderr")

    b = sub.add_parser("bench", help="run the randomised benchmark")
    b.add_argument("--cases", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1, help="process pool size; use 1 for timing runs")
    b.add_argument("--out", type=Path, default=None, help="directory for stats.json and stats.txt")

    r = sub.add_parser("rand-case", help="write one random scenario to a file")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--index", type=int, default=0, help="case index within the seed (as used by bench)")
    r.add_argument("--out", type=Path, required=True)
    return parser.parse_args(argv)


def _summary(res) -> dict:
    out = {
        "stage1_ok": res.stage1_ok,
        "stage2_ok": res.stage2_ok,
        "stage3_ok": res.stage3_ok,
        "times": res.times,
        "failure": res.failure,
    }
    if res.reference is not None:
        out["t_f_reference"] = res.reference.t_f_bar
    if res.tunnels is not None:
        out["n_rect"] = res.tunnels.n_rect
        out["tunnels"] = res.tunnels.to_dict()
    if res.solution is not None:
        sol = res.solution
        out.update(status=sol.status.value, t_f=sol.t_f, iterations=sol.iterations, primal_inf=sol.primal_inf)
    if res.report is not None:
        out["verification"] = {k: {"passed": c.passed, "margin": c.margin} for k, c in res.report.checks.items()}
    return out


def cmd_plan(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    opts = None
    if args.verbose:
        opts = IpmOptions(tol=scenario.nlp.tol, max_iter=scenario.nlp.max_iter, log=sys.stderr)
    res = run_pipeline(scenario, opts)
    summary = _summary(res)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        if res.solution is not None:
            write_trajectory_csv(res.solution.trajectory, args.out / "trajectory.csv")
        if args.svg:
            write_svg(scenario, res, args.out / "scene.svg")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    times = " ".join(f"{k}={1000 * v:.1f}ms" for k, v in res.times.items())
    if res.ok:
        print(f"ok: t_f={res.solution.t_f:.4f} s, {res.solution.iterations} iterations ({times})")
        return EXIT_OK
    print(f"failed at {res.failed_stage}: {res.failure} ({times})")
    return EXIT_STAGE_FAILURE


def cmd_bench(args) -> int:
    if args.cases < 1:
        print("error: --cases must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    stats = run_benchmark(args.cases, args.seed, workers=args.workers)
    table = format_table(stats)
    print(table)
    if args.out is not None:
        try:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "stats.json").write_text(json.dumps(stats.to_dict(with_cases=True), indent=2) + "\n")
            (args.out / "stats.txt").write_text(table + "\n")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    return EXIT_OK


def cmd_rand_case(args) -> int:
    scenario = random_case(case_seed(args.seed, args.index))
    try:
        save_scenario(scenario, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def main(argv=None) -> int:
    args = _parse_args(argv)
    handler = {"plan": cmd_plan, "bench": cmd_bench, "rand-case": cmd_rand_case}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

from .bench import BenchStats, CaseOutcome, StageStats, format_table, nearest_rank, run_benchmark
from .output import scene_svg, write_svg, write_trajectory_csv
from .pipeline import PlanResult, run_pipeline
from .scenario import (
    GenConfig,
    NlpConfig,
    Scenario,
    ScenarioError,
    load_scenario,
    random_case,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

__all__ = [
    "BenchStats",
    "CaseOutcome",
    "StageStats",
    "format_table",
    "nearest_rank",
    "run_benchmark",
    "scene_svg",
    "write_svg",
    "write_trajectory_csv",
    "GenConfig",
    "NlpConfig",
    "PlanResult",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "random_case",
    "run_pipeline",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
]

"""Closed-loop MPC harness: scenario files, receding-horizon simulation,
baseline comparison and log serialization."""

from .closed_loop import (ComparisonTable, PlantDivergedError, TrajectoryLog,
                          run_baseline_comparison, run_closed_loop, warm_start_shift)
from .logio import LogIOError, read_predicted, read_trajectory, write_log
from .scenario import (Scenario, ScenarioError, load_scenario, parse_scenario,
                       shipped_scenarios)

__all__ = [
    "ComparisonTable", "PlantDivergedError", "TrajectoryLog", "run_baseline_comparison",
    "run_closed_loop", "warm_start_shift", "LogIOError", "read_predicted",
    "read_trajectory", "write_log", "Scenario", "ScenarioError", "load_scenario",
    "parse_scenario", "shipped_scenarios",
]

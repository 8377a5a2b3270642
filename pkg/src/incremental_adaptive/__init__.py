"""Adaptive tracking control with incremental (delay-recursive) parameter laws."""

from .analysis import barbalat_monitor, compare_runs, krasovskii_L, run_metrics, window_integral
from .config import (
    ScenarioConfig,
    default_scenario,
    forward_scenario,
    integral_scenario,
    parse_config,
    robust_scenario,
    saturated_scenario,
    serialize_config,
)
from .simulate import Simulation, Trajectory, simulate

__all__ = [
    "ScenarioConfig", "Simulation", "Trajectory", "barbalat_monitor", "compare_runs",
    "default_scenario", "forward_scenario", "integral_scenario", "krasovskii_L",
    "parse_config", "robust_scenario", "run_metrics", "saturated_scenario",
    "serialize_config", "simulate", "window_integral",
]

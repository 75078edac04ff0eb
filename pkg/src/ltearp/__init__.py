"""Analytic model and simulator of LTE random access under machine-type traffic."""

from .analytic import AnalyticResult, solve_total_rate
from .config import CellConfig, ScenarioSpec, SignalingCatalog, TrafficConfig, load_scenario
from .sim import SimResult, run

__all__ = [
    "AnalyticResult",
    "CellConfig",
    "ScenarioSpec",
    "SignalingCatalog",
    "SimResult",
    "TrafficConfig",
    "load_scenario",
    "run",
    "solve_total_rate",
]

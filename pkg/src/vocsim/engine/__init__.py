"""Simulation engine: scenario files, fixed-step runs, traces and the CLI."""

from .scenario import Scenario, load_scenario, parse_scenario
from .simulate import RunReport, run, write_csv

__all__ = [
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "RunReport",
    "run",
    "write_csv",
]

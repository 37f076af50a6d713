"""Scenario harness and the spacedream command line tool."""

from .main import main
from .report import CHECKS, FileEntry, RunReport, render_report, render_summary
from .runner import ScenarioRun, run_scenario
from .scenario import (
    BUILTIN_SCENARIOS,
    FaultAction,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_scenario,
)

__all__ = [
    "BUILTIN_SCENARIOS",
    "CHECKS",
    "FaultAction",
    "FileEntry",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "ScenarioRun",
    "load_scenario",
    "main",
    "parse_scenario",
    "render_report",
    "render_summary",
    "run_scenario",
]

"""Closed-loop runs, scenario files, logs, plots and regression comparison."""

from .plots import PLOT_FILES, emit_plots
from .runlog import COLUMNS, CompareReport, RunLog, SchemaMismatchError, regression_compare
from .runner import MODES, RunConfig, run, write_outputs
from .scenario import Scenario, ScenarioError, TimedBar, load_scenario, scenario_from_dict

__all__ = [
    "PLOT_FILES", "emit_plots", "COLUMNS", "CompareReport", "RunLog", "SchemaMismatchError",
    "regression_compare", "MODES", "RunConfig", "run", "write_outputs", "Scenario",
    "ScenarioError", "TimedBar", "load_scenario", "scenario_from_dict",
]

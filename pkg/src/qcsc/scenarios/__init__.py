"""Bundled scenarios, scenario loading and the simulation runner."""
from qcsc.scenarios.drivers import DRIVERS
from qcsc.scenarios.loader import (
    Scenario,
    WorkloadEntry,
    bundled_scenarios,
    bundled_topologies,
    load_scenario,
    load_topology,
    parse_scenario,
    schema,
)
from qcsc.scenarios.runner import RunResult, Simulation, report_csv, run_scenario, validate_scenario

__all__ = [
    "DRIVERS",
    "RunResult",
    "Scenario",
    "Simulation",
    "WorkloadEntry",
    "bundled_scenarios",
    "bundled_topologies",
    "load_scenario",
    "load_topology",
    "parse_scenario",
    "report_csv",
    "run_scenario",
    "schema",
    "validate_scenario",
]

"""Experiment runner: scenarios, sweeps, experiments and claim verdicts."""

from .claims import CLAIMS, verify
from .experiments import (
    experiment_fairness,
    experiment_fault_tolerance,
    experiment_flp_stall,
    run_sweep,
    sweep_complexity,
)
from .io import recompute
from .scenario import RunReport, Verdict, run_scenario

__all__ = [
    "CLAIMS",
    "RunReport",
    "Verdict",
    "experiment_fairness",
    "experiment_fault_tolerance",
    "experiment_flp_stall",
    "recompute",
    "run_scenario",
    "run_sweep",
    "sweep_complexity",
    "verify",
]

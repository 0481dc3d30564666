"""Joint recovery of flights, aircraft and cargo after airline disruptions.

The main entry points are :func:`run_crg` (column-and-row generation on the
string model), :func:`solve_arc` (the time-expanded arc model on a fixed delay
grid) and :func:`run_sequential` (aircraft first, cargo second).
"""
from .arc_model import solve_arc
from .crg import CrgConfig, run_crg, run_sequential
from .domain import RecoveryPlan, Scenario, plan_cost
from .scenarios import GeneratorConfig, worked_example, generate_scenario

__version__ = "0.1.0"

__all__ = [
    "CrgConfig", "GeneratorConfig", "RecoveryPlan", "Scenario", "worked_example", "generate_scenario",
    "plan_cost", "run_crg", "run_sequential", "solve_arc",
]

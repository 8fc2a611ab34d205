"""Artificial-compression solver for the incompressible Navier-Stokes
equations on a staggered grid, with variable relaxation/time-step schedules,
energy-ledger diagnostics, and a linear acoustic sub-model."""

__version__ = "0.1.0"

from .config import ConfigError, RunConfig, config_from_text, load_config
from .grid import (BC, GridSpec, ScalarField, VectorField, divergence,
                   gradient, l2norm)
from .convection import NonlinearityForm, convective
from .stepper import (SolverParams, StepInputs, StepResult,
                      step_bdf2_new, step_new, step_standard)
from .schedules import (AdaptiveDiv, Constant, Oscillating, ScheduleState,
                        SmoothRamp, audit, propose,
                        validate_slow_variation)
from .runner import (run_acoustic, run_adaptive, run_convergence,
                     run_simulation, run_validate)

__all__ = [
    "BC", "AdaptiveDiv", "ConfigError", "Constant", "GridSpec",
    "NonlinearityForm", "Oscillating", "RunConfig", "ScalarField",
    "ScheduleState", "SmoothRamp", "SolverParams", "StepInputs",
    "StepResult", "VectorField", "audit", "config_from_text", "convective",
    "divergence", "gradient", "l2norm", "load_config", "propose",
    "run_acoustic", "run_adaptive", "run_convergence", "run_simulation",
    "run_validate", "step_bdf2_new", "step_new", "step_standard",
    "validate_slow_variation",
]

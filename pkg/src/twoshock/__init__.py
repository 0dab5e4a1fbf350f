"""Viscous two-shock waves of barotropic Navier-Stokes: profiles, flow solver, shifts, diagnostics."""
from .errors import *  # noqa: F401,F403
from .profiles import (
    FarField,
    FluidParams,
    RiemannConfig,
    ShockProfile,
    TailReport,
    certify_tail_bounds,
    composite_wave,
    profile_between,
    shock_speeds,
    solve_intermediate_state,
    solve_profile,
)
from .solver import Bump, FlowState, Grid, RunSpec, StepHook, Trajectory, make_initial_data, rhs, run, step
from .shifts import ShiftEngine, ShiftState, WeightSpec, cutoffs, shift_constants, shift_rhs, weight_composed, weight_single
from .diagnostics import (
    FunctionalLedger,
    convergence_metrics,
    effective_velocity,
    functional_ledger,
    interpolation_probe,
    poincare_check,
    profile_coordinate,
    relative_pressure,
    relative_Q,
)

__version__ = "0.1.0"

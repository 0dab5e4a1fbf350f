"""Weight functions, cutoffs and the dynamical shift ODE.

Each wave ``i`` carries a weight ``a_i = 1 + nu_i (p(v_m) - p(v_i)) / delta_i``
and a shift ``X_i(t)``.  The shifts follow a feedback law that pulls each
shifted profile toward the current flow; it is integrated with the same
Runge-Kutta stages as the flow through :class:`ShiftEngine`.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameters, QuadratureUnderresolved, SeparationViolation
from .profiles import FluidParams, ShockProfile
from .quadrature import axial_trapezoid
from .solver import FlowState, StepHook

logger = logging.getLogger(__name__)

NU_CAP = 0.24
MIN_LAYER_CELLS = 8


@dataclass(frozen=True)
class WeightSpec:
    nu1: float
    nu2: float

    def __post_init__(self):
        for nu in (self.nu1, self.nu2):
            if not 0.0 < nu < 0.25:
                raise InvalidParameters(f"weight magnitude {nu} outside (0, 1/4)")

    @classmethod
    def default(cls, delta1: float, delta2: float) -> "WeightSpec":
        """``nu_i = sqrt(delta_i)``, capped just below 1/4 for strong shocks."""
        return cls(min(math.sqrt(delta1), NU_CAP), min(math.sqrt(delta2), NU_CAP))

    @property
    def total(self) -> float:
        return self.nu1 + self.nu2

    def nu(self, family: int) -> float:
        return self.nu1 if family == 1 else self.nu2


@dataclass(frozen=True)
class ShiftConstants:
    sigma_m: float
    alpha_m: float
    M: float
    m_factor: float


def shift_constants(v_mid: float, params: FluidParams, m_factor: float = 1.25) -> ShiftConstants:
    """``M = m_factor * sigma_m^4 v_m^2 alpha_m``."""
    sigma_m = math.sqrt(-float(params.dpressure(v_mid)))
    alpha_m = (params.gamma + 1.0) / (2.0 * params.gamma * sigma_m * float(params.pressure(v_mid)))
    if not m_factor > 0:
        raise InvalidParameters("M multiplier must be positive")
    return ShiftConstants(sigma_m, alpha_m, m_factor * sigma_m**4 * v_mid**2 * alpha_m, m_factor)


@dataclass(frozen=True)
class ShiftState:
    t: float
    X1: float
    X2: float
    Xdot1: float
    Xdot2: float
    constants: ShiftConstants


def _p_mid(profile: ShockProfile) -> float:
    return float(profile.params.pressure(profile.v_mid_state))


def weight_single(xi, profile: ShockProfile, nu: float):
    v = profile.value(xi)
    return 1.0 + nu * (_p_mid(profile) - profile.params.pressure(v)) / profile.delta


def weight_single_slope(xi, profile: ShockProfile, nu: float):
    return -(nu / profile.delta) * profile.pressure_slope(xi)


class WaveFields(NamedTuple):
    """Everything the shift law and the diagnostics need about the shifted waves."""

    v: np.ndarray
    u: np.ndarray
    h: np.ndarray
    a: np.ndarray
    a_slope: np.ndarray
    v_slope: tuple  # per family d v_i / dx
    p_slope: tuple  # per family d p(v_i) / dx
    a_i_slope: tuple


def wave_fields(profiles: Sequence[ShockProfile], spec: WeightSpec, t: float, x_lab, shifts) -> WaveFields:
    x = np.asarray(x_lab, dtype=float)
    v = u = h = None
    a = np.full_like(x, -1.0)
    vs, ps, ais = [], [], []
    for prof, X in zip(profiles, shifts):
        xi = x - prof.sigma * t - X
        vi, ui, hi = prof.evaluate(xi)
        nu = spec.nu(prof.family)
        a = a + 1.0 + nu * (_p_mid(prof) - prof.params.pressure(vi)) / prof.delta
        dv = prof.slope(xi)
        dp = prof.params.dpressure(vi) * dv
        vs.append(dv)
        ps.append(dp)
        ais.append(-(nu / prof.delta) * dp)
        v = vi if v is None else v + vi
        u = ui if u is None else u + ui
        h = hi if h is None else h + hi
    vm, um = profiles[0].v_right, profiles[0].u_right
    return WaveFields(v - vm, u - um, h - um, a, ais[0] + ais[1], tuple(vs), tuple(ps), tuple(ais))


def weight_composed(x1, t: float, shifts, profiles: Sequence[ShockProfile], spec: WeightSpec):
    """``a = a_1 + a_2 - 1`` at laboratory positions ``x1``; returns ``(a, da/dx1)``."""
    w = wave_fields(profiles, spec, t, x1, shifts)
    return w.a, w.a_slope


def cutoffs(t: float, x1, sigma1: float, sigma2: float):
    """Partition of unity ``(Phi_1, Phi_2)`` with a linear ramp between the waves."""
    if not sigma1 < sigma2:
        raise InvalidParameters("cutoffs need sigma1 < sigma2")
    x = np.asarray(x1, dtype=float)
    if t <= 0.0:
        phi1 = np.where(x <= 0.0, 1.0, 0.0)
    else:
        lo = (3.0 * sigma1 + sigma2) * t / 4.0
        hi = (sigma1 + 3.0 * sigma2) * t / 4.0
        phi1 = np.clip((hi - x) / (hi - lo), 0.0, 1.0)
    return phi1, 1.0 - phi1


def layer_cells(profile: ShockProfile, dx1: float) -> float:
    """Number of grid cells across the maximum-slope thickness of a profile."""
    thickness = abs(profile.v_left - profile.v_right) / float(np.max(np.abs(profile.dv_tab)))
    return thickness / dx1


def check_resolution(profiles: Sequence[ShockProfile], dx1: float) -> None:
    for prof in profiles:
        cells = layer_cells(prof, dx1)
        if cells < MIN_LAYER_CELLS:
            raise QuadratureUnderresolved(
                f"family-{prof.family} layer spans {cells:.1f} cells; need >= {MIN_LAYER_CELLS}")


def shift_rhs(flow_state: FlowState, shifts, profiles: Sequence[ShockProfile], spec: WeightSpec,
              params: FluidParams, constants: ShiftConstants) -> np.ndarray:
    """Right side ``(dX1/dt, dX2/dt)`` of the shift ODE.

    The profile effective-velocity slope is replaced by ``p(v_i)' / sigma_i*``.
    """
    grid = flow_state.grid
    check_resolution(profiles, grid.dx1)
    t = flow_state.t
    w = wave_fields(profiles, spec, t, grid.x1_lab(t), shifts)
    v = flow_state.v
    dp = params.pressure(v) - params.pressure(w.v)[:, None, None]
    dv = v - w.v[:, None, None]
    out = np.empty(2)
    for k, prof in enumerate(profiles):
        weight = (w.a * w.p_slope[k])[:, None, None]
        first = axial_trapezoid(weight * dp, grid.dx1) / prof.sigma_star**2
        second = axial_trapezoid(weight * dv, grid.dx1)
        out[k] = -(constants.M / prof.delta) * (first - second)
    return out


def separation_margins(t: float, shifts, sigma1: float, sigma2: float):
    """``(left, right)``; both must stay >= 0 for the waves to remain separated."""
    quarter = (sigma2 - sigma1) * t / 4.0
    return quarter - shifts[0], shifts[1] + quarter


@dataclass
class ShiftEngine(StepHook):
    """Solver hook co-integrating ``(X1, X2)`` and logging shift diagnostics.

    ``observers`` are called as ``obs(state, shift_state)`` after every
    accepted step (and once for the initial state).
    """

    profiles: tuple
    spec: WeightSpec
    params: FluidParams
    constants: ShiftConstants
    observers: list = field(default_factory=list)
    sep_tol: float = 1e-12
    rows: list = field(default_factory=list, init=False)
    max_rate: np.ndarray = field(default_factory=lambda: np.zeros(2), init=False)
    violations: int = field(default=0, init=False)
    last: ShiftState | None = field(default=None, init=False)

    def aux_initial(self, state):
        check_resolution(self.profiles, state.grid.dx1)
        return np.zeros(2)

    def aux_rate(self, state, aux):
        return shift_rhs(state, aux, self.profiles, self.spec, self.params, self.constants)

    def on_step(self, state, aux, info):
        rate = self.aux_rate(state, aux)
        self.max_rate = np.maximum(self.max_rate, np.abs(rate))
        s1, s2 = self.profiles[0].sigma, self.profiles[1].sigma
        left, right = separation_margins(state.t, aux, s1, s2)
        w = wave_fields(self.profiles, self.spec, state.t, state.grid.x1_lab(state.t), aux)
        sup_dev = float(np.max(np.abs(state.v - w.v[:, None, None])))
        if min(left, right) < -self.sep_tol:
            self.violations += 1
            warnings.warn(SeparationViolation(
                f"shift separation breached at t={state.t:.6g}: margins ({left:.3e}, {right:.3e})"))
        self.last = ShiftState(state.t, float(aux[0]), float(aux[1]), float(rate[0]), float(rate[1]),
                               self.constants)
        self.rows.append((state.t, float(aux[0]), float(aux[1]), float(rate[0]), float(rate[1]),
                          left, right, sup_dev))
        for obs in self.observers:
            obs(state, self.last)

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SHIFT_LOG_COLUMNS)
            for row in self.rows:
                w.writerow([repr(float(x)) for x in row])


SHIFT_LOG_COLUMNS = ("t", "X1", "X2", "Xdot1", "Xdot2", "sep_margin_left", "sep_margin_right",
                     "sup_perturbation")


def read_shift_log(path) -> np.ndarray:
    """Shift log as a structured array with the logged column names."""
    return np.genfromtxt(path, delimiter=",", names=True)

"""Relative quantities, entropy and dissipation functionals, functional inequalities.

Every integral goes through :mod:`twoshock.quadrature`, and every spatial
derivative of a flow field uses the centred stencils of the solver, so the
functionals are consistent with the discrete dynamics.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre

from .errors import NotApplicable, WeightSingularity
from .profiles import FluidParams, ShockProfile
from .quadrature import axial_trapezoid, fixed_sum
from .shifts import WeightSpec, check_resolution, cutoffs, wave_fields
from .solver import NG, FlowState, Grid, _pad

# -- relative quantities -------------------------------------------------------


def relative_pressure(v, w, params: FluidParams):
    """``p(v|w) = p(v) - p(w) - p'(w)(v - w)``, nonnegative by convexity."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return params.pressure(v) - params.pressure(w) - params.dpressure(w) * (v - w)


def entropy_density(v, params: FluidParams):
    """``Q(v) = b v^(1-gamma) / (gamma - 1)``, so that ``Q' = -p``."""
    return params.pressure_coeff * np.asarray(v, dtype=float) ** (1.0 - params.gamma) / (params.gamma - 1.0)


def relative_Q(v, w, params: FluidParams):
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return entropy_density(v, params) - entropy_density(w, params) + params.pressure(w) * (v - w)


# -- discrete derivatives ------------------------------------------------------


def _d_axis(f, axis, grid: Grid, left=0.0, right=0.0):
    """Centred first difference along one axis; axial ends padded with constants."""
    if axis == 0:
        P = _pad(f, left, right)
        n = grid.n1
        return (P[NG + 1:NG + 1 + n] - P[NG - 1:NG - 1 + n]) / (2.0 * grid.dx1)
    dx = grid.dx2 if axis == 1 else grid.dx3
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * dx)


def _axes(grid: Grid):
    return (0,) if grid.is_1d else (0, 1, 2)


def gradient(f, grid: Grid, left=0.0, right=0.0):
    return [_d_axis(f, k, grid, left, right) for k in _axes(grid)]


def _derivative_tensor(f, grid: Grid, order: int):
    """All ``order``-fold nested centred derivatives of a field vanishing at the ends."""
    out = [f]
    for _ in range(order):
        out = [_d_axis(g, k, grid) for g in out for k in _axes(grid)]
    return out


def effective_velocity(flow_state: FlowState, params: FluidParams, far=None) -> np.ndarray:
    """``h = u - (2 mu + lambda) grad v`` with the solver's centred stencil.

    Axial ghost values are the far-field volumes when ``far`` is given and
    the edge values otherwise.
    """
    grid = flow_state.grid
    v = flow_state.v
    if far is None:
        left, right = v[0], v[-1]
    else:
        left, right = far.v_minus, far.v_plus
    h = np.array(flow_state.u, dtype=float, copy=True)
    for k, g in zip(_axes(grid), gradient(v, grid, left, right)):
        h[k] -= params.eff_visc * g
    return h


# -- functional ledger --------------------------------------------------------


@dataclass(frozen=True)
class FunctionalLedger:
    t: float
    E_weighted: float
    G_S_p: float
    G_S_v: float
    D: float
    D1: float
    D2: float
    D3: float
    G1: float
    G3: float
    interaction_12: float
    sup_v_dev: float
    sup_u_dev: float
    X1: float = 0.0
    X2: float = 0.0
    Xdot1: float = 0.0
    Xdot2: float = 0.0
    phi2_tail: float = 0.0


LEDGER_COLUMNS = tuple(f.name for f in fields(FunctionalLedger))


def _planar(a):
    return np.asarray(a)[:, None, None]


def functional_ledger(flow_state: FlowState, shifts, profiles: Sequence[ShockProfile], spec: WeightSpec,
                      params: FluidParams, rates=(0.0, 0.0)) -> FunctionalLedger:
    grid = flow_state.grid
    check_resolution(profiles, grid.dx1)
    t = flow_state.t
    x = grid.x1_lab(t)
    dx = grid.dx1
    w = wave_fields(profiles, spec, t, x, shifts)
    far = profiles[0].far_field._replace(v_plus=profiles[1].v_right, u_plus=profiles[1].u_right)
    v, u = flow_state.v, flow_state.u

    dv = v - _planar(w.v)
    du = u.copy()
    du[0] -= _planar(w.u)
    dp = params.pressure(v) - _planar(params.pressure(w.v))

    # h - h~ with the wave's effective velocity built from the same stencil
    d_dv = gradient(dv, grid)
    dh = du.copy()
    for k, g in zip(_axes(grid), d_dv):
        dh[k] -= params.eff_visc * g
    h = effective_velocity(flow_state, params, far)

    a = _planar(w.a)
    rho = 1.0 / v
    E = axial_trapezoid(a * rho * (relative_Q(v, _planar(w.v), params) + 0.5 * np.sum(dh**2, axis=0)), dx)

    phi1, phi2 = cutoffs(t, x, profiles[0].sigma, profiles[1].sigma)
    gs_p = gs_v = g1 = g3 = 0.0
    for k, (prof, phi) in enumerate(zip(profiles, (phi1, phi2))):
        vs = _planar(np.abs(w.v_slope[k]))
        gs_v += axial_trapezoid(vs * (_planar(phi) * dv) ** 2, dx)
        gs_p += axial_trapezoid(vs * (_planar(phi) * dp) ** 2, dx)
        ai = _planar(np.abs(w.a_i_slope[k]))
        g1 += axial_trapezoid(ai * (dh[0] - dp / prof.sigma_star) ** 2, dx)
        g3 += axial_trapezoid(ai * (h[1] ** 2 + h[2] ** 2), dx)

    D = sum(axial_trapezoid(g**2, dx) for g in gradient(dp, grid))
    Dk = []
    for order in (1, 2, 3):
        Dk.append(sum(axial_trapezoid(g**2, dx) for comp in du for g in _derivative_tensor(comp, grid, order)))

    s1, s2 = np.abs(w.v_slope[0]), np.abs(w.v_slope[1])
    inter = axial_trapezoid(s1 * s2, dx)
    tail = axial_trapezoid(phi2 * s1, dx)
    return FunctionalLedger(
        t=t, E_weighted=E, G_S_p=gs_p, G_S_v=gs_v, D=D, D1=Dk[0], D2=Dk[1], D3=Dk[2], G1=g1, G3=g3,
        interaction_12=inter, sup_v_dev=float(np.max(np.abs(dv))), sup_u_dev=float(np.max(np.abs(du))),
        X1=float(shifts[0]), X2=float(shifts[1]), Xdot1=float(rates[0]), Xdot2=float(rates[1]),
        phi2_tail=tail,
    )


def write_ledger_csv(rows: Sequence[FunctionalLedger], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LEDGER_COLUMNS)
        for r in rows:
            w.writerow([repr(float(x)) for x in astuple(r)])


def read_ledger_csv(path) -> list[FunctionalLedger]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [FunctionalLedger(**{k: float(row[k]) for k in LEDGER_COLUMNS}) for row in reader]


# -- functional inequalities ------------------------------------------------


def poincare_grid(n_y: int, n2: int, n3: int):
    """Gauss-Legendre nodes/weights on (0, 1) and uniform periodic transverse nodes."""
    x, wts = legendre.leggauss(n_y)
    return 0.5 * (x + 1.0), 0.5 * wts, np.arange(n2) / n2, np.arange(n3) / n3


@dataclass(frozen=True)
class PoincareResult:
    lhs: float
    rhs: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.slack >= -1e-10 * (1.0 + self.rhs)


def _spectral_derivative(f, axis):
    n = f.shape[axis]
    k = np.fft.fftfreq(n, d=1.0 / n)
    shape = [1, 1, 1]
    shape[axis] = n
    ik = (2j * np.pi * k).reshape(shape)
    if n % 2 == 0:
        ik = np.where(np.abs(k.reshape(shape)) == n // 2, 0.0, ik)
    return np.real(np.fft.ifft(ik * np.fft.fft(f, axis=axis), axis=axis))


def poincare_check(f_samples, singular_tol: float = 1e-10) -> PoincareResult:
    """Both sides of the weighted Poincare inequality on ``[0, 1] x T^2``.

    ``f_samples`` has shape ``(n_y, n2, n3)`` on the nodes of
    :func:`poincare_grid`.  The ``y``-derivative comes from the Legendre
    interpolant through the Gauss nodes and transverse derivatives are
    spectral, so polynomial-times-trigonometric probes are integrated exactly
    once the node counts exceed their degrees.
    """
    f = np.asarray(f_samples, dtype=float)
    if f.ndim == 1:
        f = f[:, None, None]
    n_y, n2, n3 = f.shape
    y, wy, _, _ = poincare_grid(n_y, n2, n3)
    s = 2.0 * y - 1.0

    coef = legendre.legfit(s, f.reshape(n_y, -1), n_y - 1)
    fy = 2.0 * legendre.legval(s, legendre.legder(coef)).T.reshape(f.shape)

    transverse = np.zeros_like(f)
    ends = 0.0
    for axis, n in ((1, n2), (2, n3)):
        if n > 1:
            g = _spectral_derivative(f, axis)
            transverse += g**2
            gc = legendre.legfit(s, g.reshape(n_y, -1), n_y - 1)
            ends = max(ends, float(np.max(np.abs(legendre.legval(np.array([-1.0, 1.0]), gc)))))
    scale = 1.0 + float(np.max(np.abs(f)))
    if ends > singular_tol * scale:
        raise WeightSingularity(f"transverse gradient {ends:.3e} at y in {{0, 1}}: weighted integral diverges")

    def integrate(g):
        return fixed_sum(wy[:, None, None] * g) / (n2 * n3)

    mean = integrate(f)
    lhs = integrate((f - mean) ** 2)
    yy = y[:, None, None]
    rhs = 0.5 * integrate(yy * (1.0 - yy) * fy**2) + integrate(transverse / (yy * (1.0 - yy))) / (16.0 * math.pi**2)
    return PoincareResult(lhs, rhs, rhs - lhs)


def profile_coordinate(x1, t: float, shift: float, profile: ShockProfile, eps: float = 1e-15):
    """Pressure-based coordinate in ``(0, 1)`` that increases through the layer."""
    xi = np.asarray(x1, dtype=float) - profile.sigma * t - shift
    p_mid = float(profile.params.pressure(profile.v_mid_state))
    frac = (p_mid - profile.params.pressure(profile.value(xi))) / profile.delta
    y = 1.0 - frac if profile.family == 1 else frac
    return np.clip(y, eps, 1.0 - eps)


def interpolation_probe(g_field, grid: Grid) -> float:
    """Ratio of the sup norm to the right side of the L-infinity interpolation bound."""
    g = np.asarray(g_field, dtype=float)
    if g.ndim == 1:
        g = g[:, None, None]
    sup = float(np.max(np.abs(g)))
    if sup == 0.0:
        raise NotApplicable("interpolation probe of the zero field")
    dx = grid.dx1

    def norm(parts):
        return math.sqrt(sum(axial_trapezoid(p**2, dx) for p in parts))

    first = math.sqrt(norm([g]) * norm([_d_axis(g, 0, grid)]))
    second = math.sqrt(norm(_derivative_tensor(g, grid, 1)) * norm(_derivative_tensor(g, grid, 2)))
    return sup / (first + second)


# -- convergence metrics -------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    times: np.ndarray
    sup_v_dev: np.ndarray
    sup_u_dev: np.ndarray
    shift_ratio: np.ndarray  # shape (n, 2): X_i(t)/t, nan at t = 0
    terminal_rate: tuple
    max_rate: tuple
    E_initial: float
    E_final: float
    decay_fraction: float
    sup_ratio: float


def convergence_metrics(rows: Sequence[FunctionalLedger], transient: float = 1.0,
                        rise_tol: float = 1e-6) -> ConvergenceReport:
    """Long-time behaviour of a run from its functional ledger.

    ``decay_fraction`` is the share of logged intervals after ``transient``
    on which the finite-difference ``dE/dt`` stays below ``rise_tol``.
    """
    t = np.array([r.t for r in rows])
    E = np.array([r.E_weighted for r in rows])
    X = np.array([[r.X1, r.X2] for r in rows])
    Xd = np.array([[r.Xdot1, r.Xdot2] for r in rows])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(t[:, None] > 0, X / t[:, None], np.nan)
    dt = np.diff(t)
    dEdt = np.diff(E) / np.where(dt > 0, dt, np.inf)
    late = t[1:] > transient
    frac = float(np.mean(dEdt[late] <= rise_tol)) if np.any(late) else 1.0
    sup_v = np.array([r.sup_v_dev for r in rows])
    return ConvergenceReport(
        times=t, sup_v_dev=sup_v, sup_u_dev=np.array([r.sup_u_dev for r in rows]), shift_ratio=ratio,
        terminal_rate=tuple(np.abs(Xd[-1])), max_rate=tuple(np.max(np.abs(Xd), axis=0)),
        E_initial=float(E[0]), E_final=float(E[-1]), decay_fraction=frac,
        sup_ratio=float(sup_v[-1] / sup_v[0]) if sup_v[0] > 0 else 0.0,
    )


def loglinear_decay(t, y, t_min: float = 1.0, t_max: float | None = None):
    """Least-squares fit of ``log y = a + b t`` over a window; returns ``(b, r2)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (t >= t_min) & (y > 0)
    if t_max is not None:
        mask &= t <= t_max
    if np.count_nonzero(mask) < 3:
        raise NotApplicable("too few positive samples for a decay fit")
    tt, ly = t[mask], np.log(y[mask])
    b, a = np.polyfit(tt, ly, 1)
    resid = ly - (a + b * tt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(b), r2

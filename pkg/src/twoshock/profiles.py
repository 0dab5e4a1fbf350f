"""Rankine-Hugoniot algebra, viscous shock profiles and composite waves.

Everything here works in specific volume ``v = 1/rho`` with the gamma-law
pressure ``p(v) = b * v**(-gamma)``.  A viscous shock of family ``i`` solves
the once-integrated traveling-wave ODE

    -(2mu + lambda) * s * v' = s**2 (v - v_left) + p(v) - p(v_left),

with ``s`` the Lagrangian-type speed; the velocity follows algebraically from
``u - u_left = -s (v - v_left)``.

Profiles are stored through their logarithmic deviation from the nearest end
state, ``q = log|v - v_end|``, on each half line.  That keeps ``v'`` accurate
deep into the exponential tails (down to ~1e-300 rather than ~1e-16), which
the tail fits and the shock interaction diagnostics rely on.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    DegenerateShock,
    DomainTooShort,
    InvalidParameters,
    NonHyperbolic,
    NoTwoShockConnection,
    StiffnessFailure,
    UnresolvedDerivatives,
)

RH_TOL = 1e-12
ENDPOINT_TOL = 1e-8


@dataclass(frozen=True)
class FluidParams:
    gamma: float = 2.0
    pressure_coeff: float = 1.0
    mu: float = 0.1
    lambda_visc: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise InvalidParameters(f"gamma must exceed 1, got {self.gamma}")
        if not self.pressure_coeff > 0.0:
            raise InvalidParameters("pressure coefficient must be positive")
        if not self.mu > 0.0:
            raise InvalidParameters(f"mu must be positive, got {self.mu}")
        if 2.0 * self.mu + 3.0 * self.lambda_visc < 0.0:
            raise InvalidParameters("viscosities violate 2*mu + 3*lambda >= 0")

    @property
    def eff_visc(self) -> float:
        return 2.0 * self.mu + self.lambda_visc

    def pressure(self, v):
        return self.pressure_coeff * np.power(v, -self.gamma)

    def dpressure(self, v):
        return -self.gamma * self.pressure_coeff * np.power(v, -self.gamma - 1.0)

    def d2pressure(self, v):
        g = self.gamma
        return g * (g + 1.0) * self.pressure_coeff * np.power(v, -g - 2.0)

    def pressure_increment(self, base, dv):
        """``p(base + dv) - p(base)`` without cancellation for tiny ``dv``."""
        base = np.asarray(base, dtype=float)
        return self.pressure(base) * np.expm1(-self.gamma * np.log1p(dv / base))

    def sound_speed(self, v):
        """Eulerian sound speed ``sqrt(dp/drho) = v * sqrt(-p'(v))``."""
        return v * np.sqrt(-self.dpressure(v))


class FarField(NamedTuple):
    """Far-field states seen by the flow solver (axial ghost cells and sponge)."""

    v_minus: float
    u_minus: float
    v_plus: float
    u_plus: float


@dataclass(frozen=True)
class RiemannConfig:
    v_minus: float
    u_minus: float
    v_mid: float
    u_mid: float
    v_plus: float
    u_plus: float
    params: FluidParams = field(default_factory=FluidParams)
    rh_tol: float = 1e-10

    def __post_init__(self):
        if not (self.v_minus > 0 and self.v_mid > 0 and self.v_plus > 0):
            raise InvalidParameters("specific volumes must be positive")
        if not self.v_minus > self.v_mid:
            raise NoTwoShockConnection("1-shock ordering violated: need v_minus > v_mid")
        if not self.v_mid < self.v_plus:
            raise NoTwoShockConnection("2-shock ordering violated: need v_mid < v_plus")
        if not self.u_minus > self.u_mid:
            raise NoTwoShockConnection("1-shock ordering violated: need u_minus > u_mid")
        if not self.u_mid > self.u_plus:
            raise NoTwoShockConnection("2-shock ordering violated: need u_mid > u_plus")
        worst = float(np.max(np.abs(self.rh_residuals())))
        if worst > self.rh_tol:
            raise NoTwoShockConnection(f"Rankine-Hugoniot residual {worst:.3e} exceeds {self.rh_tol:.1e}")

    @property
    def delta1(self) -> float:
        p = self.params.pressure
        return float(abs(p(self.v_minus) - p(self.v_mid)))

    @property
    def delta2(self) -> float:
        p = self.params.pressure
        return float(abs(p(self.v_mid) - p(self.v_plus)))

    @property
    def far_field(self) -> FarField:
        return FarField(self.v_minus, self.u_minus, self.v_plus, self.u_plus)

    def speeds(self, family: int) -> tuple[float, float]:
        if family == 1:
            return shock_speeds(self.v_minus, self.v_mid, 1, (1.0 / self.v_minus, self.u_minus), self.params)
        if family == 2:
            return shock_speeds(self.v_mid, self.v_plus, 2, (1.0 / self.v_mid, self.u_mid), self.params)
        raise ValueError("family must be 1 or 2")

    def rh_residuals(self) -> np.ndarray:
        """The four jump-condition residuals (two per shock)."""
        p = self.params.pressure
        s1 = _sigma_star(self.v_minus, self.v_mid, 1, self.params)
        s2 = _sigma_star(self.v_mid, self.v_plus, 2, self.params)
        return np.array([
            -s1 * (self.v_mid - self.v_minus) - (self.u_mid - self.u_minus),
            -s1 * (self.u_mid - self.u_minus) + p(self.v_mid) - p(self.v_minus),
            -s2 * (self.v_plus - self.v_mid) - (self.u_plus - self.u_mid),
            -s2 * (self.u_plus - self.u_mid) + p(self.v_plus) - p(self.v_mid),
        ])


def _sigma_star(v_left, v_right, family, params):
    if v_left <= 0 or v_right <= 0:
        raise InvalidParameters("specific volumes must be positive")
    if v_left == v_right:
        raise NonHyperbolic("equal states carry no shock")
    p = params.pressure
    radicand = -(p(v_right) - p(v_left)) / (v_right - v_left)
    if not radicand > 0:
        raise NonHyperbolic(f"non-positive wave-speed radicand {radicand}")
    s = math.sqrt(radicand)
    return -s if family == 1 else s


def shock_speeds(v_left, v_right, family, reference_state, params=None):
    """Return ``(sigma_star, sigma)`` for a shock joining ``v_left`` to ``v_right``.

    ``reference_state`` is ``(rho, u)`` of the state on the left of the shock;
    the Eulerian speed follows from ``sigma_star = rho * (sigma - u)``.
    """
    if family not in (1, 2):
        raise ValueError("family must be 1 or 2")
    params = params or FluidParams()
    s_star = _sigma_star(float(v_left), float(v_right), family, params)
    rho_ref, u_ref = reference_state
    return s_star, s_star / rho_ref + u_ref


def solve_intermediate_state(v_minus, u_minus, v_plus, u_plus, params=None) -> RiemannConfig:
    """Close the two-shock Riemann problem for the intermediate state.

    Along the 1-shock curve from the left state and the 2-shock curve into the
    right state, ``u_minus - u_plus = phi1(v_m) + phi2(v_m)`` with
    ``phi_k(v) = sqrt((p(v) - p(v_k)) (v_k - v))``; the right side is
    strictly decreasing on ``0 < v_m < min(v_minus, v_plus)``.
    """
    params = params or FluidParams()
    p = params.pressure
    if v_minus <= 0 or v_plus <= 0:
        raise InvalidParameters("specific volumes must be positive")
    jump = u_minus - u_plus

    def phi(v, vk):
        return math.sqrt(max((p(v) - p(vk)) * (vk - v), 0.0))

    def g(v):
        return phi(v, v_minus) + phi(v, v_plus) - jump

    hi = min(v_minus, v_plus)
    if not g(hi) < 0:
        raise NoTwoShockConnection(
            "velocity ordering u_minus > u_mid > u_plus unattainable: "
            f"u_minus - u_plus = {jump:.6g} must exceed {phi(hi, max(v_minus, v_plus)):.6g}"
        )
    lo = 0.5 * hi
    while g(lo) <= 0:
        lo *= 0.5
        if lo < 1e-12 * hi:
            raise NoTwoShockConnection("failed to bracket v_mid above zero")
    v_mid = brentq(g, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    u_mid = u_minus - phi(v_mid, v_minus)
    return RiemannConfig(v_minus, u_minus, v_mid, u_mid, v_plus, u_plus, params, rh_tol=RH_TOL)


def _hermite(x, y, dy):
    """Monotone cubic through (x, y) with exact slopes where they pass Fritsch-Carlson."""
    secant = np.diff(y) / np.diff(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = dy[:-1] / secant
        beta = dy[1:] / secant
    ok = np.all(np.isfinite(alpha) & np.isfinite(beta) & (alpha >= 0) & (beta >= 0)
                & (alpha**2 + beta**2 <= 9.0))
    if ok:
        return CubicHermiteSpline(x, y, dy)
    return PchipInterpolator(x, y)


@dataclass(frozen=True, eq=False)
class ShockProfile:
    family: int
    sigma_star: float
    sigma: float
    xi_grid: np.ndarray
    v_tab: np.ndarray
    u_tab: np.ndarray
    h_tab: np.ndarray
    dv_tab: np.ndarray
    delta: float
    endpoints: tuple  # ((v_left, u_left), (v_right, u_right))
    params: FluidParams
    _left: object = field(repr=False, default=None)
    _right: object = field(repr=False, default=None)

    @property
    def v_left(self):
        return self.endpoints[0][0]

    @property
    def v_right(self):
        return self.endpoints[1][0]

    @property
    def u_left(self):
        return self.endpoints[0][1]

    @property
    def u_right(self):
        return self.endpoints[1][1]

    @property
    def v_mid_state(self) -> float:
        """The intermediate state shared with the other family."""
        return self.v_right if self.family == 1 else self.v_left

    @property
    def far_field(self) -> FarField:
        return FarField(self.v_left, self.u_left, self.v_right, self.u_right)

    @property
    def halfwidth(self) -> float:
        return float(self.xi_grid[-1])

    def deviation(self, xi):
        """Signed ``v - v_end`` against the end state on the same side of 0."""
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        left = xi < 0
        for mask, side in ((left, self._left), (~left, self._right)):
            if np.any(mask):
                out[mask] = side.deviation(xi[mask])
        return out

    def _ends(self, xi):
        return np.where(np.asarray(xi) < 0, self.v_left, self.v_right)

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self._ends(xi) + self.deviation(xi)

    def slope(self, xi):
        """``dv/dxi``, accurate in the exponential tails."""
        xi = np.asarray(xi, dtype=float)
        return self._rhs_dev(self._ends(xi), self.deviation(xi))

    def velocity(self, xi):
        return self.u_left - self.sigma_star * (self.value(xi) - self.v_left)

    def effective_velocity(self, xi):
        return self.velocity(xi) - self.params.eff_visc * self.slope(xi)

    def pressure_slope(self, xi):
        """``d p(v)/dxi``."""
        return self.params.dpressure(self.value(xi)) * self.slope(xi)

    def evaluate(self, xi):
        v = self.value(xi)
        dv = self._rhs_dev(self._ends(xi), self.deviation(xi))
        u = self.u_left - self.sigma_star * (v - self.v_left)
        return v, u, u - self.params.eff_visc * dv

    def _rhs_dev(self, v_end, d):
        return _profile_rhs(d, v_end, self.sigma_star, self.params)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# family={self.family},sigma={self.sigma!r},sigma_star={self.sigma_star!r},delta={self.delta!r}\n")
            w = csv.writer(fh)
            w.writerow(["xi", "v", "u", "h", "dv_dxi"])
            for row in zip(self.xi_grid, self.v_tab, self.u_tab, self.h_tab, self.dv_tab):
                w.writerow([repr(float(x)) for x in row])


def _profile_rhs(d, v_end, sigma_star, params):
    """Traveling-wave ODE right side written against the end state ``v_end``.

    Valid at either end state because both are equilibria; the end-state
    relative form avoids cancellation when ``d`` is tiny.
    """
    dp = params.pressure_increment(v_end, d)
    return -(sigma_star**2 * d + dp) / (params.eff_visc * sigma_star)


class _HalfLine:
    """Log-deviation interpolant of one half of a profile."""

    def __init__(self, xi, q, dq, sign, v_end):
        self.sign = sign
        self.v_end = v_end
        self.lo, self.hi = xi[0], xi[-1]
        self.spline = _hermite(xi, q, dq)
        self.q_lo, self.dq_lo = q[0], dq[0]
        self.q_hi, self.dq_hi = q[-1], dq[-1]

    def log_dev(self, xi):
        xi = np.asarray(xi, dtype=float)
        q = np.empty_like(xi)
        below, above = xi < self.lo, xi > self.hi
        inside = ~(below | above)
        q[inside] = self.spline(xi[inside])
        # beyond the table the orbit is linear to O(|d|) ~ 1e-26: continue exactly
        q[below] = self.q_lo + self.dq_lo * (xi[below] - self.lo)
        q[above] = self.q_hi + self.dq_hi * (xi[above] - self.hi)
        return q

    def deviation(self, xi):
        return self.sign * np.exp(self.log_dev(xi))


def _integrate_half(sign, v_end, d0, sigma_star, params, xi_end, nodes):
    def rate(_, q):
        d = sign * math.exp(q[0])
        return [_profile_rhs(d, v_end, sigma_star, params) / d]

    q0 = math.log(abs(d0))
    sol = solve_ivp(rate, (0.0, xi_end), [q0], method="DOP853", rtol=1e-13, atol=1e-13,
                    dense_output=True)
    if not sol.success:
        raise StiffnessFailure(f"profile integration failed: {sol.message}")
    q = sol.sol(nodes)[0]
    d = sign * np.exp(q)
    dq = _profile_rhs(d, v_end, sigma_star, params) / d
    return q, dq


def _tail_rates(sigma_star, v_left, v_right, params):
    """Linearised decay rates of ``v - v_end`` at the two end states."""
    mu = params.eff_visc
    rl = abs((sigma_star**2 + params.dpressure(v_left)) / (mu * sigma_star))
    rr = abs((sigma_star**2 + params.dpressure(v_right)) / (mu * sigma_star))
    return rl, rr


def solve_profile(family, config: RiemannConfig, params: FluidParams | None = None,
                  domain_halfwidth: float | None = None, n_points: int = 8001) -> ShockProfile:
    """Tabulate the viscous shock of the given family for ``config``.

    With ``domain_halfwidth=None`` a pilot profile is built first and the
    halfwidth is set to 60 e-folding lengths of its slowest fitted tail.
    """
    params = params or config.params
    if family == 1:
        (vl, ul), (vr, ur) = (config.v_minus, config.u_minus), (config.v_mid, config.u_mid)
    elif family == 2:
        (vl, ul), (vr, ur) = (config.v_mid, config.u_mid), (config.v_plus, config.u_plus)
    else:
        raise ValueError("family must be 1 or 2")
    return _build_profile(family, vl, ul, vr, ur, params, domain_halfwidth, n_points)


def profile_between(family, left, right, params, domain_halfwidth=None, n_points=8001) -> ShockProfile:
    """Single-shock variant of :func:`solve_profile` from explicit end states."""
    (vl, ul), (vr, ur) = left, right
    return _build_profile(family, vl, ul, vr, ur, params, domain_halfwidth, n_points)


def _build_profile(family, vl, ul, vr, ur, params, halfwidth, n_points):
    p = params.pressure
    delta = float(abs(p(vl) - p(vr)))
    if delta < 1e-10 * float(p(vl)) or vl == vr:
        raise DegenerateShock("zero-strength shock has no heteroclinic orbit")
    rho_l = 1.0 / vl
    sigma_star, sigma = shock_speeds(vl, vr, family, (rho_l, ul), params)
    if halfwidth is None:
        rl, rr = _tail_rates(sigma_star, vl, vr, params)
        pilot = _build_profile(family, vl, ul, vr, ur, params, 40.0 / min(rl, rr), 2001)
        report = certify_tail_bounds(pilot)
        halfwidth = 60.0 / min(report.rate_left, report.rate_right)
    if n_points % 2 == 0:
        n_points += 1
    xi = np.linspace(-halfwidth, halfwidth, n_points)
    mid = n_points // 2
    xi[mid] = 0.0
    v_half = 0.5 * (vl + vr)

    sgn_left = 1.0 if v_half > vl else -1.0
    sgn_right = 1.0 if v_half > vr else -1.0
    xl = xi[: mid + 1][::-1]  # 0 -> -L
    xr = xi[mid:]
    ql, dql = _integrate_half(sgn_left, vl, v_half - vl, sigma_star, params, -halfwidth, xl)
    qr, dqr = _integrate_half(sgn_right, vr, v_half - vr, sigma_star, params, halfwidth, xr)
    left = _HalfLine(xl[::-1], ql[::-1], dql[::-1], sgn_left, vl)
    right = _HalfLine(xr, qr, dqr, sgn_right, vr)

    d = np.concatenate([left.sign * np.exp(ql[::-1][:-1]), right.sign * np.exp(qr)])
    ends = np.where(xi < 0, vl, vr)
    v = ends + d
    v[mid] = v_half
    dv = _profile_rhs(d, ends, sigma_star, params)
    u = ul - sigma_star * (v - vl)
    h = u - params.eff_visc * dv

    end_dev = max(abs(v[0] - vl), abs(v[-1] - vr))
    if end_dev >= ENDPOINT_TOL:
        rl, rr = _tail_rates(sigma_star, vl, vr, params)
        raise DomainTooShort(
            f"end-state deviation {end_dev:.2e} at |xi|={halfwidth:.3g}; "
            f"try halfwidth >= {25.0 / min(rl, rr):.3g}"
        )
    if family == 1 and not np.all(dv < 0) or family == 2 and not np.all(dv > 0):
        raise StiffnessFailure("tabulated profile lost monotonicity")
    for arr in (xi, v, u, h, dv):
        arr.setflags(write=False)
    return ShockProfile(family, sigma_star, sigma, xi, v, u, h, dv, delta,
                        ((vl, ul), (vr, ur)), params, left, right)


@dataclass(frozen=True)
class TailReport:
    c_ratio: float
    rate_left: float
    rate_right: float
    rate_over_delta_left: float
    rate_over_delta_right: float
    sup_d2_ratio: float
    sup_d3_ratio: float
    peak_xi: float
    monotone_decay: bool
    spacing: float


def _loglinear_fit(x, y):
    """Least-squares line through (x, log y); returns (slope, intercept, r2)."""
    ly = np.log(y)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * x + icpt)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), float(r2)


def certify_tail_bounds(profile: ShockProfile) -> TailReport:
    """Measure the constants of the standard viscous-shock estimates.

    Higher derivatives come from centred differences of the tabulated slope,
    so the report certifies the tabulated object rather than the formula.
    """
    xi = np.asarray(profile.xi_grid)
    h = float(xi[1] - xi[0])
    dv = np.asarray(profile.dv_tab)
    params = profile.params
    delta = profile.delta

    fprime = np.abs((profile.sigma_star**2 + params.dpressure(profile.v_tab))
                    / (params.eff_visc * profile.sigma_star))
    c_est_delta = float(fprime.max())
    if h > 0.1 / c_est_delta:
        raise UnresolvedDerivatives(
            f"grid spacing {h:.3g} exceeds 0.1/(C*delta) = {0.1 / c_est_delta:.3g}")

    absdv = np.abs(dv)
    # velocity/volume comparability from differences of the tabulated fields;
    # restrict to where the differences are above round-off of the fields
    dv_fd = np.gradient(np.asarray(profile.v_tab), h, edge_order=2)
    du_fd = np.gradient(np.asarray(profile.u_tab), h, edge_order=2)
    resolved = absdv > 1e-6 * absdv.max()
    r = np.abs(du_fd[resolved]) / np.abs(dv_fd[resolved])
    c_ratio = float(max(r.max(), (1.0 / r).max()))

    n = len(xi)
    q = n // 4
    rate_left, _, _ = _loglinear_fit(xi[:q], absdv[:q])
    rate_right, _, _ = _loglinear_fit(xi[-q:], absdv[-q:])
    rate_right = -rate_right

    d2 = np.gradient(dv, h, edge_order=2)
    d3 = np.gradient(d2, h, edge_order=2)
    core = slice(2, n - 2)
    sup_d2 = float(np.max(np.abs(d2[core]) / (delta * absdv[core])))
    sup_d3 = float(np.max(np.abs(d3[core]) / (delta**2 * absdv[core])))

    k = int(np.argmax(absdv))
    monotone = bool(np.all(np.diff(absdv[: k + 1]) > 0) and np.all(np.diff(absdv[k:]) < 0))
    return TailReport(c_ratio, rate_left, rate_right, rate_left / delta, rate_right / delta,
                      sup_d2, sup_d3, float(xi[k]), monotone, h)


def composite_wave(profile1: ShockProfile, profile2: ShockProfile, shifts: Sequence[float], t: float,
                   x1_grid):
    """Superpose the two shifted, translated profiles minus the middle state."""
    x = np.asarray(x1_grid, dtype=float)
    X1, X2 = shifts
    v1, u1, h1 = profile1.evaluate(x - profile1.sigma * t - X1)
    v2, u2, h2 = profile2.evaluate(x - profile2.sigma * t - X2)
    vm, um = profile1.v_right, profile1.u_right
    return v1 + v2 - vm, u1 + u2 - um, h1 + h2 - um


def with_speed(profile: ShockProfile, sigma: float) -> ShockProfile:
    """Copy of ``profile`` travelling at an overridden Eulerian speed."""
    return dataclasses.replace(profile, sigma=sigma)

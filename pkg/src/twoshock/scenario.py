"""Scenario orchestration: build waves, run with the shift hook, judge the run.

Each check is a plain dict with ``name``, ``anchor`` (what property is being
tested), ``value``, ``threshold`` and ``pass``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import Scenario
from .diagnostics import (
    FunctionalLedger,
    convergence_metrics,
    functional_ledger,
    loglinear_decay,
    poincare_check,
    poincare_grid,
    relative_pressure,
    relative_Q,
)
from .errors import NotApplicable, SeparationViolation
from .profiles import (
    FluidParams,
    RiemannConfig,
    ShockProfile,
    certify_tail_bounds,
    composite_wave,
    profile_between,
    shock_speeds,
    solve_intermediate_state,
    solve_profile,
)
from .quadrature import fixed_sum
from .shifts import (
    ShiftEngine,
    WeightSpec,
    cutoffs,
    shift_constants,
    weight_composed,
    weight_single,
    weight_single_slope,
)
from .solver import Bump, Grid, RunSpec, Sponge, make_initial_data, run


def check(name, anchor, value, threshold, passed) -> dict:
    def clean(x):
        if isinstance(x, (list, tuple)):
            return [clean(y) for y in x]
        if x is None or isinstance(x, (bool, str)):
            return x
        x = float(x)
        return x if math.isfinite(x) else None

    return {"name": name, "anchor": anchor, "value": clean(value), "threshold": clean(threshold),
            "pass": bool(passed)}


# -- construction -------------------------------------------------------------


def build_riemann(sc: Scenario) -> RiemannConfig:
    r = sc.riemann
    if "v_mid" in r:
        return RiemannConfig(r["v_minus"], r["u_minus"], r["v_mid"], r["u_mid"], r["v_plus"], r["u_plus"],
                             sc.fluid)
    return solve_intermediate_state(r["v_minus"], r["u_minus"], r["v_plus"], r["u_plus"], sc.fluid)


def build_profiles(config: RiemannConfig):
    return solve_profile(1, config), solve_profile(2, config)


def build_weights(sc: Scenario, config: RiemannConfig) -> WeightSpec:
    w = sc.weights
    default = WeightSpec.default(config.delta1, config.delta2)
    return WeightSpec(w.get("nu1", default.nu1), w.get("nu2", default.nu2))


def build_grid(sc: Scenario, profiles) -> Grid:
    g = sc.grid
    speed = 0.5 * (profiles[0].sigma + profiles[1].sigma) if g.get("moving_frame", False) else 0.0
    return Grid(g["x1_min"], g["x1_max"], g["n1"], g.get("n2", 1), g.get("n3", 1), speed)


def build_bumps(sc: Scenario) -> list:
    return [Bump(b["center"], b["width"], b["amplitude"], b.get("target", "v"), b.get("k2", 0), b.get("k3", 0))
            for _, b in sc.bumps]


@dataclass
class RunResult:
    config: RiemannConfig
    profiles: tuple
    weights: WeightSpec
    engine: ShiftEngine
    ledger: list
    trajectory: object
    norms: object
    warnings: list


def simulate(sc: Scenario, m_factor: float | None = None) -> RunResult:
    config = build_riemann(sc)
    profiles = build_profiles(config)
    weights = build_weights(sc, config)
    grid = build_grid(sc, profiles)
    v0, u0, _ = composite_wave(profiles[0], profiles[1], (0.0, 0.0), 0.0, grid.x1)
    state, norms = make_initial_data((v0, u0), build_bumps(sc), grid)
    constants = shift_constants(config.v_mid, sc.fluid, m_factor if m_factor is not None else sc.m_factor)
    engine = ShiftEngine(profiles, weights, sc.fluid, constants)
    ledger: list[FunctionalLedger] = []
    engine.observers.append(lambda st, ss: ledger.append(
        functional_ledger(st, (ss.X1, ss.X2), profiles, weights, sc.fluid, (ss.Xdot1, ss.Xdot2))))
    r = sc.run
    spec = RunSpec(state, sc.fluid, config.far_field, r["t_end"], r.get("cadence", 0.0),
                   r.get("cfl_safety", 0.4), Sponge(r.get("sponge_fraction", 0.1), r.get("sponge_rate", 2.0)),
                   hook=engine)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SeparationViolation)
        traj = run(spec)
    msgs = [str(w.message) for w in caught if issubclass(w.category, SeparationViolation)]
    return RunResult(config, profiles, weights, engine, ledger, traj, norms, msgs)


# -- run checks -------------------------------------------------------------


def _fit_check(name, anchor, t, y, t_min, r2_min):
    try:
        slope, r2 = loglinear_decay(t, y, t_min)
    except NotApplicable:
        return check(name, anchor, None, r2_min, False)
    return check(name, anchor, [slope, r2], [0.0, r2_min], slope < 0 and r2 >= r2_min)


def evaluate_run(ledger: Sequence[FunctionalLedger], shift_rows, sigma1: float, sigma2: float,
                 thresholds: dict) -> list:
    """Pass/fail judgement of a finished run from its two logs."""
    rows = np.asarray(shift_rows, dtype=float)
    t = rows[:, 0]
    X = rows[:, 1:3]
    Xd = rows[:, 3:5]
    gap = sigma2 - sigma1
    checks = []

    max_rate = float(np.max(np.abs(Xd)))
    checks.append(check("shift_rate_bound", "shift speed below (sigma2 - sigma1)/8", max_rate, gap / 8.0,
                        max_rate <= gap / 8.0))
    margin = float(np.min(rows[:, 5:7]))
    checks.append(check("shift_separation", "shifted waves stay inside their cutoff zones", margin, 0.0,
                        margin >= -1e-12))
    excess = float(np.max(np.abs(X) - gap * t[:, None] / 4.0))
    checks.append(check("shift_sublinear", "|X_i(t)| <= (sigma2 - sigma1) t / 4", excess, 0.0, excess <= 1e-12))

    if thresholds["suite"] == "null":
        sup_x = float(np.max(np.abs(X)))
        checks.append(check("null_shift", "zero perturbation keeps both shifts at zero", sup_x,
                            thresholds["null_shift_tol"], sup_x <= thresholds["null_shift_tol"]))
        for key in ("G1", "G3", "G_S_p", "G_S_v"):
            worst = max(getattr(r, key) for r in ledger)
            checks.append(check(f"null_{key}", "good terms vanish without a perturbation", worst,
                                thresholds["null_functional_tol"], worst < thresholds["null_functional_tol"]))
        floor = max(max(r.sup_v_dev, r.sup_u_dev) for r in ledger)
        checks.append(check("null_deviation_floor", "deviation from the moving composite stays at the floor",
                            floor, thresholds["null_deviation_floor"], floor <= thresholds["null_deviation_floor"]))
        return checks

    rep = convergence_metrics(ledger, thresholds["transient"], thresholds["energy_rise_tol"])
    checks.append(check("entropy_decrease", "weighted relative entropy E(T) < E(0)",
                        [rep.E_final, rep.E_initial], None, rep.E_final < rep.E_initial))
    checks.append(check("entropy_monotone", "dE/dt <= tolerance after the transient", rep.decay_fraction,
                        thresholds["energy_decay_fraction"], rep.decay_fraction >= thresholds["energy_decay_fraction"]))
    checks.append(check("sup_deviation_halved", "terminal sup deviation vs initial", rep.sup_ratio,
                        thresholds["sup_ratio_max"], rep.sup_ratio <= thresholds["sup_ratio_max"]))
    frac = [abs(Xd[-1, i]) / float(np.max(np.abs(Xd[:, i]))) if np.max(np.abs(Xd[:, i])) > 0 else 0.0
            for i in range(2)]
    checks.append(check("terminal_shift_rate", "terminal |dX_i/dt| relative to its running maximum", frac,
                        thresholds["terminal_rate_fraction"], max(frac) <= thresholds["terminal_rate_fraction"]))
    lt = [r.t for r in ledger]
    checks.append(_fit_check("interaction_decay", "wave interaction integral decays exponentially", lt,
                             [r.interaction_12 for r in ledger], thresholds["fit_t_min"], thresholds["fit_r2_min"]))
    checks.append(_fit_check("cutoff_tail_decay", "1-wave slope seen by the 2-wave cutoff decays exponentially",
                             lt, [r.phi2_tail for r in ledger], thresholds["fit_t_min"], thresholds["fit_r2_min"]))
    return checks


# -- property suite ---------------------------------------------------------


def _rh_suite(rng: np.random.Generator, n_cases: int = 40) -> list:
    failures, worst_res, worst_err = 0, 0.0, 0.0
    for _ in range(n_cases):
        params = FluidParams(gamma=float(rng.uniform(1.2, 3.0)))
        v_minus = float(rng.uniform(0.5, 2.0))
        v_mid = v_minus * float(rng.uniform(0.7, 0.99))
        v_plus = v_mid * float(rng.uniform(1.01, 1.4))
        u_minus = float(rng.uniform(-1.0, 1.0))
        s1, _ = shock_speeds(v_minus, v_mid, 1, (1.0 / v_minus, u_minus), params)
        u_mid = u_minus - s1 * (v_mid - v_minus)
        s2, _ = shock_speeds(v_mid, v_plus, 2, (1.0 / v_mid, u_mid), params)
        u_plus = u_mid - s2 * (v_plus - v_mid)
        cfg = solve_intermediate_state(v_minus, u_minus, v_plus, u_plus, params)
        res = float(np.max(np.abs(cfg.rh_residuals())))
        err = abs(cfg.v_mid - v_mid) / v_mid
        worst_res, worst_err = max(worst_res, res), max(worst_err, err)
        failures += int(res >= 1e-12 or err > 1e-9 or not cfg.speeds(1)[1] < cfg.speeds(2)[1])
    return [
        check("rh_residual", "Rankine-Hugoniot residuals of the closed Riemann data", worst_res, 1e-12,
              worst_res < 1e-12),
        check("rh_recovery", "intermediate volume recovered from outer states", worst_err, 1e-9, worst_err <= 1e-9),
        check("rh_failures", "random admissible two-shock cases", failures, 0, failures == 0),
    ]


def random_poincare_probe(rng: np.random.Generator, n_y: int = 16, n_tr: int = 8) -> np.ndarray:
    """Low-degree polynomial in y plus y(1-y)-damped trigonometric transverse modes."""
    y, _, x2, x3 = poincare_grid(n_y, n_tr, n_tr)
    Y, X2, X3 = np.meshgrid(y, x2, x3, indexing="ij")
    f = np.polynomial.polynomial.polyval(Y, rng.normal(size=int(rng.integers(1, 6))))
    for _ in range(int(rng.integers(0, 4))):
        k2, k3 = (int(k) for k in rng.integers(0, 3, size=2))
        if k2 == k3 == 0:
            k2 = 1
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        q = np.polynomial.polynomial.polyval(Y, rng.normal(size=int(rng.integers(1, 4))))
        f = f + Y * (1.0 - Y) * q * np.cos(2.0 * np.pi * (k2 * X2 + k3 * X3) + phase)
    return f


def _poincare_suite(rng: np.random.Generator, n_probes: int = 200) -> list:
    y, _, _, _ = poincare_grid(16, 1, 1)
    eq = poincare_check(y)
    eq_err = max(abs(eq.lhs - 1.0 / 12.0), abs(eq.rhs - 1.0 / 12.0))
    fails, worst = 0, math.inf
    for _ in range(n_probes):
        r = poincare_check(random_poincare_probe(rng))
        fails += int(not r.ok)
        worst = min(worst, r.slack / (1.0 + r.rhs))
    return [
        check("poincare_equality", "f(y) = y attains lhs = rhs = 1/12", eq_err, 1e-10, eq_err <= 1e-10),
        check("poincare_random", "weighted Poincare slack on random probes", worst, -1e-10, fails == 0),
        check("poincare_failures", "probes with negative slack", fails, 0, fails == 0),
    ]


def relative_constants(params: FluidParams, v_plus: float = 1.0) -> dict:
    """Closed-form Taylor constants for the quadratic relative-quantity bounds."""
    g = params.gamma
    b = params.pressure_coeff
    return {
        "Q_quadratic": 2.0 * (3.0 * v_plus) ** (g + 1.0) / (g * b),
        "p_quadratic": 2.0 * (3.0 * v_plus) ** (g + 2.0) / (g * (g + 1.0) * b),
        "p_lipschitz": g * b * (0.5 * v_plus) ** (-g - 1.0),
    }


def _pressure_box(params, v_plus, delta, n):
    """Pairs with |p(v) - p(w)| < delta and |p(w) - p(v_+)| < delta on an n x n grid."""
    p_plus = float(params.pressure(v_plus))
    s = np.linspace(-1.0, 1.0, n + 2)[1:-1] * delta
    pw = p_plus + s[:, None] + 0.0 * s[None, :]
    pv = pw + s[None, :]
    ok = pv > 0
    to_v = lambda p: (p / params.pressure_coeff) ** (-1.0 / params.gamma)
    return to_v(pv[ok]), to_v(pw[ok])


def relative_quantity_suite(params: FluidParams | None = None, v_plus: float = 1.0, n: int = 200) -> list:
    params = params or FluidParams()
    c = relative_constants(params, v_plus)
    g = params.gamma
    out = []

    # quadratic and Lipschitz bounds on a rectangular box
    v = np.linspace(0.5 * v_plus, 3.0 * v_plus, n)
    w = np.linspace(0.5 * v_plus, 2.0 * v_plus, n + 1)[:-1]
    V, W = np.meshgrid(v, w, indexing="ij")
    sq = (V - W) ** 2
    tol = 1e-13
    for key, rel in (("Q_quadratic", relative_Q(V, W, params)), ("p_quadratic", relative_pressure(V, W, params))):
        bad = int(np.count_nonzero(sq > c[key] * rel + tol))
        measured = float(np.max(np.where(sq > 0, sq / np.where(rel > 0, rel, np.inf), 0.0)))
        out.append(check(f"rel_{key}", "|v - w|^2 <= C * relative quantity", [measured, c[key]], c[key], bad == 0))
    dp = np.abs(params.pressure(V) - params.pressure(W))
    bad = int(np.count_nonzero(dp > c["p_lipschitz"] * np.sqrt(sq) + tol))
    out.append(check("rel_p_lipschitz", "|p(v) - p(w)| <= C |v - w|", c["p_lipschitz"], c["p_lipschitz"], bad == 0))

    # sharp envelopes near the end state: measure C on the widest box, apply to narrower ones
    def envelopes(delta):
        vv, ww = _pressure_box(params, v_plus, delta, n)
        pw = params.pressure(ww)
        d = params.pressure(vv) - pw
        lead_p = (g + 1.0) / (2.0 * g) / pw * d**2
        lead_q = pw ** (-1.0 / g - 1.0) / (2.0 * g) * d**2
        cubic = (1.0 + g) / (3.0 * g**2) * pw ** (-1.0 / g - 2.0) * d**3
        return relative_pressure(vv, ww, params), relative_Q(vv, ww, params), lead_p, lead_q, cubic, d**2

    wide = 0.2
    rp, rq, lp, lq, _, d2 = envelopes(wide)
    nz = d2 > 0
    c_p = float(np.max((rp[nz] - lp[nz]) / d2[nz])) / wide
    c_q = float(np.max((rq[nz] - lq[nz]) / d2[nz])) / wide
    c_p, c_q = max(c_p, 0.0), max(c_q, 0.0)
    lower_bad = upper_bad = 0
    for delta in (0.2, 0.1, 0.05, 0.01):
        rp, rq, lp, lq, cub, d2 = envelopes(delta)
        slack = 1e-14 * (1.0 + d2)
        lower_bad += int(np.count_nonzero(rq < lq - cub - slack))
        upper_bad += int(np.count_nonzero(rp > (lp + (c_p * delta) * d2) + slack))
        upper_bad += int(np.count_nonzero(rq > (lq + (c_q * delta) * d2) + slack))
    out.append(check("rel_envelope_lower", "Q(v|w) above its quadratic-minus-cubic envelope", lower_bad, 0,
                     lower_bad == 0))
    out.append(check("rel_envelope_upper", "p(v|w), Q(v|w) below quadratic envelope + C delta", [c_p, c_q], None,
                     upper_bad == 0))
    return out


def tail_suite(deltas=(0.05, 0.1, 0.2), params: FluidParams | None = None, tol: float = 0.25) -> list:
    params = params or FluidParams()
    g = params.gamma
    left, right, cr, d2 = [], [], [], []
    c_drift = 0.0
    monotone = True
    for delta in deltas:
        v_mid = ((params.pressure(1.0) + delta) / params.pressure_coeff) ** (-1.0 / g)
        s, _ = shock_speeds(1.0, v_mid, 1, (1.0, 0.0), params)
        u_mid = -s * (v_mid - 1.0)
        prof = profile_between(1, (1.0, 0.0), (v_mid, u_mid), params)
        rep = certify_tail_bounds(prof)
        fine = certify_tail_bounds(profile_between(1, (1.0, 0.0), (v_mid, u_mid), params,
                                                   domain_halfwidth=prof.halfwidth,
                                                   n_points=2 * len(prof.xi_grid) - 1))
        left.append(rep.rate_over_delta_left)
        right.append(rep.rate_over_delta_right)
        cr.append(rep.c_ratio)
        d2.append(rep.sup_d2_ratio)
        c_drift = max(c_drift, abs(fine.c_ratio - rep.c_ratio) / rep.c_ratio)
        monotone &= rep.monotone_decay
    spread = max(max(left) / min(left), max(right) / min(right)) - 1.0
    d2_spread = max(d2) / min(d2) - 1.0
    return [
        check("tail_rate_linear", "tail rate / strength constant across strengths", spread, tol, spread <= tol),
        check("tail_comparability_grid", "velocity/volume slope ratio under grid refinement", c_drift, 0.01,
              c_drift <= 0.01),
        check("tail_second_derivative", "|v''| <= C delta |v'| with one C across strengths", [max(d2), d2_spread],
              tol, d2_spread <= tol),
        check("tail_monotone", "slope peaks in the layer and decays outward", float(monotone), 1.0, monotone),
    ]


def _weights_suite() -> list:
    params = FluidParams()
    cfg = solve_intermediate_state(1.0, 0.0, 1.0, -0.30631219449089375, params)
    profiles = build_profiles(cfg)
    spec = WeightSpec.default(cfg.delta1, cfg.delta2)
    out = []
    l1_err = 0.0
    for prof in profiles:
        nu = spec.nu(prof.family)
        xi = np.asarray(prof.xi_grid)
        slope = np.abs(weight_single_slope(xi, prof, nu))
        w = np.full_like(xi, xi[1] - xi[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        l1_err = max(l1_err, abs(fixed_sum(w * slope) - nu) / nu)
    out.append(check("weight_l1", "total variation of a_i equals nu_i", l1_err, 1e-6, l1_err <= 1e-6))
    far = 1e4
    ends = [float(weight_single(-far, profiles[0], spec.nu1)), float(weight_single(far, profiles[0], spec.nu1)),
            float(weight_single(-far, profiles[1], spec.nu2)), float(weight_single(far, profiles[1], spec.nu2))]
    expect = [1.0 + spec.nu1, 1.0, 1.0, 1.0 + spec.nu2]
    end_err = max(abs(a - b) for a, b in zip(ends, expect))
    out.append(check("weight_endpoints", "a_i limits 1 + nu_i on the shocked side and 1 at v_m", end_err, 1e-12,
                     end_err <= 1e-12))
    x = np.linspace(-30.0, 30.0, 6001)
    t = 3.0
    a, da = weight_composed(x, t, (0.3, -0.2), profiles, spec)
    in_range = bool(np.all(a >= 1.0 - spec.total) and np.all(a <= 1.0 + spec.total))
    fd = np.gradient(a, x[1] - x[0])
    fd_err = float(np.max(np.abs(fd[2:-2] - da[2:-2])))
    out.append(check("weight_range", "composed weight within [1 - nu, 1 + nu]", float(in_range), 1.0, in_range))
    out.append(check("weight_slope", "composed weight slope matches finite differences", fd_err, 1e-5,
                     fd_err <= 1e-5))
    s1, s2 = profiles[0].sigma, profiles[1].sigma
    phi1, phi2 = cutoffs(t, x, s1, s2)
    ok = bool(np.all(phi1 + phi2 == 1.0) and np.all(np.diff(phi1) <= 0) and phi1.min() >= 0 and phi1.max() <= 1)
    ramp = np.abs(np.diff(phi1) / np.diff(x))
    slope_err = abs(float(ramp.max()) - 2.0 / ((s2 - s1) * t))
    out.append(check("cutoff_partition", "cutoffs form a monotone partition of unity", float(ok), 1.0, ok))
    out.append(check("cutoff_slope", "ramp slope 2/((sigma2 - sigma1) t)", slope_err, 1e-9, slope_err <= 1e-9))
    return out


SUITE_ORDER = ("rankine_hugoniot", "poincare", "relative_quantities", "profile_tails", "weights")


def verify_suite(seed: int, threads: int = 1) -> dict:
    """All grid-free property checks; deterministic for a given seed and thread count."""
    seqs = np.random.SeedSequence(seed).spawn(2)
    jobs = {
        "rankine_hugoniot": lambda: _rh_suite(np.random.default_rng(seqs[0])),
        "poincare": lambda: _poincare_suite(np.random.default_rng(seqs[1])),
        "relative_quantities": relative_quantity_suite,
        "profile_tails": tail_suite,
        "weights": _weights_suite,
    }
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {name: pool.submit(fn) for name, fn in jobs.items()}
        results = {name: futures[name].result() for name in SUITE_ORDER}
    suites = {name: {"checks": results[name], "failures": sum(not c["pass"] for c in results[name])}
              for name in SUITE_ORDER}
    return {"seed": seed, "suites": suites, "all_pass": all(s["failures"] == 0 for s in suites.values())}

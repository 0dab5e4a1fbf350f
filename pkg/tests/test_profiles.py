import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twoshock.errors import DegenerateShock, InvalidParameters, NoTwoShockConnection, NonHyperbolic
from twoshock.profiles import (
    FluidParams,
    RiemannConfig,
    certify_tail_bounds,
    composite_wave,
    profile_between,
    shock_speeds,
    solve_intermediate_state,
    solve_profile,
    with_speed,
)

from conftest import U_PLUS_EXACT


def forward_riemann(params, v_minus, u_minus, v_mid, v_plus):
    """Close the Rankine-Hugoniot relations from the intermediate volume outward."""
    p = params.pressure
    s1 = -math.sqrt(-(p(v_mid) - p(v_minus)) / (v_mid - v_minus))
    u_mid = u_minus - s1 * (v_mid - v_minus)
    s2 = math.sqrt(-(p(v_plus) - p(v_mid)) / (v_plus - v_mid))
    return u_mid, u_mid - s2 * (v_plus - v_mid)


def rk4_profile(params, sigma_star, v_left, v0, xi_end, n_steps):
    """Classical fixed-step RK4 on the once-integrated traveling-wave ODE."""
    mu = params.eff_visc
    p = params.pressure

    def f(v):
        return -(sigma_star**2 * (v - v_left) + p(v) - p(v_left)) / (mu * sigma_star)

    h = xi_end / n_steps
    v = v0
    for _ in range(n_steps):
        k1 = f(v)
        k2 = f(v + 0.5 * h * k1)
        k3 = f(v + 0.5 * h * k2)
        k4 = f(v + h * k3)
        v += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return v


class TestFluidParams:
    def test_rejects_bad_constants(self):
        with pytest.raises(InvalidParameters):
            FluidParams(gamma=1.0)
        with pytest.raises(InvalidParameters):
            FluidParams(mu=0.0)
        with pytest.raises(InvalidParameters):
            FluidParams(mu=0.1, lambda_visc=-0.1)

    def test_effective_viscosity(self):
        assert FluidParams(mu=0.3, lambda_visc=-0.1).eff_visc == pytest.approx(0.5)

    def test_pressure_law(self, params):
        assert params.pressure(0.5) == pytest.approx(4.0)
        assert params.dpressure(0.5) == pytest.approx(-16.0)


class TestRiemann:
    def test_symmetric_case(self, config):
        assert config.v_mid == pytest.approx(0.9, abs=1e-12)
        assert config.u_mid == pytest.approx(-0.15315609724544688, abs=1e-12)
        assert np.max(np.abs(config.rh_residuals())) < 1e-12

    def test_zero_jump_rejected(self, params):
        with pytest.raises(NoTwoShockConnection):
            solve_intermediate_state(1.0, 0.0, 1.0, 0.0, params)

    def test_expansive_jump_rejected(self, params):
        with pytest.raises(NoTwoShockConnection, match="u"):
            solve_intermediate_state(1.0, 0.0, 1.0, 0.3, params)

    def test_config_validates_ordering(self, params):
        with pytest.raises(NoTwoShockConnection, match="v_minus > v_mid"):
            RiemannConfig(1.0, 0.0, 1.1, -0.1, 1.0, -0.2, params)
        with pytest.raises(InvalidParameters):
            RiemannConfig(-1.0, 0.0, 0.9, -0.1, 1.0, -0.2, params)

    def test_speeds_match_closed_form(self, config):
        s1_star, s1 = config.speeds(1)
        assert s1_star == pytest.approx(-math.sqrt((0.9**-2 - 1.0) / 0.1), rel=1e-14)
        assert s1 == pytest.approx(s1_star)  # rho_- = 1, u_- = 0
        s2_star, s2 = config.speeds(2)
        assert s2 == pytest.approx(s2_star * 0.9 + config.u_mid, rel=1e-14)
        assert s1 < s2

    def test_equal_states_are_not_hyperbolic(self, params):
        with pytest.raises((NonHyperbolic, ValueError)):
            shock_speeds(1.0, 1.0, 1, (1.0, 0.0), params)

    @settings(max_examples=60, deadline=None)
    @given(
        gamma=st.floats(1.1, 3.5),
        v_minus=st.floats(0.3, 3.0),
        a=st.floats(0.02, 0.4),
        b=st.floats(0.02, 0.6),
        u_minus=st.floats(-2.0, 2.0),
    )
    def test_roundtrip_property(self, gamma, v_minus, a, b, u_minus):
        params = FluidParams(gamma=gamma)
        v_mid = v_minus * (1 - a)
        v_plus = v_mid * (1 + b)
        u_mid, u_plus = forward_riemann(params, v_minus, u_minus, v_mid, v_plus)
        cfg = solve_intermediate_state(v_minus, u_minus, v_plus, u_plus, params)
        assert cfg.v_mid == pytest.approx(v_mid, rel=1e-9)
        assert np.max(np.abs(cfg.rh_residuals())) < 1e-12
        assert cfg.speeds(1)[1] < cfg.speeds(2)[1]


class TestProfile:
    def test_midpoint_normalisation(self, profiles, config):
        p1, p2 = profiles
        assert p1.value(0.0) == 0.5 * (config.v_minus + config.v_mid)
        assert p2.value(0.0) == 0.5 * (config.v_mid + config.v_plus)

    def test_monotone(self, profiles):
        p1, p2 = profiles
        assert np.all(p1.dv_tab < 0) and np.all(p2.dv_tab > 0)
        # u' = -sigma* v'; the tabulated u saturates in the far tails
        for p in profiles:
            assert np.all(-p.sigma_star * p.dv_tab < 0)
            assert np.all(np.diff(p.u_tab) <= 0)

    def test_endpoints(self, profiles, config):
        p1, p2 = profiles
        assert abs(p1.v_tab[0] - config.v_minus) < 1e-8
        assert abs(p1.v_tab[-1] - config.v_mid) < 1e-8
        assert abs(p2.v_tab[-1] - config.v_plus) < 1e-8
        assert abs(p2.h_tab[-1] - p2.u_tab[-1]) < 1e-8

    def test_effective_velocity_identity(self, profiles, params):
        for p in profiles:
            np.testing.assert_allclose(p.h_tab, p.u_tab - params.eff_visc * p.dv_tab, rtol=0, atol=1e-15)

    def test_integrated_ode_residual(self, profiles, params):
        for p in profiles:
            xi = np.linspace(-20, 20, 801)
            v = p.value(xi)
            dv = np.gradient(v, xi[1] - xi[0])
            s = p.sigma_star
            res = -params.eff_visc * s * dv - s**2 * (v - p.v_left) - params.pressure(v) + params.pressure(p.v_left)
            assert np.max(np.abs(res[2:-2])) < 1e-4  # finite-difference slope on a coarse grid
            exact = -params.eff_visc * s * p.slope(xi) - s**2 * (v - p.v_left) - params.pressure(v) + params.pressure(p.v_left)
            assert np.max(np.abs(exact)) < 1e-8

    def test_matches_rk4_oracle(self, profiles, params):
        p1 = profiles[0]
        v0 = p1.value(0.0)
        for xi in (-5.0, 5.0):
            oracle = rk4_profile(params, p1.sigma_star, p1.v_left, v0, xi, 20000)
            assert abs(p1.value(xi) - oracle) < 1e-8

    def test_interpolation_between_nodes(self, profiles):
        p = profiles[0]
        mid = 0.5 * (p.xi_grid[1:] + p.xi_grid[:-1])
        coarse = solve_profile(1, _cfg_of(p), domain_halfwidth=p.halfwidth, n_points=(len(p.xi_grid) + 1) // 2)
        assert np.max(np.abs(coarse.value(mid) - p.value(mid))) < 1e-9

    def test_domain_too_short(self, config):
        from twoshock.errors import DomainTooShort

        with pytest.raises(DomainTooShort):
            solve_profile(1, config, domain_halfwidth=5.0)

    def test_degenerate(self, params):
        with pytest.raises(DegenerateShock):
            profile_between(1, (1.0, 0.0), (1.0, 0.0), params)

    def test_csv_export(self, profiles, tmp_path):
        path = tmp_path / "p.csv"
        profiles[1].to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# family=2,sigma=")
        assert lines[1] == "xi,v,u,h,dv_dxi"
        data = np.loadtxt(path, delimiter=",", skiprows=2)
        np.testing.assert_array_equal(data[:, 1], profiles[1].v_tab)


def _cfg_of(p):
    params = p.params
    v_mid = p.v_right
    u_mid = p.u_right
    s2 = math.sqrt(-(params.pressure(1.2) - params.pressure(v_mid)) / (1.2 - v_mid))
    return RiemannConfig(p.v_left, p.u_left, v_mid, u_mid, 1.2, u_mid - s2 * (1.2 - v_mid), params)


class TestTails:
    def test_report_fields(self, profiles):
        rep = certify_tail_bounds(profiles[0])
        assert rep.c_ratio == pytest.approx(abs(profiles[0].sigma_star), rel=1e-4)
        assert rep.monotone_decay
        assert abs(rep.peak_xi) < 2.0
        assert math.isfinite(rep.sup_d2_ratio) and math.isfinite(rep.sup_d3_ratio)

    def test_rates_match_linearisation(self, profiles, params):
        p = profiles[0]
        rep = certify_tail_bounds(p)
        s = p.sigma_star
        lin_left = abs((s**2 + params.dpressure(p.v_left)) / (params.eff_visc * s))
        assert rep.rate_left == pytest.approx(lin_left, rel=0.02)

    def test_unresolved_grid(self, config):
        from twoshock.errors import UnresolvedDerivatives

        coarse = solve_profile(1, config, domain_halfwidth=50.0, n_points=101)
        with pytest.raises(UnresolvedDerivatives):
            certify_tail_bounds(coarse)


class TestComposite:
    def test_far_field_limits(self, profiles, config):
        v, u, h = composite_wave(*profiles, (0.0, 0.0), 0.0, np.array([-1e4, 1e4]))
        assert v[0] == pytest.approx(config.v_minus, abs=1e-14)
        assert v[1] == pytest.approx(config.v_plus, abs=1e-14)
        assert u[0] == pytest.approx(config.u_minus, abs=1e-14)
        assert u[1] == pytest.approx(config.u_plus, abs=1e-14)
        np.testing.assert_allclose(h, u, atol=1e-14)

    def test_middle_state_between_layers(self, profiles, config):
        t = 10.0
        x = 0.5 * (profiles[0].sigma + profiles[1].sigma) * t
        v, _, _ = composite_wave(*profiles, (0.0, 0.0), t, np.array([x]))
        assert abs(v[0] - config.v_mid) < config.delta1 * config.delta2 * 1e-3

    def test_shift_equivariance_with_common_speed(self, profiles):
        p1 = with_speed(profiles[0], 0.0)
        p2 = with_speed(profiles[1], 0.0)
        x = np.linspace(-10, 10, 201)
        s = 0.7
        a = composite_wave(p1, p2, (s, s), 1.0, x)
        b = composite_wave(p1, p2, (0.0, 0.0), 1.0, x - s)
        for f, g in zip(a, b):
            np.testing.assert_allclose(f, g, atol=1e-12)

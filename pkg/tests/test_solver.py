import numpy as np
import pytest

from twoshock.errors import HookFailure, InvalidParameters, InvalidPerturbation, PerturbationTooLarge, PositivityLoss
from twoshock.profiles import FarField, composite_wave
from twoshock.quadrature import l2_norm
from twoshock.solver import (
    Bump,
    FlowState,
    Grid,
    RunSpec,
    StepHook,
    Sponge,
    conservative_mass_check,
    make_initial_data,
    read_snapshot_npz,
    rhs,
    rotational_part,
    run,
    stable_dt,
    step,
    write_snapshot_csv,
    write_snapshot_npz,
)

FAR_CONST = FarField(1.1, -0.2, 1.1, -0.2)


def constant_state(grid, v=1.1, u1=-0.2):
    u = np.zeros((3,) + grid.shape)
    u[0] = u1
    return FlowState(0.0, np.full(grid.shape, v), u, grid)


def shock_state(profile, grid):
    v, u, _ = profile.evaluate(grid.x1)
    return make_initial_data((v, u), [], grid)[0]


class TestGrid:
    def test_validation(self):
        with pytest.raises(InvalidParameters):
            Grid(0, 1, 8)
        with pytest.raises(InvalidParameters):
            Grid(0, 1, 32, 2, 4)
        g = Grid(-1, 1, 40, 4, 8)
        assert g.dx1 == pytest.approx(0.05) and g.dx2 == 0.25 and g.dx3 == 0.125

    def test_lab_coordinates(self):
        g = Grid(-1, 1, 20, frame_speed=0.5)
        np.testing.assert_allclose(g.x1_lab(2.0), g.x1 + 1.0)

    def test_state_rejects_nonpositive_volume(self):
        g = Grid(0, 1, 16)
        with pytest.raises(PositivityLoss):
            FlowState(0.0, np.zeros(g.shape), np.zeros((3,) + g.shape), g)


class TestRhs:
    @pytest.mark.parametrize("shape", [(1, 1), (4, 4)])
    def test_constant_state_is_steady(self, params, shape):
        g = Grid(-5, 5, 32, *shape)
        dv, du = rhs(constant_state(g), params, FAR_CONST)
        assert np.max(np.abs(dv)) == 0.0
        assert np.max(np.abs(du)) < 1e-15

    def test_rotational_part_vanishes_for_planar_flow(self, params, profiles):
        g1 = Grid(-20, 20, 200)
        s = shock_state(profiles[0], g1)
        assert np.all(rotational_part(s, profiles[0].far_field) == 0.0)
        g3 = Grid(-20, 20, 200, 4, 4)
        s3 = shock_state(profiles[0], g3)
        assert np.max(np.abs(rotational_part(s3, profiles[0].far_field))) == 0.0

    def test_planar_data_evolves_identically_in_3d(self, params, profiles):
        g1, g3 = Grid(-20, 20, 200), Grid(-20, 20, 200, 4, 4)
        far = profiles[0].far_field
        a = rhs(shock_state(profiles[0], g1), params, far)
        b = rhs(shock_state(profiles[0], g3), params, far)
        np.testing.assert_allclose(b[0], np.broadcast_to(a[0], g3.shape), atol=1e-14)
        assert np.max(np.abs(b[1][1:])) < 1e-14

    def test_translation_generator(self, params, profiles):
        """Exact travelling wave: d/dt = -sigma d/dx up to O(dx^2)."""
        p = profiles[0]
        errs = []
        for n in (400, 800, 1600):
            g = Grid(-40, 40, n)
            s = shock_state(p, g)
            dv, du = rhs(s, params, p.far_field, Sponge(rate=0.0))
            exact_v = -p.sigma * p.slope(g.x1)
            exact_u = -p.sigma * (-p.sigma_star * p.slope(g.x1))
            errs.append(np.hypot(l2_norm(dv[:, 0, 0] - exact_v, g.dx1), l2_norm(du[0, :, 0, 0] - exact_u, g.dx1)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.8), orders


class TestStep:
    def test_constant_state_1000_steps(self, params):
        g = Grid(-5, 5, 32)
        s0 = s = constant_state(g)
        dt = stable_dt(s, params)
        for _ in range(1000):
            s = step(s, dt, params, FAR_CONST)
        assert np.max(np.abs(s.v - s0.v)) < 1e-14
        assert np.max(np.abs(s.u - s0.u)) < 1e-14

    def test_dt_above_limit_rejected(self, params):
        g = Grid(-5, 5, 32)
        s = constant_state(g)
        with pytest.raises(ValueError):
            step(s, 10 * stable_dt(s, params, cfl_safety=1.0), params, FAR_CONST)

    def test_bitwise_determinism(self, params, profiles):
        g = Grid(-30, 30, 300)
        s = shock_state(profiles[0], g)
        dt = stable_dt(s, params)
        a = step(step(s, dt, params, profiles[0].far_field), dt, params, profiles[0].far_field)
        b = step(step(s, dt, params, profiles[0].far_field), dt, params, profiles[0].far_field)
        assert np.array_equal(a.v, b.v) and np.array_equal(a.u, b.u)

    def test_translation_equivariance(self, params, profiles):
        """Shifting the data by k cells shifts the solution by k cells in the interior."""
        p = profiles[0]
        k = 7
        g = Grid(-40, 40, 800)
        dx = g.dx1
        far = p.far_field
        s0 = shock_state(p, g)
        v, u, _ = p.evaluate(g.x1 - k * dx)
        s1 = make_initial_data((v, u), [], g)[0]
        dt = stable_dt(s0, params)
        for _ in range(20):
            s0 = step(s0, dt, params, far, Sponge(rate=0.0))
            s1 = step(s1, dt, params, far, Sponge(rate=0.0))
        inner = slice(200, 600)
        shifted = slice(200 + k, 600 + k)
        np.testing.assert_allclose(s1.v[shifted], s0.v[inner], rtol=0, atol=1e-13)

    def test_temporal_order(self, params, profiles):
        p = profiles[0]
        g = Grid(-20, 20, 200)
        far = p.far_field
        s = shock_state(p, g)
        dt0 = stable_dt(s, params)
        sols = []
        for m in (1, 2, 4):
            spec = RunSpec(s, params, far, 1.0, dt=dt0 / m)
            sols.append(run(spec).final.v)
        e1 = np.max(np.abs(sols[0] - sols[2]))
        e2 = np.max(np.abs(sols[1] - sols[2]))
        assert np.log2(e1 / e2) > 2.0

    def test_single_shock_convergence(self, params, profiles):
        p = profiles[0]
        errs = []
        for n in (250, 500, 1000):
            g = Grid(-40, 40, n)
            final = run(RunSpec(shock_state(p, g), params, p.far_field, 2.0)).final
            v_exact, u_exact, _ = p.evaluate(g.x1 - p.sigma * 2.0)
            errs.append(np.hypot(l2_norm(final.v[:, 0, 0] - v_exact, g.dx1),
                                 l2_norm(final.u[0, :, 0, 0] - u_exact, g.dx1)))
        assert np.log2(errs[1] / errs[2]) >= 1.8

    def test_positivity_loss(self, params, profiles, monkeypatch):
        """An over-long step (stability guard disabled) must abort, not produce v <= 0."""
        import twoshock.solver as solver

        p = profiles[0]
        g = Grid(-20, 20, 200)
        s = shock_state(p, g)
        monkeypatch.setattr(solver, "stable_dt", lambda *a, **k: np.inf)
        with pytest.raises(PositivityLoss):
            for _ in range(20):
                s = solver.step(s, 0.5, params, p.far_field)


class _Counter(StepHook):
    def __init__(self):
        self.calls = 0

    def on_step(self, state, aux, info):
        self.calls += 1


class _Broken(StepHook):
    def on_step(self, state, aux, info):
        if info["step"] == 2:
            raise RuntimeError("boom")


class TestRun:
    def test_noop_hook_matches_no_hook(self, params, profiles):
        p = profiles[0]
        g = Grid(-30, 30, 200)
        s = shock_state(p, g)
        a = run(RunSpec(s, params, p.far_field, 0.5)).final
        hook = _Counter()
        b = run(RunSpec(s, params, p.far_field, 0.5, hook=hook)).final
        assert np.array_equal(a.v, b.v) and np.array_equal(a.u, b.u)
        assert hook.calls > 1

    def test_cadence(self, params, profiles):
        p = profiles[0]
        g = Grid(-30, 30, 200)
        s = shock_state(p, g)
        tr = run(RunSpec(s, params, p.far_field, 1.0))
        assert [snap.t for snap in tr.snapshots] == [0.0, 1.0]
        tr = run(RunSpec(s, params, p.far_field, 1.0, cadence=0.25))
        times = np.array([snap.t for snap in tr.snapshots])
        np.testing.assert_allclose(times, [0.0, 0.25, 0.5, 0.75, 1.0], atol=tr.dt)
        assert tr.wall_clock >= 0 and len(tr.step_times) == tr.n_steps

    def test_hook_failure(self, params, profiles):
        p = profiles[0]
        g = Grid(-30, 30, 200)
        with pytest.raises(HookFailure, match="boom"):
            run(RunSpec(shock_state(p, g), params, p.far_field, 1.0, hook=_Broken()))

    def test_zero_perturbation_stays_near_composite(self, params, profiles, config):
        g = Grid(-30, 30, 600)
        v, u, _ = composite_wave(*profiles, (0, 0), 0.0, g.x1)
        s = make_initial_data((v, u), [], g)[0]
        tr = run(RunSpec(s, params, config.far_field, 2.0, cadence=0.5))
        for snap in tr.snapshots:
            ve, ue, _ = composite_wave(*profiles, (0, 0), snap.t, g.x1)
            assert np.max(np.abs(snap.v[:, 0, 0] - ve)) < 0.02  # interaction + discretisation


class TestInitialData:
    def test_zero_perturbation(self, profiles):
        g = Grid(-20, 20, 400)
        v, u, _ = composite_wave(*profiles, (0, 0), 0.0, g.x1)
        s, norms = make_initial_data((v, u), [], g)
        assert np.array_equal(s.v[:, 0, 0], v)
        assert norms.l2_v == norms.l2_u == norms.l2_grad_v == norms.l2_grad_u == 0.0

    def test_norm_linear_in_amplitude(self, profiles):
        g = Grid(-20, 20, 400)
        v, u, _ = composite_wave(*profiles, (0, 0), 0.0, g.x1)
        n1 = make_initial_data((v, u), [Bump(1.0, 3.0, 0.01)], g)[1]
        n2 = make_initial_data((v, u), [Bump(1.0, 3.0, 0.02)], g)[1]
        assert n2.l2_v == pytest.approx(2 * n1.l2_v, rel=1e-12)
        assert n2.l2_grad_v == pytest.approx(2 * n1.l2_grad_v, rel=1e-12)

    def test_transverse_mode(self, profiles):
        g3 = Grid(-20, 20, 200, 4, 4)
        v, u, _ = composite_wave(*profiles, (0, 0), 0.0, g3.x1)
        bump = Bump(0.0, 3.0, 0.01, "v", k2=1)
        norms = make_initial_data((v, u), [bump], g3)[1]
        assert norms.l2_grad_transverse > 0
        g1 = Grid(-20, 20, 200)
        with pytest.raises(InvalidPerturbation):
            make_initial_data((v, u), [bump], g1)
        with pytest.raises(InvalidPerturbation):
            make_initial_data((v, u), [Bump(0.0, 3.0, 0.01, "u2")], g1)

    def test_too_large(self, profiles):
        g = Grid(-20, 20, 200)
        v, u, _ = composite_wave(*profiles, (0, 0), 0.0, g.x1)
        with pytest.raises(PerturbationTooLarge):
            make_initial_data((v, u), [Bump(0.0, 3.0, -2.0)], g)


def test_snapshot_roundtrip(tmp_path, profiles):
    g = Grid(-10, 10, 32, 4, 4, frame_speed=0.1)
    s = shock_state(profiles[0], g)
    write_snapshot_npz(s, tmp_path / "s.npz")
    r = read_snapshot_npz(tmp_path / "s.npz")
    assert r.grid == g and np.array_equal(r.v, s.v)
    write_snapshot_csv(s, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,x1,x2,x3,v,u1,u2,u3" and len(lines) == 1 + 32 * 16


def test_conservative_mass_drift(params, profiles):
    p = profiles[0]
    g = Grid(-40, 40, 800)
    v, u, _ = p.evaluate(g.x1)
    bal = conservative_mass_check(g, params, p.far_field, 1 / v, u / v, 2.0)
    assert bal.relative_drift < 1e-6
    assert bal.net_inflow != 0.0

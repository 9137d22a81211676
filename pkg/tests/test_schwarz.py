"""Coupling driver behavior at desk scale: transmission, convergence, accuracy."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from schwarzrom import (
    NON_OVERLAPPING,
    OVERLAPPING,
    ConfigurationError,
    DomainDecomposition,
    Fom,
    KinematicState,
    NewmarkParams,
    SchwarzConfig,
    SubdomainProblem,
    build_uniform_mesh,
    check_convergence,
    henky,
    history_mse,
    interface_traction,
    linear_elastic,
    overlapping_transmission,
    relax,
    run_coupled,
    run_single,
    schwarz_interval,
)
from schwarzrom.schwarz import SchwarzDriver

E, RHO = 1e9, 1000.0


def gaussian_ic(x, a=1e-3, b=0.5, s=0.02):
    return 0.5 * a * np.exp(-((x - b) ** 2) / (2 * s * s))


def non_overlapping_dd(dx=5e-3, dt=5e-7, model=None, split=0.6):
    model = model or henky(E, RHO)
    params = NewmarkParams(0.49, 0.9, dt)
    mesh1 = build_uniform_mesh(0.0, split, dx, clamped_left=True)
    mesh1 = mesh1.with_dirichlet([mesh1.n_nodes - 1])
    mesh2 = build_uniform_mesh(split, 1.0, dx, clamped_right=True)
    sub1 = SubdomainProblem(mesh1, model, params, Fom(), np.array([mesh1.n_nodes - 1]))
    sub2 = SubdomainProblem(mesh2, model, params, Fom(), np.array([0]))
    return DomainDecomposition([sub1, sub2], NON_OVERLAPPING)


def overlapping_dd(dx=5e-3, dt=5e-7, model=None, left=0.62, right=0.58):
    model = model or henky(E, RHO)
    params = NewmarkParams(0.49, 0.9, dt)
    mesh1 = build_uniform_mesh(0.0, left, dx, clamped_left=True)
    mesh1 = mesh1.with_dirichlet([mesh1.n_nodes - 1])
    mesh2 = build_uniform_mesh(right, 1.0, dx, clamped_right=True)
    mesh2 = mesh2.with_dirichlet([0])
    sub1 = SubdomainProblem(mesh1, model, params, Fom(), np.array([mesh1.n_nodes - 1]))
    sub2 = SubdomainProblem(mesh2, model, params, Fom(), np.array([0]))
    return DomainDecomposition([sub1, sub2], OVERLAPPING)


class TestRelax:
    def test_theta_one_returns_new_data(self):
        assert relax((9.0, 9.0, 9.0), (1.0, 2.0, 3.0), 1.0) == (1.0, 2.0, 3.0)

    def test_half_theta_arithmetic(self):
        assert relax((0.0, 0.0, 0.0), (2.0, 4.0, -2.0), 0.5) == (1.0, 2.0, -1.0)

    def test_fixed_point_unchanged(self):
        lam = (0.3, -0.2, 5.0)
        assert relax(lam, lam, 0.7) == lam


class TestOverlappingTransmission:
    def test_exact_at_node(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.25)
        state = KinematicState(
            np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
            np.array([0.0, 10.0, 20.0, 30.0, 40.0]),
            np.array([5.0, 6.0, 7.0, 8.0, 9.0]),
            0.0,
        )
        u, v, a = overlapping_transmission(mesh, state, 0.5)
        assert (u, v, a) == (2.0, 20.0, 7.0)

    def test_linear_field_interpolates_exactly(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.25)
        state = KinematicState(
            3.0 * mesh.node_coords, -2.0 * mesh.node_coords, 0.5 * mesh.node_coords, 0.0
        )
        u, v, a = overlapping_transmission(mesh, state, 0.625)
        assert_allclose([u, v, a], [3 * 0.625, -2 * 0.625, 0.5 * 0.625], rtol=1e-14)

    def test_outside_domain_rejected(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.25)
        state = KinematicState(*(np.zeros(5),) * 3, 0.0)
        with pytest.raises(ConfigurationError):
            overlapping_transmission(mesh, state, 1.5)


class TestInterfaceTraction:
    def test_zero_displacement_zero_traction(self):
        mesh = build_uniform_mesh(0.0, 0.6, 0.1)
        T = interface_traction(mesh, henky(E, RHO), np.zeros(mesh.n_nodes), mesh.n_nodes - 1, 1)
        assert T == 0.0

    def test_uniform_stretch_closed_form(self):
        alpha = 2e-3
        mesh = build_uniform_mesh(0.0, 0.6, 0.1)
        u = alpha * mesh.node_coords
        T = interface_traction(mesh, henky(E, RHO), u, mesh.n_nodes - 1, 1)
        assert_allclose(T, E * np.log1p(alpha) / (1 + alpha), rtol=1e-10)
        T_neg = interface_traction(mesh, henky(E, RHO), u, mesh.n_nodes - 1, -1)
        assert_allclose(T_neg, -T, rtol=1e-14)

    def test_interior_node_rejected(self):
        mesh = build_uniform_mesh(0.0, 0.6, 0.1)
        with pytest.raises(ConfigurationError):
            interface_traction(mesh, henky(E, RHO), np.zeros(mesh.n_nodes), 2, 1)


class TestCheckConvergence:
    def make_states(self, scale):
        rng = np.random.RandomState(0)
        return [
            KinematicState(
                scale * rng.rand(5) + 1.0, scale * rng.rand(5) + 1.0, scale * rng.rand(5) + 1.0, 0.0
            )
            for _ in range(2)
        ]

    def test_identical_iterates_converged(self):
        states = self.make_states(1.0)
        converged, norms = check_convergence(states, [s.copy() for s in states], 1e-11)
        assert converged and norms == (0.0, 0.0, 0.0)

    def test_zero_previous_uses_absolute(self):
        prev = [KinematicState(*(np.zeros(4),) * 3, 0.0)]
        curr = [KinematicState(*(np.full(4, 1e-13),) * 3, 0.0)]
        converged, norms = check_convergence(prev, curr, 1e-11)
        assert converged  # absolute fallback: 2e-13 < 1e-11

    def test_all_three_fields_required(self):
        prev = self.make_states(1.0)
        curr = [s.copy() for s in prev]
        curr[0].a = curr[0].a + 1.0  # only the acceleration differs
        converged, norms = check_convergence(prev, curr, 1e-11)
        assert not converged
        assert norms[0] < 1e-11 and norms[2] > 1e-11


class TestIntervalBehavior:
    def test_rest_state_converges_in_one_iteration(self):
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=2e-4)
        driver = SchwarzDriver(dd, cfg)
        states = driver.initial_states(lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        new_states, iters = schwarz_interval(dd, cfg, states)
        assert iters == 1
        assert_allclose(new_states[0].full.u, 0.0, atol=0.0)

    def test_interval_restart_purity(self):
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=2e-4)
        driver = SchwarzDriver(dd, cfg)
        states = driver.initial_states(gaussian_ic)
        s_a, it_a = schwarz_interval(dd, cfg, states)
        s_b, it_b = schwarz_interval(dd, cfg, states)
        assert it_a == it_b
        for a, b in zip(s_a, s_b):
            assert np.array_equal(a.full.u, b.full.u)
            assert np.array_equal(a.full.v, b.full.v)
            assert np.array_equal(a.full.a, b.full.a)

    def test_interface_kinematic_compatibility(self):
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=2e-4)
        histories, stats = run_coupled(dd, cfg, gaussian_ic)
        n1 = dd.subdomains[0].mesh.n_nodes - 1
        u1 = histories[0].u[:, n1]
        u2 = histories[1].u[:, 0]
        scale = np.abs(histories[0].u).max()
        assert np.abs(u1 - u2).max() <= 10 * cfg.delta * scale * 100


class TestCoupledAccuracy:
    def test_overlapping_linear_elastic_matches_monolithic(self):
        model = linear_elastic(E, RHO)
        dd = overlapping_dd(model=model)
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=1e-4)
        histories, stats = run_coupled(dd, cfg, gaussian_ic)
        mono_mesh = build_uniform_mesh(0.0, 1.0, 5e-3, clamped_left=True, clamped_right=True)
        mono = run_single(mono_mesh, model, NewmarkParams(0.49, 0.9, 5e-7), 1e-4, gaussian_ic)
        for i, (lo, hi) in enumerate([(0.0, 0.62), (0.58, 1.0)]):
            i_lo = mono_mesh.node_at(lo)
            i_hi = mono_mesh.node_at(hi)
            from schwarzrom import TimeHistory

            ref = TimeHistory(
                mono.times,
                mono.u[:, i_lo : i_hi + 1],
                mono.v[:, i_lo : i_hi + 1],
                mono.a[:, i_lo : i_hi + 1],
            )
            eu, ev, ea = history_mse(histories[i], ref)
            assert eu <= 1e-6, f"subdomain {i}: displacement mse {eu:.3e}"

    def test_non_overlapping_consistent_transfer_matches_monolithic(self):
        model = henky(E, RHO)
        dd = non_overlapping_dd(model=model)
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=1e-4)
        histories, _ = run_coupled(dd, cfg, gaussian_ic)
        mono_mesh = build_uniform_mesh(0.0, 1.0, 5e-3, clamped_left=True, clamped_right=True)
        mono = run_single(mono_mesh, model, NewmarkParams(0.49, 0.9, 5e-7), 1e-4, gaussian_ic)
        from schwarzrom import TimeHistory

        split = mono_mesh.node_at(0.6)
        refs = [
            TimeHistory(mono.times, mono.u[:, : split + 1], mono.v[:, : split + 1], mono.a[:, : split + 1]),
            TimeHistory(mono.times, mono.u[:, split:], mono.v[:, split:], mono.a[:, split:]),
        ]
        for hist, ref in zip(histories, refs):
            eu, ev, ea = history_mse(hist, ref)
            assert eu <= 1e-6 and ev <= 1e-5 and ea <= 1e-4

    def test_all_three_fields_transferred(self):
        # the interface velocity and acceleration of the receiving subdomain
        # must track the donor values, not just the displacement
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=1e-4)
        histories, _ = run_coupled(dd, cfg, gaussian_ic)
        n1 = dd.subdomains[0].mesh.n_nodes - 1
        for attr in ("u", "v", "a"):
            left = getattr(histories[0], attr)[:, n1]
            right = getattr(histories[1], attr)[:, 0]
            scale = np.abs(getattr(histories[1], attr)).max()
            assert np.abs(left - right).max() <= 1e-6 * scale


class TestRunCoupled:
    def test_single_interval_stats(self):
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=5e-7)
        histories, stats = run_coupled(dd, cfg, gaussian_ic)
        assert stats.per_interval.size == 1
        assert stats.total_iterations == stats.per_interval[0]
        assert histories[0].n_steps == 2

    def test_determinism_across_runs(self):
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=1e-5)
        h1, s1 = run_coupled(dd, cfg, gaussian_ic)
        h2, s2 = run_coupled(dd, cfg, gaussian_ic)
        assert s1.total_iterations == s2.total_iterations
        assert np.array_equal(h1[0].u, h2[0].u)
        assert np.array_equal(h1[1].a, h2[1].a)

    def test_substep_mode_runs(self):
        dd = non_overlapping_dd(dt=2.5e-7)
        cfg = SchwarzConfig(
            delta=1e-11,
            controller_dt=5e-7,
            final_time=1e-5,
            steps_per_interval=2,
            interpolate_transmission=True,
        )
        histories, stats = run_coupled(dd, cfg, gaussian_ic)
        assert histories[0].n_steps == 21  # one record per interval end

    def test_mesh_gap_rejected(self):
        model = henky(E, RHO)
        params = NewmarkParams(0.49, 0.9, 5e-7)
        mesh1 = build_uniform_mesh(0.0, 0.55, 5e-3, clamped_left=True)
        mesh1 = mesh1.with_dirichlet([mesh1.n_nodes - 1])
        mesh2 = build_uniform_mesh(0.6, 1.0, 5e-3, clamped_right=True)
        sub1 = SubdomainProblem(mesh1, model, params, Fom(), np.array([mesh1.n_nodes - 1]))
        sub2 = SubdomainProblem(mesh2, model, params, Fom(), np.array([0]))
        with pytest.raises(ConfigurationError):
            DomainDecomposition([sub1, sub2], NON_OVERLAPPING)


class TestTransmissionFields:
    def test_dropping_velocity_acceleration_degrades_acceleration(self):
        # regression experiment: prescribing only the displacement trace must
        # measurably hurt the acceleration field of the receiving subdomain
        model = henky(E, RHO)
        mono_mesh = build_uniform_mesh(0.0, 1.0, 5e-3, clamped_left=True, clamped_right=True)
        mono = run_single(mono_mesh, model, NewmarkParams(0.49, 0.9, 5e-7), 1e-4, gaussian_ic)
        from schwarzrom import TimeHistory

        split = mono_mesh.node_at(0.6)
        ref1 = TimeHistory(
            mono.times, mono.u[:, : split + 1], mono.v[:, : split + 1], mono.a[:, : split + 1]
        )
        results = {}
        for full_transmission in (True, False):
            dd = non_overlapping_dd(model=model)
            cfg = SchwarzConfig(
                delta=1e-11,
                controller_dt=5e-7,
                final_time=1e-4,
                max_schwarz_iters=200,
                transmit_velocity_acceleration=full_transmission,
            )
            histories, _ = run_coupled(dd, cfg, gaussian_ic)
            _, _, ea = history_mse(histories[0], ref1)
            results[full_transmission] = ea
        assert results[False] > 10 * results[True]


class TestFailureModes:
    def test_interval_failure_carries_increment_norms(self):
        dd = non_overlapping_dd()
        cfg = SchwarzConfig(
            delta=1e-16, controller_dt=5e-7, final_time=2e-4, max_schwarz_iters=2
        )
        with pytest.raises(Exception) as err:
            run_coupled(dd, cfg, gaussian_ic)
        from schwarzrom import IntervalFailureError

        assert isinstance(err.value, IntervalFailureError)
        assert err.value.iterations == 2
        assert len(err.value.increment_norms) == 3

    def test_integrator_dt_must_match_controller(self):
        dd = non_overlapping_dd(dt=4e-7)
        cfg = SchwarzConfig(delta=1e-11, controller_dt=5e-7, final_time=2e-4)
        from schwarzrom.schwarz import SchwarzDriver

        with pytest.raises(ConfigurationError):
            SchwarzDriver(dd, cfg)

"""Element-level checks for the 1D bar core: assembly, materials, invariants."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from schwarzrom import (
    ConfigurationError,
    InvertedElementError,
    assemble_mass,
    build_uniform_mesh,
    element_contributions,
    henky,
    internal_force,
    linear_elastic,
    stress_and_tangent,
    tangent_stiffness,
)


class TestBuildUniformMesh:
    def test_paper_scale_mesh(self):
        mesh = build_uniform_mesh(0.0, 1.0, 1e-3, clamped_left=True, clamped_right=True)
        assert mesh.n_nodes == 1001
        assert mesh.n_elements == 1000
        assert set(mesh.dirichlet_ids) == {0, 1000}

    def test_single_clamp(self):
        mesh = build_uniform_mesh(0.0, 0.6, 0.1, clamped_left=True, clamped_right=False)
        assert mesh.n_nodes == 7
        assert set(mesh.dirichlet_ids) == {0}

    def test_non_divisible_span_rejected(self):
        with pytest.raises(ConfigurationError):
            build_uniform_mesh(0.0, 1.0, 0.3)

    def test_free_ids_complement(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.25, clamped_left=True, clamped_right=True)
        assert set(mesh.free_ids) | set(mesh.dirichlet_ids) == set(range(mesh.n_nodes))
        assert not set(mesh.free_ids) & set(mesh.dirichlet_ids)


class TestStressAndTangent:
    def test_henky_unit_stretch(self):
        model = henky(7.3e8, 1000.0)
        P, dP = stress_and_tangent(model, 1.0)
        assert P == 0.0
        assert_allclose(dP, model.youngs_modulus, rtol=1e-14)

    def test_henky_stretch_e(self):
        E = 2.5e9
        P, dP = stress_and_tangent(henky(E, 1000.0), math.e)
        assert_allclose(P, E / math.e, rtol=1e-14)
        assert_allclose(dP, 0.0, atol=1e-9 * E)

    def test_linear_elastic(self):
        P, dP = stress_and_tangent(linear_elastic(1e9, 1000.0), 1.01)
        assert_allclose(P, 1e7, rtol=1e-12)
        assert dP == 1e9

    def test_henky_inverted_raises(self):
        with pytest.raises(InvertedElementError):
            stress_and_tangent(henky(1e9, 1000.0), -0.2)


class TestAssembleMass:
    def test_single_element_block(self):
        mesh = build_uniform_mesh(0.0, 1.0, 1.0)
        M = assemble_mass(mesh, henky(1e9, 6.0))
        assert_allclose(M, [[2.0, 1.0], [1.0, 2.0]], rtol=1e-14)

    def test_two_element_overlap(self):
        # hand assembly: each block is (rho h / 6) [[2,1],[1,2]] = [[2,1],[1,2]]
        mesh = build_uniform_mesh(0.0, 1.0, 0.5)
        M = assemble_mass(mesh, henky(1e9, 12.0))
        assert_allclose(M, [[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]], rtol=1e-14)

    def test_total_mass_conserved(self):
        mesh = build_uniform_mesh(0.0, 0.7, 0.7 / 13)
        model = henky(1e9, 832.5)
        M = assemble_mass(mesh, model)
        assert_allclose(M.sum(), model.density * 0.7, rtol=1e-12)

    def test_spd_up_to_paper_mesh(self):
        for n_el in (10, 100, 1000):
            mesh = build_uniform_mesh(0.0, 1.0, 1.0 / n_el)
            M = assemble_mass(mesh, henky(1e9, 1000.0))
            np.linalg.cholesky(M)  # raises if not SPD


class TestInternalForce:
    def test_zero_displacement(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.1)
        f = internal_force(mesh, henky(1e9, 1000.0), np.zeros(mesh.n_nodes))
        assert_allclose(f, 0.0, atol=0.0)

    def test_uniform_stretch_telescopes(self):
        alpha = 3e-3
        mesh = build_uniform_mesh(0.0, 2.0, 0.25)
        model = henky(1e9, 1000.0)
        u = alpha * mesh.node_coords
        f = internal_force(mesh, model, u)
        P, _ = stress_and_tangent(model, 1.0 + alpha)
        assert_allclose(f[1:-1], 0.0, atol=1e-12 * abs(P))
        assert_allclose(f[0], -P, rtol=1e-12)
        assert_allclose(f[-1], P, rtol=1e-12)

    def test_henky_matches_linear_at_small_strain(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.05)
        u = 1e-6 * mesh.node_coords
        f_h = internal_force(mesh, henky(1e9, 1000.0), u)
        f_l = internal_force(mesh, linear_elastic(1e9, 1000.0), u)
        assert np.linalg.norm(f_h - f_l) <= 1e-5 * np.linalg.norm(f_l)

    def test_translation_invariance(self):
        rng = np.random.RandomState(7)
        mesh = build_uniform_mesh(0.0, 1.0, 0.1)
        model = henky(1e9, 1000.0)
        u = 1e-4 * rng.standard_normal(mesh.n_nodes)
        f = internal_force(mesh, model, u)
        f_shift = internal_force(mesh, model, u + 0.37)
        assert np.linalg.norm(f_shift - f) <= 1e-12 * max(np.linalg.norm(f), 1.0)

    def test_inverted_element_identified(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.25)
        u = np.zeros(mesh.n_nodes)
        u[2] = 0.5  # element 2 spans nodes (2, 3): stretch 1 - 0.5/0.25 = -1
        with pytest.raises(InvertedElementError) as err:
            internal_force(mesh, henky(1e9, 1000.0), u)
        assert err.value.element_id == 2


class TestTangentStiffness:
    def test_linear_elastic_classic(self):
        E, h = 1e9, 0.5
        mesh = build_uniform_mesh(0.0, 1.0, h)
        rng = np.random.RandomState(3)
        K = tangent_stiffness(mesh, linear_elastic(E, 1000.0), 1e-3 * rng.rand(3))
        k = E / h
        assert_allclose(K, k * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]), rtol=1e-12)

    def test_henky_at_rest_equals_linear(self):
        mesh = build_uniform_mesh(0.0, 1.0, 0.2)
        u = np.zeros(mesh.n_nodes)
        K_h = tangent_stiffness(mesh, henky(1e9, 1000.0), u)
        K_l = tangent_stiffness(mesh, linear_elastic(1e9, 1000.0), u)
        assert_allclose(K_h, K_l, rtol=1e-13)

    def test_forward_difference_oracle(self):
        # ||K d - (f(u+d) - f(u))|| / ||K d|| <= 1e-6 at ||d|| = 1e-7
        rng = np.random.RandomState(11)
        mesh = build_uniform_mesh(0.0, 5.0, 0.5)
        model = henky(1e9, 1000.0)
        u = 1e-3 * np.sin(mesh.node_coords)
        d = rng.standard_normal(mesh.n_nodes)
        d *= 1e-7 / np.linalg.norm(d)
        K = tangent_stiffness(mesh, model, u)
        lhs = K @ d
        rhs = internal_force(mesh, model, u + d) - internal_force(mesh, model, u)
        assert np.linalg.norm(lhs - rhs) <= 1e-6 * np.linalg.norm(lhs)

    def test_jacobian_of_internal_force_randomized(self):
        # central differences as the oracle over 20 random small-strain states
        rng = np.random.RandomState(5)
        mesh = build_uniform_mesh(0.0, 1.0, 0.1)
        model = henky(1e9, 1000.0)
        worst = 0.0
        for _ in range(20):
            u = 1e-4 * rng.standard_normal(mesh.n_nodes)
            K = tangent_stiffness(mesh, model, u)
            K_fd = np.zeros_like(K)
            eps = 1e-7
            for j in range(mesh.n_nodes):
                e = np.zeros(mesh.n_nodes)
                e[j] = eps
                K_fd[:, j] = (
                    internal_force(mesh, model, u + e) - internal_force(mesh, model, u - e)
                ) / (2 * eps)
            worst = max(worst, np.abs(K - K_fd).max() / np.abs(K).max())
        assert worst <= 1e-5


class TestElementContributions:
    def test_sum_reproduces_assembly(self):
        rng = np.random.RandomState(2)
        mesh = build_uniform_mesh(0.0, 1.0, 0.125)
        model = henky(1e9, 1000.0)
        u = 1e-4 * rng.standard_normal(mesh.n_nodes)
        f_loc, k_loc = element_contributions(mesh, model, u)
        f = np.zeros(mesh.n_nodes)
        K = np.zeros((mesh.n_nodes, mesh.n_nodes))
        for e, (i, j) in enumerate(mesh.elements):
            f[[i, j]] += f_loc[e]
            K[np.ix_([i, j], [i, j])] += k_loc[e]
        f_ref = internal_force(mesh, model, u)
        K_ref = tangent_stiffness(mesh, model, u)
        assert np.linalg.norm(f - f_ref) <= 1e-14 * np.linalg.norm(f_ref)
        assert np.abs(K - K_ref).max() <= 1e-14 * np.abs(K_ref).max()

    def test_single_element_contribution_is_assembly(self):
        mesh = build_uniform_mesh(0.0, 1.0, 1.0)
        model = linear_elastic(1e9, 1000.0)
        u = np.array([0.0, 1e-3])
        f_loc, _ = element_contributions(mesh, model, u)
        assert_allclose(f_loc[0], internal_force(mesh, model, u), rtol=1e-15)

    def test_unit_weights_reproduce_assembly(self):
        rng = np.random.RandomState(4)
        mesh = build_uniform_mesh(0.0, 1.0, 0.2)
        model = henky(1e9, 1000.0)
        u = 1e-4 * rng.standard_normal(mesh.n_nodes)
        f_loc, _ = element_contributions(mesh, model, u)
        weights = np.ones(mesh.n_elements)
        f = np.zeros(mesh.n_nodes)
        for e, (i, j) in enumerate(mesh.elements):
            f[[i, j]] += weights[e] * f_loc[e]
        assert_allclose(f, internal_force(mesh, model, u), rtol=0, atol=1e-14)

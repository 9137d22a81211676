"""Galerkin-projected reduced-order model with strong Dirichlet enforcement.

The reduced solution is the affine reconstruction u = u_bar + Phi u_hat where
the reference state u_bar vanishes on free dofs and carries the prescribed
boundary values, and every mode vanishes at constrained dofs. Updating the
reference state each coupling iteration imposes time-varying Dirichlet data
exactly while the generalized coordinates remain unconstrained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .mesh import ConstitutiveModel, Mesh1D, internal_force, mass_tridiagonal, stiffness_tridiagonal
from .pod import PodBasis


@dataclass
class ReferenceState:
    """Full-length carriers of prescribed (u, v, a) boundary values.

    All three vectors are exactly zero on free dofs.
    """

    u_bar: np.ndarray
    v_bar: np.ndarray
    a_bar: np.ndarray


def set_reference_state(n_nodes: int, dirichlet_ids, u_d, v_d, a_d) -> ReferenceState:
    """Build a reference state holding the given values at constrained dofs."""
    ids = np.asarray(dirichlet_ids, dtype=int)
    u_bar = np.zeros(n_nodes)
    v_bar = np.zeros(n_nodes)
    a_bar = np.zeros(n_nodes)
    u_bar[ids] = u_d
    v_bar[ids] = v_d
    a_bar[ids] = a_d
    return ReferenceState(u_bar, v_bar, a_bar)


class RomOperators:
    """Precomputed reduced operators for one subdomain basis.

    Holds the reduced mass (symmetric positive definite), the mass block
    coupling constrained accelerations into the free equations, and the basis
    partitioned by free/constrained rows.
    """

    def __init__(
        self,
        mesh: Mesh1D,
        model: ConstitutiveModel,
        basis: PodBasis,
        extra_mass: dict | None = None,
    ):
        if basis.n_dofs != mesh.n_nodes:
            raise ConfigurationError("basis dof count does not match mesh")
        if not np.array_equal(basis.dirichlet_ids, mesh.dirichlet_ids):
            raise ConfigurationError("basis and mesh disagree on Dirichlet dofs")
        self.mesh = mesh
        self.model = model
        self.basis = basis
        self.free_ids = mesh.free_ids
        self.dirichlet_ids = mesh.dirichlet_ids
        self.phi = basis.modes
        self.phi_u = self.phi[self.free_ids, :]

        m_diag, m_off = mass_tridiagonal(mesh, model)
        if extra_mass:
            m_diag = m_diag.copy()
            for node, value in extra_mass.items():
                m_diag[int(node)] += value
        # M Phi via the tridiagonal structure; Dirichlet rows of Phi are zero,
        # so restricting rows afterwards yields M_uu Phi_u exactly.
        m_phi = _tridiag_matmat(m_diag, m_off, self.phi)
        self.m_hat = self.phi_u.T @ m_phi[self.free_ids, :]
        self.m_hat = 0.5 * (self.m_hat + self.m_hat.T)

        n = mesh.n_nodes
        m_dense_cols = np.zeros((n, self.dirichlet_ids.size))
        for j, d in enumerate(self.dirichlet_ids):
            col = np.zeros(n)
            col[d] = m_diag[d]
            if d > 0:
                col[d - 1] = m_off[d - 1]
            if d + 1 < n:
                col[d + 1] = m_off[d]
            m_dense_cols[:, j] = col
        self.m_ud = m_dense_cols[self.free_ids, :]

    @property
    def n_modes(self) -> int:
        return self.phi.shape[1]


def _tridiag_matmat(diag, off, B):
    out = diag[:, None] * B
    out[:-1] += off[:, None] * B[1:]
    out[1:] += off[:, None] * B[:-1]
    return out


def build_rom_operators(mesh: Mesh1D, model: ConstitutiveModel, basis: PodBasis) -> RomOperators:
    return RomOperators(mesh, model, basis)


def reconstruct(ops: RomOperators, refstate: ReferenceState, u_hat, v_hat, a_hat):
    """Affine reconstruction of full-length fields from reduced coordinates.

    Constrained entries equal the reference data exactly because every mode
    row there is zero.
    """
    u = refstate.u_bar + ops.phi @ u_hat
    v = refstate.v_bar + ops.phi @ v_hat
    a = refstate.a_bar + ops.phi @ a_hat
    return u, v, a


def reduced_external_force(ops: RomOperators, refstate: ReferenceState, f_ext=None) -> np.ndarray:
    """Project the external load, including the constrained-acceleration coupling.

    Recomputed whenever the reference state changes (every coupling iteration).
    """
    a_d = refstate.a_bar[ops.dirichlet_ids]
    rhs = -(ops.m_ud @ a_d)
    if f_ext is not None:
        rhs = rhs + f_ext[ops.free_ids]
    return ops.phi_u.T @ rhs


def rom_internal_force(ops: RomOperators, refstate: ReferenceState, u_hat, v_hat):
    """Projected internal force at the reconstructed state (full assembly)."""
    u = refstate.u_bar + ops.phi @ u_hat
    v = refstate.v_bar + ops.phi @ v_hat
    f = internal_force(ops.mesh, ops.model, u, v)
    return ops.phi_u.T @ f[ops.free_ids], u


def rom_stiffness(ops: RomOperators, u_full) -> np.ndarray:
    """Projected tangent stiffness Phi_u^T K_uu Phi_u at a reconstructed state."""
    k_diag, k_off = stiffness_tridiagonal(ops.mesh, ops.model, u_full)
    k_phi = _tridiag_matmat(k_diag, k_off, ops.phi)
    return ops.phi_u.T @ k_phi[ops.free_ids, :]


def rom_residual(
    ops: RomOperators,
    refstate: ReferenceState,
    u_hat,
    v_hat,
    a_hat,
    t: float,
    f_ext=None,
):
    """Reduced dynamic balance and its stiffness part.

    Returns (residual, reduced_stiffness); the time integrator adds the
    reduced-mass chain term M_hat / (beta dt^2) to form the Newton matrix.
    """
    f_hat, u_full = rom_internal_force(ops, refstate, u_hat, v_hat)
    residual = ops.m_hat @ a_hat + f_hat - reduced_external_force(ops, refstate, f_ext)
    return residual, rom_stiffness(ops, u_full)

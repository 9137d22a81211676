"""Subdomain solvers: Newmark stepping of full, reduced, and hyper-reduced models.

Each solver advances one subdomain across a single time step given boundary
data (prescribed values at constrained nodes, point loads at free nodes) and
exposes full-length fields for transmission and convergence checks. Reduced
variants keep their generalized coordinates between steps and reconstruct on
demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ecsw import EcswAssembler, EcswSampleSet
from .errors import ConfigurationError
from .mesh import (
    ConstitutiveModel,
    KinematicState,
    Mesh1D,
    internal_force,
    mass_tridiagonal,
    stiffness_tridiagonal,
)
from .newmark import (
    DENSE_SOLVE_MAX_DOFS,
    DirichletData,
    NewmarkParams,
    SymTridiagonal,
    newmark_step,
    solve_spd,
)
from .pod import PodBasis
from .rom import (
    ReferenceState,
    RomOperators,
    reconstruct,
    reduced_external_force,
    rom_internal_force,
    rom_stiffness,
    set_reference_state,
)


@dataclass
class BoundaryData:
    """Per-step boundary input: prescribed node values and point loads."""

    dirichlet: dict = field(default_factory=dict)    # node -> (u, v, a)
    point_loads: dict = field(default_factory=dict)  # node -> force

    def interpolate(self, other: "BoundaryData", w: float) -> "BoundaryData":
        """Linear blend (1 - w) * self + w * other, matching keys required."""
        dir_out = {
            k: tuple((1.0 - w) * a + w * b for a, b in zip(self.dirichlet[k], other.dirichlet[k]))
            for k in self.dirichlet
        }
        loads = {k: (1.0 - w) * self.point_loads[k] + w * other.point_loads[k] for k in self.point_loads}
        return BoundaryData(dir_out, loads)


@dataclass
class SubdomainState:
    """Full-length fields plus, for reduced variants, generalized coordinates."""

    full: KinematicState
    reduced: KinematicState | None = None

    def copy(self) -> "SubdomainState":
        return SubdomainState(self.full.copy(), self.reduced.copy() if self.reduced else None)


def _point_load_vector(n: int, point_loads: dict) -> np.ndarray:
    f = np.zeros(n)
    for node, value in point_loads.items():
        f[node] += value
    return f


def consistent_initial_acceleration(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    u0: np.ndarray,
    v0: np.ndarray,
    constrained_ids,
    f_ext: np.ndarray,
    a_constrained=None,
) -> np.ndarray:
    """Solve M a0 = f_ext - f_int(u0, v0) on the unconstrained dofs.

    Constrained entries take a_constrained (zeros by default) and their mass
    coupling moves to the right-hand side.
    """
    ids = np.asarray(constrained_ids, dtype=int)
    n = mesh.n_nodes
    m_diag, m_off = mass_tridiagonal(mesh, model)
    a0 = np.zeros(n)
    if a_constrained is not None:
        a0[ids] = a_constrained
    mass = SymTridiagonal(m_diag, m_off)
    rhs = f_ext - internal_force(mesh, model, u0, v0) - mass.matvec(a0.copy())
    zeros = np.zeros(ids.size)
    free = DirichletData(ids, zeros, zeros, zeros).free_indexer(n)
    a0[free] = solve_spd(mass.submatrix(free), rhs[free])
    return a0


class FomSolver:
    """Full-order Newmark solver on one mesh.

    extra_mass maps node indices to additional point masses (used by the
    coupling driver to keep the shared-interface inertia consistent).
    """

    def __init__(
        self,
        mesh: Mesh1D,
        model: ConstitutiveModel,
        params: NewmarkParams,
        extra_mass: dict | None = None,
    ):
        self.mesh = mesh
        self.model = model
        self.params = params
        self.m_diag, self.m_off = mass_tridiagonal(mesh, model)
        if extra_mass:
            for node, value in extra_mass.items():
                self.m_diag[int(node)] += value
        n = mesh.n_nodes
        self._dense = n <= DENSE_SOLVE_MAX_DOFS
        inv_bdt2 = 1.0 / (params.beta * params.dt**2)
        if self._dense:
            idx = np.arange(n)
            jm = np.zeros((n, n))
            jm[idx, idx] = self.m_diag * inv_bdt2
            jm[idx[:-1], idx[1:]] = self.m_off * inv_bdt2
            jm[idx[1:], idx[:-1]] = self.m_off * inv_bdt2
            self._jac_mass = jm
        else:
            self._jac_mass = SymTridiagonal(self.m_diag * inv_bdt2, self.m_off * inv_bdt2)

    def _mass_matvec(self, a):
        y = self.m_diag * a
        y[:-1] += self.m_off * a[1:]
        y[1:] += self.m_off * a[:-1]
        return y

    def _jacobian(self, u):
        k_diag, k_off = stiffness_tridiagonal(self.mesh, self.model, u)
        if not self._dense:
            return self._jac_mass + SymTridiagonal(k_diag, k_off)
        J = self._jac_mass.copy()
        idx = np.arange(self.mesh.n_nodes)
        J[idx, idx] += k_diag
        J[idx[:-1], idx[1:]] += k_off
        J[idx[1:], idx[:-1]] += k_off
        return J

    def residual_fn(self, f_ext):
        def fn(u, v, a, t):
            r = self._mass_matvec(a) + internal_force(self.mesh, self.model, u, v) - f_ext
            return r, lambda: self._jacobian(u)

        return fn

    def _dirichlet_data(self, bc: BoundaryData) -> DirichletData:
        ids = self.mesh.dirichlet_ids
        u = np.zeros(ids.size)
        v = np.zeros(ids.size)
        a = np.zeros(ids.size)
        for j, node in enumerate(ids):
            if node in bc.dirichlet:
                u[j], v[j], a[j] = bc.dirichlet[node]
        return DirichletData(ids, u, v, a)

    def step(self, state: SubdomainState, bc: BoundaryData) -> SubdomainState:
        f_ext = _point_load_vector(self.mesh.n_nodes, bc.point_loads)
        new = newmark_step(
            self.residual_fn(f_ext), state.full, self.params, self._dirichlet_data(bc)
        )
        return SubdomainState(new)

    def initial_state(self, u0, v0, bc: BoundaryData, constrained_ids=None) -> SubdomainState:
        """Consistent start state: solve the mass problem for the acceleration.

        constrained_ids defaults to the mesh Dirichlet set; passing a smaller
        set (e.g. clamps only) leaves coupling-boundary nodes free so their
        initial acceleration comes from the balance with the applied loads.
        """
        ids = self.mesh.dirichlet_ids if constrained_ids is None else np.asarray(constrained_ids, int)
        n = self.mesh.n_nodes
        f_ext = _point_load_vector(n, bc.point_loads)
        a0 = np.zeros(n)
        for node in ids:
            if int(node) in bc.dirichlet:
                a0[node] = bc.dirichlet[int(node)][2]
        mass = SymTridiagonal(self.m_diag, self.m_off)
        rhs = f_ext - internal_force(self.mesh, self.model, u0, v0) - mass.matvec(a0)
        zeros = np.zeros(ids.size)
        free = DirichletData(ids, zeros, zeros, zeros).free_indexer(n)
        a0[free] = solve_spd(mass.submatrix(free), rhs[free])
        return SubdomainState(KinematicState(u0.copy(), v0.copy(), a0, 0.0))


class RomSolver:
    """Reduced-order Newmark solver; strong BCs via reference states."""

    def __init__(
        self,
        mesh: Mesh1D,
        model: ConstitutiveModel,
        params: NewmarkParams,
        basis: PodBasis,
        extra_mass: dict | None = None,
    ):
        self.ops = RomOperators(mesh, model, basis, extra_mass=extra_mass)
        self.mesh = mesh
        self.model = model
        self.params = params
        self._inv_bdt2 = 1.0 / (params.beta * params.dt**2)

    def _refstate(self, bc: BoundaryData) -> ReferenceState:
        ids = self.mesh.dirichlet_ids
        u = np.zeros(ids.size)
        v = np.zeros(ids.size)
        a = np.zeros(ids.size)
        for j, node in enumerate(ids):
            if node in bc.dirichlet:
                u[j], v[j], a[j] = bc.dirichlet[node]
        return set_reference_state(self.mesh.n_nodes, ids, u, v, a)

    def _force_hat(self, refstate, u_hat, v_hat):
        f_hat, u_full = rom_internal_force(self.ops, refstate, u_hat, v_hat)
        return f_hat, u_full

    def _stiffness_hat(self, refstate, u_hat, u_full=None):
        if u_full is None:
            u_full = refstate.u_bar + self.ops.phi @ u_hat
        return rom_stiffness(self.ops, u_full)

    def residual_fn(self, refstate: ReferenceState, f_ext):
        f_ext_hat = reduced_external_force(self.ops, refstate, f_ext)

        def fn(u_hat, v_hat, a_hat, t):
            f_hat, u_full = self._force_hat(refstate, u_hat, v_hat)
            r = self.ops.m_hat @ a_hat + f_hat - f_ext_hat
            return r, lambda: self.ops.m_hat * self._inv_bdt2 + self._stiffness_hat(
                refstate, u_hat, u_full
            )

        return fn

    def step(self, state: SubdomainState, bc: BoundaryData) -> SubdomainState:
        refstate = self._refstate(bc)
        f_ext = _point_load_vector(self.mesh.n_nodes, bc.point_loads)
        new_red = newmark_step(self.residual_fn(refstate, f_ext), state.reduced, self.params)
        u, v, a = reconstruct(self.ops, refstate, new_red.u, new_red.v, new_red.a)
        return SubdomainState(KinematicState(u, v, a, new_red.t), new_red)

    def initial_state(self, u0, v0, bc: BoundaryData) -> SubdomainState:
        refstate = self._refstate(bc)
        phi = self.ops.phi
        u_hat = phi.T @ u0
        v_hat = phi.T @ v0
        f_ext = _point_load_vector(self.mesh.n_nodes, bc.point_loads)
        f_hat, _ = self._force_hat(refstate, u_hat, v_hat)
        rhs = reduced_external_force(self.ops, refstate, f_ext) - f_hat
        a_hat = solve_spd(self.ops.m_hat, rhs)
        u, v, a = reconstruct(self.ops, refstate, u_hat, v_hat, a_hat)
        return SubdomainState(
            KinematicState(u, v, a, 0.0), KinematicState(u_hat, v_hat, a_hat, 0.0)
        )


class HromSolver(RomSolver):
    """Hyper-reduced solver: sampled weighted assembly of force and tangent."""

    def __init__(
        self,
        mesh: Mesh1D,
        model: ConstitutiveModel,
        params: NewmarkParams,
        basis: PodBasis,
        sample: EcswSampleSet,
        extra_mass: dict | None = None,
    ):
        super().__init__(mesh, model, params, basis, extra_mass=extra_mass)
        self.assembler = EcswAssembler(mesh, model, sample, basis)
        self.sample = sample

    def _force_hat(self, refstate, u_hat, v_hat):
        return self.assembler.force(refstate, u_hat, v_hat), None

    def _stiffness_hat(self, refstate, u_hat, u_full=None):
        _, k_hat = self.assembler.force_and_tangent(refstate, u_hat, None)
        return k_hat


def make_solver(mesh, model, params, variant, extra_mass=None):
    """Instantiate the solver matching a model-variant description."""
    from .schwarz import Fom, Hrom, Rom  # local import to avoid a cycle

    if isinstance(variant, Fom):
        return FomSolver(mesh, model, params, extra_mass=extra_mass)
    if isinstance(variant, Hrom):
        return HromSolver(mesh, model, params, variant.basis, variant.sample, extra_mass=extra_mass)
    if isinstance(variant, Rom):
        return RomSolver(mesh, model, params, variant.basis, extra_mass=extra_mass)
    raise ConfigurationError(f"unknown model variant {variant!r}")

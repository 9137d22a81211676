"""Alternating Schwarz coupling of full, reduced, and hyper-reduced subdomains.

Time marches over controller intervals; within each interval the subdomains
are solved in sequence (multiplicative sweeps), exchanging transmission data
until the solution increments of all three kinematic fields drop below the
coupling tolerance. Overlapping decompositions exchange Dirichlet traces on
both boundaries; non-overlapping ones alternate a relaxed Dirichlet trace
with a stress traction across the shared interface node. Every subdomain
restarts an interval from its committed state, so converged intervals are
reproducible bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .ecsw import EcswSampleSet
from .errors import ConfigurationError, IntervalFailureError
from .history import HistoryRecorder, TimeHistory
from .mesh import ConstitutiveModel, KinematicState, Mesh1D, stress_and_tangent_strain
from .newmark import NewmarkParams
from .pod import PodBasis
from .systems import (
    BoundaryData,
    FomSolver,
    SubdomainState,
    consistent_initial_acceleration,
    make_solver,
)

OVERLAPPING = "overlapping"
NON_OVERLAPPING = "non_overlapping"


@dataclass(frozen=True)
class Fom:
    """Full-order model variant marker."""


@dataclass(frozen=True)
class Rom:
    basis: PodBasis


@dataclass(frozen=True)
class Hrom:
    basis: PodBasis
    sample: EcswSampleSet


@dataclass
class SubdomainProblem:
    """One subdomain: mesh, material, integrator settings, and model variant."""

    mesh: Mesh1D
    model: ConstitutiveModel
    integrator: NewmarkParams
    variant: object = field(default_factory=Fom)
    schwarz_boundary_nodes: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __post_init__(self):
        self.schwarz_boundary_nodes = np.asarray(self.schwarz_boundary_nodes, dtype=int)

    @property
    def clamped_ids(self) -> np.ndarray:
        return np.setdiff1d(self.mesh.dirichlet_ids, self.schwarz_boundary_nodes)


TRANSFER_STRESS = "stress"
TRANSFER_CONSISTENT = "consistent"


@dataclass
class SchwarzConfig:
    """Coupling controls: tolerance, relaxation, and controller stepping.

    transfer selects the non-overlapping flux exchange: "stress" applies the
    boundary-element traction alone (leaving the receiving interface node
    with only its own half mass), while "consistent" additionally moves the
    donor side's interface inertia across (its shared-node portion as an
    implicit mass augmentation, its neighbor-node portion with the traction),
    so the converged coupled solution satisfies every equation of the uncut
    discretization.
    """

    delta: float
    controller_dt: float
    final_time: float
    theta: float = 1.0
    max_schwarz_iters: int = 50
    steps_per_interval: int = 1
    interpolate_transmission: bool = False
    transfer: str = TRANSFER_CONSISTENT
    # debug switch: drop the velocity/acceleration Dirichlet transmission and
    # prescribe only displacement traces (degrades the v and a fields; kept
    # for regression experiments)
    transmit_velocity_acceleration: bool = True

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ConfigurationError("need delta > 0")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigurationError("need theta in (0, 1]")
        if self.controller_dt <= 0.0 or self.final_time <= 0.0:
            raise ConfigurationError("need positive controller_dt and final_time")
        if self.steps_per_interval < 1:
            raise ConfigurationError("need steps_per_interval >= 1")
        if self.transfer not in (TRANSFER_STRESS, TRANSFER_CONSISTENT):
            raise ConfigurationError(f"unknown transfer mode {self.transfer!r}")


@dataclass
class DomainDecomposition:
    subdomains: list
    mode: str

    def __post_init__(self):
        if self.mode not in (OVERLAPPING, NON_OVERLAPPING):
            raise ConfigurationError(f"unknown decomposition mode {self.mode!r}")
        if len(self.subdomains) != 2:
            raise ConfigurationError("coupling driver supports exactly two subdomains")
        s1, s2 = self.subdomains
        if s1.mesh.x_left >= s2.mesh.x_left:
            raise ConfigurationError("subdomains must be ordered left to right")
        if self.mode == NON_OVERLAPPING:
            if abs(s1.mesh.x_right - s2.mesh.x_left) > 1e-12 * max(1.0, abs(s1.mesh.x_right)):
                raise ConfigurationError("non-overlapping subdomains must abut at the interface")
        else:
            if not (s2.mesh.x_left < s1.mesh.x_right <= s2.mesh.x_right):
                raise ConfigurationError("overlapping subdomains must share a nonempty overlap")

    @property
    def gamma(self) -> float:
        """Shared interface coordinate (non-overlapping mode)."""
        return self.subdomains[0].mesh.x_right

    @property
    def gamma1(self) -> float:
        """Coupling boundary of the first subdomain (its right end)."""
        return self.subdomains[0].mesh.x_right

    @property
    def gamma2(self) -> float:
        """Coupling boundary of the second subdomain (its left end)."""
        return self.subdomains[1].mesh.x_left


@dataclass
class SchwarzStats:
    total_iterations: int
    per_interval: np.ndarray
    wall_seconds: float


def relax(previous_lambda, new_data, theta: float):
    """Convex combination of old transmission data with a fresh trace."""
    return tuple(theta * n + (1.0 - theta) * p for p, n in zip(previous_lambda, new_data))


def overlapping_transmission(mesh: Mesh1D, state: KinematicState, gamma_coord: float):
    """Linearly interpolate (u, v, a) of a source subdomain at a boundary point."""
    x = mesh.node_coords
    if gamma_coord < x[0] - 1e-12 or gamma_coord > x[-1] + 1e-12:
        raise ConfigurationError(f"coordinate {gamma_coord!r} outside source domain")
    j = int(np.clip(np.searchsorted(x, gamma_coord) - 1, 0, mesh.n_elements - 1))
    w = (gamma_coord - x[j]) / (x[j + 1] - x[j])
    w = min(max(w, 0.0), 1.0)
    return tuple(
        float((1.0 - w) * f[j] + w * f[j + 1]) for f in (state.u, state.v, state.a)
    )


def interface_traction(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    u: np.ndarray,
    gamma_node: int,
    outward_normal: int,
) -> float:
    """First Piola-Kirchhoff traction P * n from the boundary-adjacent element.

    For reduced variants the caller passes the reconstructed full displacement,
    so the boundary element is always evaluated exactly regardless of any
    element sampling.
    """
    n = mesh.n_nodes
    if gamma_node not in (0, n - 1):
        raise ConfigurationError("traction extraction requires an end node")
    e = 0 if gamma_node == 0 else mesh.n_elements - 1
    i, j = mesh.elements[e]
    strain = (u[j] - u[i]) / mesh.lengths[e]
    P, _ = stress_and_tangent_strain(model, float(strain))
    return float(P) * float(outward_normal)


def check_convergence(prev_states, curr_states, delta: float):
    """Relative increment test on all three fields, concatenated across subdomains.

    Falls back to an absolute test when a denominator norm is below 1e-14.
    Returns (converged, (norm_u, norm_v, norm_a)).
    """
    norms = []
    for attr in ("u", "v", "a"):
        prev = np.concatenate([getattr(s, attr) for s in prev_states])
        curr = np.concatenate([getattr(s, attr) for s in curr_states])
        num = float(np.linalg.norm(curr - prev))
        den = float(np.linalg.norm(prev))
        norms.append(num / den if den >= 1e-14 else num)
    return all(n < delta for n in norms), tuple(norms)


class SchwarzDriver:
    """Stateful coupled-run driver holding per-subdomain solvers."""

    def __init__(self, dd: DomainDecomposition, cfg: SchwarzConfig):
        self.dd = dd
        self.cfg = cfg
        s1, s2 = dd.subdomains
        for sub in (s1, s2):
            expected_dt = cfg.controller_dt / cfg.steps_per_interval
            if abs(sub.integrator.dt - expected_dt) > 1e-12 * expected_dt:
                raise ConfigurationError(
                    "integrator dt must equal controller_dt / steps_per_interval"
                )
        self.n1 = s1.mesh.n_nodes - 1  # right end of the first subdomain
        self.n2 = 0                    # left end of the second subdomain
        if self.n1 not in s1.mesh.dirichlet_ids:
            raise ConfigurationError("first subdomain must receive Dirichlet data at its right end")
        if dd.mode == OVERLAPPING:
            if self.n2 not in s2.mesh.dirichlet_ids:
                raise ConfigurationError(
                    "second subdomain must receive Dirichlet data at its left end (overlapping)"
                )
        else:
            if self.n2 in s2.mesh.dirichlet_ids:
                raise ConfigurationError(
                    "second subdomain interface node must stay free (traction side)"
                )
        extras = [None, None]
        self._link_mass = 0.0
        if dd.mode == NON_OVERLAPPING and cfg.transfer == TRANSFER_CONSISTENT:
            # The donor side's share of the shared-node inertia moves into the
            # receiving operator; the donor's neighbor-node coupling travels
            # with the traction each sweep.
            h1 = s1.mesh.lengths[-1]
            rho1 = s1.model.density
            extras[1] = {self.n2: rho1 * h1 / 3.0}
            self._link_mass = rho1 * h1 / 6.0
        self.solvers = [
            make_solver(sub.mesh, sub.model, sub.integrator, sub.variant, extra_mass=extras[i])
            for i, sub in enumerate(dd.subdomains)
        ]
        self._prev_trace_a = None

    # -- transmission helpers -------------------------------------------------

    def _trace_for_first(self, state2: SubdomainState):
        if self.dd.mode == NON_OVERLAPPING:
            f = state2.full
            return (float(f.u[self.n2]), float(f.v[self.n2]), float(f.a[self.n2]))
        return overlapping_transmission(self.dd.subdomains[1].mesh, state2.full, self.dd.gamma1)

    def _data_for_second(self, state1: SubdomainState):
        s1 = self.dd.subdomains[0]
        if self.dd.mode == NON_OVERLAPPING:
            # Traction applied to the right subdomain; its outward normal at
            # the shared node points left.
            T = interface_traction(s1.mesh, s1.model, state1.full.u, self.n1, -1)
            if self.cfg.transfer == TRANSFER_CONSISTENT:
                T -= self._link_mass * float(state1.full.a[self.n1 - 1])
            return T
        return overlapping_transmission(s1.mesh, state1.full, self.dd.gamma2)

    def _bc_first(self, lam):
        return BoundaryData(dirichlet={self.n1: lam})

    def _bc_second(self, data):
        if self.dd.mode == NON_OVERLAPPING:
            return BoundaryData(point_loads={self.n2: data})
        return BoundaryData(dirichlet={self.n2: data})

    def _solve_subdomain(self, i, state, bc_end, bc_start=None):
        solver = self.solvers[i]
        n_sub = self.cfg.steps_per_interval
        if n_sub == 1:
            return solver.step(state, bc_end)
        current = state
        for j in range(1, n_sub + 1):
            if self.cfg.interpolate_transmission and bc_start is not None:
                bc = bc_start.interpolate(bc_end, j / n_sub)
            else:
                bc = bc_end
            current = solver.step(current, bc)
        return current

    # -- interval iteration ----------------------------------------------------

    def _predicted_trace_for_first(self, state2: SubdomainState, trace_history):
        """First-iterate transmission data: the donor trace advanced over the
        controller interval by a Taylor step whose higher derivatives come
        from extrapolating the committed acceleration history.

        This only seeds the first sweep; the converged interval is governed
        solely by the increment tolerance, so the seed affects iteration
        counts but not the answer.
        """
        u, v, a = self._trace_for_first(state2)
        dt = self.cfg.controller_dt
        history = list(trace_history) if trace_history else []
        if len(history) >= 2:
            a1 = history[-1][2]
            a2 = history[-2][2]
            jerk = (3.0 * a - 4.0 * a1 + a2) / (2.0 * dt)
            a_p = 3.0 * a - 3.0 * a1 + a2
        elif len(history) == 1:
            a1 = history[-1][2]
            jerk = (a - a1) / dt
            a_p = 2.0 * a - a1
        else:
            jerk = 0.0
            a_p = a
        u_p = u + dt * v + 0.5 * dt * dt * a + dt**3 * jerk / 6.0
        v_p = v + dt * a + 0.5 * dt * dt * jerk
        return (u_p, v_p, a_p)

    def interval(self, states, interval_index: int = 0, trace_history=None):
        """Converge one controller interval; returns (new_states, iterations)."""
        cfg = self.cfg
        bc1_start = self._bc_first(self._trace_for_first(states[1]))
        bc2_start = self._bc_second(self._data_for_second(states[0]))

        lam = (0.0, 0.0, 0.0)
        data2 = self._predicted_trace_for_first(states[1], trace_history)
        prev_full = [s.full for s in states]
        k = 0
        while True:
            k += 1
            if self.dd.mode == NON_OVERLAPPING:
                lam = relax(lam, data2, cfg.theta)
            else:
                lam = data2
            applied = lam if cfg.transmit_velocity_acceleration else (lam[0], 0.0, 0.0)
            s1_new = self._solve_subdomain(0, states[0], self._bc_first(applied), bc1_start)
            s2_new = self._solve_subdomain(
                1, states[1], self._bc_second(self._data_for_second(s1_new)), bc2_start
            )
            data2 = self._trace_for_first(s2_new)
            curr_full = [s1_new.full, s2_new.full]
            converged, norms = check_convergence(prev_full, curr_full, cfg.delta)
            if converged:
                return [s1_new, s2_new], k
            if k >= cfg.max_schwarz_iters:
                raise IntervalFailureError(interval_index, k, norms)
            prev_full = curr_full

    # -- initialization and time marching --------------------------------------

    def _interface_nodes(self, i: int):
        return [self.n1] if i == 0 else [self.n2]

    def initial_states(self, initial_condition):
        s1, s2 = self.dd.subdomains
        lo = (s1.mesh.x_left, 0 in s1.clamped_ids)
        hi = (s2.mesh.x_right, (s2.mesh.n_nodes - 1) in s2.clamped_ids)
        states = []
        for i, sub in enumerate(self.dd.subdomains):
            states.append(
                initialize_subdomain(
                    sub,
                    self.solvers[i],
                    initial_condition,
                    self._interface_nodes(i),
                    link_mass=self._link_mass if i == 1 else 0.0,
                    extent=(lo, hi),
                )
            )
        return states

    def run(self, initial_condition, on_interval=None):
        cfg = self.cfg
        ratio = cfg.final_time / cfg.controller_dt
        n_intervals = int(round(ratio))
        if n_intervals < 1 or abs(ratio - n_intervals) > 1e-10 * max(1.0, ratio):
            raise ConfigurationError("final_time must be an integer number of controller intervals")

        t0 = time.perf_counter()
        states = self.initial_states(initial_condition)
        recorders = [
            HistoryRecorder(n_intervals + 1, sub.mesh.n_nodes) for sub in self.dd.subdomains
        ]
        for rec, s in zip(recorders, states):
            rec.record(s.full)
        per_interval = np.zeros(n_intervals, dtype=int)
        trace_history = []
        for k in range(n_intervals):
            trace_at_start = self._trace_for_first(states[1])
            states, iters = self.interval(states, k, trace_history)
            trace_history = (trace_history + [trace_at_start])[-2:]
            per_interval[k] = iters
            for rec, s in zip(recorders, states):
                rec.record(s.full)
            if on_interval is not None:
                on_interval(k, states)
        stats = SchwarzStats(
            total_iterations=int(per_interval.sum()),
            per_interval=per_interval,
            wall_seconds=time.perf_counter() - t0,
        )
        return [rec.finish() for rec in recorders], stats


def _extended_initial_acceleration(sub, initial_condition, interface_nodes, extent):
    """Initial acceleration from a virtually extended consistent-mass solve.

    The subdomain mesh is continued past each coupling boundary at its own
    spacing across the full problem extent, the initial field is evaluated
    there, and the mass problem is solved on the extension so the restriction
    matches the uncut domain's initial acceleration. Far ends of the
    extension are clamped when they coincide with a clamped outer boundary.
    Returns (a0, a_ext, ext_left).
    """
    mesh = sub.mesh
    n = mesh.n_nodes
    (x_lo, lo_clamped), (x_hi, hi_clamped) = extent
    h_l = mesh.lengths[0]
    h_r = mesh.lengths[-1]
    ext_left = (
        int(round((mesh.x_left - x_lo) / h_l)) if 0 in interface_nodes else 0
    )
    ext_right = (
        int(round((x_hi - mesh.x_right) / h_r)) if (n - 1) in interface_nodes else 0
    )
    coords = mesh.node_coords
    coords_ext = np.concatenate(
        [
            coords[0] - h_l * np.arange(ext_left, 0, -1),
            coords,
            coords[-1] + h_r * np.arange(1, ext_right + 1),
        ]
    )
    n_ext = coords_ext.size
    elements = np.column_stack([np.arange(n_ext - 1), np.arange(1, n_ext)])
    clamped_ext = list(sub.clamped_ids + ext_left)
    if ext_left and lo_clamped:
        clamped_ext.append(0)
    if ext_right and hi_clamped:
        clamped_ext.append(n_ext - 1)
    clamped_ext = np.unique(np.asarray(clamped_ext, dtype=int))
    mesh_ext = Mesh1D(coords_ext, elements, clamped_ext)
    u0_ext = np.atleast_1d(np.asarray(initial_condition(coords_ext), dtype=float))
    u0_ext[clamped_ext] = 0.0
    v0_ext = np.zeros_like(u0_ext)
    f_ext = np.zeros(n_ext)
    for end, normal, extended, far_clamped in (
        (0, -1, ext_left, lo_clamped),
        (n_ext - 1, 1, ext_right, hi_clamped),
    ):
        if extended and not far_clamped:
            x = coords_ext[end]
            h = h_l if normal == -1 else h_r
            strain = (initial_condition(x + normal * h) - initial_condition(x)) * normal / h
            P, _ = stress_and_tangent_strain(sub.model, float(strain))
            f_ext[end] = P * normal
    a_ext = consistent_initial_acceleration(
        mesh_ext, sub.model, u0_ext, v0_ext, clamped_ext, f_ext
    )
    return a_ext[ext_left : ext_left + n], a_ext, ext_left


def initialize_subdomain(
    sub: SubdomainProblem,
    solver,
    initial_condition,
    interface_nodes,
    link_mass: float = 0.0,
    extent=None,
):
    """Initial subdomain state: displacement from the initial field, zero
    velocity, and the acceleration restricted from a virtually extended
    consistent-mass solve so coupling boundaries start at the uncut balance."""
    mesh = sub.mesh
    if extent is None:
        extent = ((mesh.x_left, False), (mesh.x_right, False))
    u0 = np.atleast_1d(np.asarray(initial_condition(mesh.node_coords), dtype=float))
    clamped = sub.clamped_ids
    u0[clamped] = 0.0
    v0 = np.zeros_like(u0)
    a0, a_ext, ext_left = _extended_initial_acceleration(
        sub, initial_condition, interface_nodes, extent
    )

    if isinstance(sub.variant, Fom):
        return SubdomainState(KinematicState(u0, v0, a0, 0.0))

    loads = {}
    for node in interface_nodes:
        node = int(node)
        if node in mesh.dirichlet_ids:
            continue  # Dirichlet-receiving boundary; carried by the reference state
        x = mesh.node_coords[node]
        normal = 1 if node == mesh.n_nodes - 1 else -1
        h = mesh.lengths[-1] if normal == 1 else mesh.lengths[0]
        strain = (initial_condition(x + normal * h) - initial_condition(x)) * normal / h
        P, _ = stress_and_tangent_strain(sub.model, float(strain))
        T = P * normal
        if link_mass:
            neighbor = ext_left - 1 if node == 0 else ext_left + mesh.n_nodes
            T -= link_mass * float(a_ext[neighbor])
        loads[node] = T
    bc0 = BoundaryData(
        dirichlet={int(d): (float(u0[d]), 0.0, float(a0[d])) for d in mesh.dirichlet_ids},
        point_loads=loads,
    )
    return solver.initial_state(u0, v0, bc0)


def schwarz_interval(dd: DomainDecomposition, cfg: SchwarzConfig, states, interval_index: int = 0):
    """Converge a single controller interval from given per-subdomain states."""
    return SchwarzDriver(dd, cfg).interval(states, interval_index)


def run_coupled(dd: DomainDecomposition, cfg: SchwarzConfig, initial_condition, on_interval=None):
    """March the coupled problem from 0 to the final time.

    Returns (histories, stats) with one TimeHistory per subdomain recorded at
    every controller-interval end, including the initial state.
    """
    return SchwarzDriver(dd, cfg).run(initial_condition, on_interval)


def run_single(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    params: NewmarkParams,
    final_time: float,
    initial_condition,
) -> TimeHistory:
    """Monolithic full-order reference run on a single mesh."""
    ratio = final_time / params.dt
    n_steps = int(round(ratio))
    if n_steps < 1 or abs(ratio - n_steps) > 1e-10 * max(1.0, ratio):
        raise ConfigurationError("final_time must be an integer number of steps")
    solver = FomSolver(mesh, model, params)
    u0 = np.atleast_1d(np.asarray(initial_condition(mesh.node_coords), dtype=float))
    u0[mesh.dirichlet_ids] = 0.0
    v0 = np.zeros_like(u0)
    state = solver.initial_state(u0, v0, BoundaryData())
    recorder = HistoryRecorder(n_steps + 1, mesh.n_nodes)
    recorder.record(state.full)
    bc = BoundaryData()
    for _ in range(n_steps):
        state = solver.step(state, bc)
        recorder.record(state.full)
    return recorder.finish()

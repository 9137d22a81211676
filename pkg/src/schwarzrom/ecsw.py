"""Energy-conserving sampling and weighting for hyper-reduced assembly.

A training system collects projected per-element internal-force contributions
of reconstructed snapshots; a sparse nonnegative weight vector is then found
by active-set nonnegative least squares with an early-termination rule on the
solution step size. Weighted sums over the sampled elements replace full
force and tangent assembly in the hyper-reduced model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError
from .mesh import (
    ConstitutiveModel,
    Mesh1D,
    element_strains,
    internal_force,
    stress_and_tangent_strain,
)
from .pod import PodBasis
from .rom import ReferenceState

TERMINATED_KKT = "kkt"
TERMINATED_STEP = "step"
TERMINATED_MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class EcswTrainingSystem:
    """Stacked projected element contributions C and assembled targets d.

    Row block s holds the mode-space contribution of each element for
    training snapshot s; summing a block across elements reproduces the
    corresponding block of d (the unit-weight identity), which is asserted on
    construction.
    """

    C: np.ndarray  # (n_modes * n_snapshots, n_elements)
    d: np.ndarray  # (n_modes * n_snapshots,)
    snapshot_count: int
    mode_count: int

    def __post_init__(self):
        expected_rows = self.snapshot_count * self.mode_count
        if self.C.shape[0] != expected_rows or self.d.shape != (expected_rows,):
            raise ConfigurationError("training system shape mismatch")
        d_norm = np.linalg.norm(self.d)
        if d_norm > 0.0:
            unit_gap = np.linalg.norm(self.C.sum(axis=1) - self.d) / d_norm
            if unit_gap > 1e-10:
                raise ConfigurationError(
                    f"unit-weight identity violated: relative gap {unit_gap:.3e}"
                )

    @property
    def n_elements(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class EcswSampleSet:
    """Sparse nonnegative element weights and the sampled element ids.

    sampled_ids contains every element with a positive weight plus any
    boundary-touching elements that were force-included (possibly with zero
    weight) so interface quantities stay evaluable.
    """

    weights: np.ndarray
    sampled_ids: np.ndarray
    residual_norm: float
    converged: bool = True
    termination: str = TERMINATED_KKT
    n_iterations: int = 0
    last_step_size: float = 0.0
    step_tolerance: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0.0):
            raise ConfigurationError("ECSW weights must be nonnegative")
        ids = np.unique(np.asarray(self.sampled_ids, dtype=int))
        if not np.all(np.isin(np.flatnonzero(w > 0.0), ids)):
            raise ConfigurationError("sampled_ids must cover all positive weights")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sampled_ids", ids)

    @property
    def n_sampled(self) -> int:
        return int(np.count_nonzero(self.weights > 0.0))


def training_indices(n_snapshots: int, stride: int) -> np.ndarray:
    """Training-snapshot indices: every stride-th column, skipping the initial one."""
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    return np.arange(stride, n_snapshots, stride)


def build_training_system(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    basis: PodBasis,
    disp_snapshots: np.ndarray,
    vel_snapshots: np.ndarray,
) -> EcswTrainingSystem:
    """Assemble the ECSW training system from displacement/velocity snapshots.

    Each snapshot is first reconstructed through the affine approximation
    (projection onto the basis plus a reference state carrying the snapshot's
    own constrained values), then its per-element projected force
    contributions form one row block of C; d holds the projection of the
    fully assembled force at the same reconstructed states.
    """
    disp = np.asarray(disp_snapshots, dtype=float)
    vel = np.asarray(vel_snapshots, dtype=float)
    if disp.shape != vel.shape or disp.shape[0] != mesh.n_nodes:
        raise ConfigurationError("snapshot arrays must be (n_nodes, n_snapshots) and match")
    n_h = disp.shape[1]
    if n_h < 1:
        raise ConfigurationError("need at least one training snapshot")

    phi = basis.modes
    m = basis.n_modes
    dids = mesh.dirichlet_ids
    diff_rows = phi[1:, :] - phi[:-1, :]  # per element: phi[right] - phi[left]

    blocks = np.empty((n_h, m, mesh.n_elements))
    d = np.empty((n_h, m))
    for s in range(n_h):
        u_s = disp[:, s]
        v_s = vel[:, s]
        u_rec = phi @ (phi.T @ u_s)
        v_rec = phi @ (phi.T @ v_s)
        if dids.size:
            u_rec[dids] = u_s[dids]
            v_rec[dids] = v_s[dids]
        strain = element_strains(mesh, model, u_rec)
        P, _ = stress_and_tangent_strain(model, strain)
        blocks[s] = (diff_rows * P[:, None]).T
        d[s] = phi.T @ internal_force(mesh, model, u_rec, v_rec)

    return EcswTrainingSystem(
        C=blocks.reshape(n_h * m, mesh.n_elements),
        d=d.reshape(n_h * m),
        snapshot_count=n_h,
        mode_count=m,
    )


def nnls(C, d, step_tolerance: float = 1e-4, max_iters: int | None = None):
    """Active-set nonnegative least squares with step-size early termination.

    Lawson-Hanson structure: the outer loop moves the most-violating column
    into the passive set, the inner loop solves the unconstrained least
    squares on the passive set (via the Gram system) and backtracks to
    feasibility. Iteration stops at KKT optimality or as soon as successive
    outer iterates differ by less than step_tolerance in the max norm.

    Returns (x, info) with info holding residual_norm, converged, termination,
    n_iterations and last_step_size.
    """
    C = np.asarray(C, dtype=float)
    d = np.asarray(d, dtype=float)
    if C.ndim != 2 or d.shape != (C.shape[0],):
        raise ConfigurationError("need C (m, n) and d (m,)")
    if step_tolerance <= 0.0:
        raise ConfigurationError("step_tolerance must be positive")
    m, n = C.shape
    if max_iters is None:
        max_iters = max(3 * n, 30)

    G = C.T @ C
    b = C.T @ d
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    kkt_tol = 10.0 * np.finfo(float).eps * _norm1(C) * max(m, n)

    termination = TERMINATED_MAX_ITERS
    converged = False
    last_step = np.inf
    x_prev = None
    iteration = 0
    while iteration < max_iters:
        iteration += 1
        w = b - G @ x
        candidates = ~passive
        if not np.any(candidates) or np.max(w[candidates]) <= kkt_tol:
            termination = TERMINATED_KKT
            converged = True
            break
        j = np.flatnonzero(candidates)[np.argmax(w[candidates])]
        passive[j] = True

        inner_guard = 0
        while True:
            inner_guard += 1
            z = np.zeros(n)
            p_idx = np.flatnonzero(passive)
            z[p_idx] = _solve_gram(G, b, C, d, p_idx)
            if np.min(z[p_idx]) > 0.0:
                x = z
                break
            mask = passive & (z <= 0.0)
            denom = x[mask] - z[mask]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0.0, x[mask] / denom, 0.0)
            alpha = float(np.min(ratios))
            x = x + alpha * (z - x)
            passive[passive & (x <= 0.0)] = False
            x[~passive] = 0.0
            if inner_guard > 3 * n + 10:
                break

        if x_prev is not None:
            last_step = float(np.max(np.abs(x - x_prev)))
            if last_step < step_tolerance:
                termination = TERMINATED_STEP
                converged = True
                break
        x_prev = x.copy()

    residual = float(np.linalg.norm(C @ x - d))
    info = {
        "residual_norm": residual,
        "converged": converged,
        "termination": termination,
        "n_iterations": iteration,
        "last_step_size": last_step if np.isfinite(last_step) else 0.0,
    }
    return x, info


def _norm1(C):
    return float(np.max(np.abs(C).sum(axis=0))) if C.size else 0.0


def _solve_gram(G, b, C, d, p_idx):
    Gpp = G[np.ix_(p_idx, p_idx)]
    try:
        return sla.cho_solve(sla.cho_factor(Gpp), b[p_idx])
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(C[:, p_idx], d, rcond=None)
        return sol


def nnls_solve(C, d, step_tolerance: float = 1e-4, max_iters: int | None = None) -> EcswSampleSet:
    """Solve the training system for sparse nonnegative element weights."""
    x, info = nnls(C, d, step_tolerance=step_tolerance, max_iters=max_iters)
    return EcswSampleSet(
        weights=x,
        sampled_ids=np.flatnonzero(x > 0.0),
        residual_norm=info["residual_norm"],
        converged=info["converged"],
        termination=info["termination"],
        n_iterations=info["n_iterations"],
        last_step_size=info["last_step_size"],
        step_tolerance=step_tolerance,
    )


def with_boundary_elements(sample: EcswSampleSet, mesh: Mesh1D, extra_nodes=()) -> EcswSampleSet:
    """Force elements touching constrained or coupling-boundary nodes into the sample.

    Weights are unchanged (zero-weight elements contribute nothing to the
    weighted assembly) but the ids are retained so boundary stresses and
    reactions remain evaluable on the sampled mesh.
    """
    nodes = np.union1d(mesh.dirichlet_ids, np.asarray(extra_nodes, dtype=int))
    touching = np.flatnonzero(
        np.isin(mesh.elements[:, 0], nodes) | np.isin(mesh.elements[:, 1], nodes)
    )
    ids = np.union1d(sample.sampled_ids, touching)
    return EcswSampleSet(
        weights=sample.weights,
        sampled_ids=ids,
        residual_norm=sample.residual_norm,
        converged=sample.converged,
        termination=sample.termination,
        n_iterations=sample.n_iterations,
        last_step_size=sample.last_step_size,
        step_tolerance=sample.step_tolerance,
    )


class EcswAssembler:
    """Weighted sampled-element assembly of reduced force and tangent."""

    def __init__(self, mesh: Mesh1D, model: ConstitutiveModel, sample: EcswSampleSet, basis: PodBasis):
        if sample.weights.shape != (mesh.n_elements,):
            raise ConfigurationError("sample weight vector does not match mesh")
        if basis.n_dofs != mesh.n_nodes:
            raise ConfigurationError("basis does not match mesh")
        self.mesh = mesh
        self.model = model
        self.sample = sample
        self.basis = basis
        self.active = np.flatnonzero(sample.weights > 0.0)
        self.w = sample.weights[self.active]
        self.h = mesh.lengths[self.active]
        phi = basis.modes
        left = mesh.elements[self.active, 0]
        right = mesh.elements[self.active, 1]
        self.left = left
        self.right = right
        self.diff_rows = phi[right, :] - phi[left, :]

    def _sampled_response(self, refstate: ReferenceState, u_hat):
        phi = self.basis.modes
        u = refstate.u_bar + phi @ u_hat
        strain = (u[self.right] - u[self.left]) / self.h
        if self.model.kind == "henky" and np.any(strain <= -1.0):
            bad = int(np.argmin(strain))
            from .errors import InvertedElementError

            raise InvertedElementError(int(self.active[bad]), float(1.0 + strain[bad]))
        return stress_and_tangent_strain(self.model, strain)

    def force(self, refstate: ReferenceState, u_hat, v_hat):
        if self.active.size == 0:
            return np.zeros(self.basis.n_modes)
        P, _ = self._sampled_response(refstate, u_hat)
        return self.diff_rows.T @ (self.w * P)

    def force_and_tangent(self, refstate: ReferenceState, u_hat, v_hat):
        if self.active.size == 0:
            m = self.basis.n_modes
            return np.zeros(m), np.zeros((m, m))
        P, dP = self._sampled_response(refstate, u_hat)
        f_hat = self.diff_rows.T @ (self.w * P)
        scaled = self.diff_rows * (self.w * dP / self.h)[:, None]
        k_hat = scaled.T @ self.diff_rows
        return f_hat, k_hat


def hrom_assemble(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    sample: EcswSampleSet,
    basis: PodBasis,
    refstate: ReferenceState,
    u_hat,
    v_hat,
):
    """Reduced internal force and tangent from the weighted sampled elements."""
    return EcswAssembler(mesh, model, sample, basis).force_and_tangent(refstate, u_hat, v_hat)

"""Snapshot collection and proper orthogonal decomposition.

Bases are left singular vectors of the snapshot matrix after the rows at
constrained dofs have been zeroed, so every mode vanishes identically at
Dirichlet nodes and boundary data can be carried by a reference state. Mode
signs are fixed by forcing the largest-magnitude entry of each mode to be
nonnegative, which makes bases reproducible across runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .history import TimeHistory

DISPLACEMENT = "displacement"
VELOCITY = "velocity"
ACCELERATION = "acceleration"
FIELD_KINDS = (DISPLACEMENT, VELOCITY, ACCELERATION)


@dataclass(frozen=True)
class SnapshotMatrix:
    """Solution vectors stored column-wise with their sampling times."""

    columns: np.ndarray  # (n_dofs, n_snapshots)
    field_kind: str
    times: np.ndarray    # (n_snapshots,)

    def __post_init__(self):
        if self.field_kind not in FIELD_KINDS:
            raise ConfigurationError(f"unknown field kind {self.field_kind!r}")
        if self.columns.ndim != 2:
            raise ConfigurationError("snapshot columns must form a 2D array")
        if self.times.shape != (self.columns.shape[1],):
            raise ConfigurationError("times must align with snapshot columns")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ConfigurationError("snapshot times must be strictly increasing")

    @property
    def n_dofs(self) -> int:
        return self.columns.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class SnapshotSet:
    """Displacement, velocity, and acceleration snapshots from one run."""

    displacement: SnapshotMatrix
    velocity: SnapshotMatrix
    acceleration: SnapshotMatrix

    def field(self, kind: str) -> SnapshotMatrix:
        return getattr(self, kind)


@dataclass(frozen=True)
class PodBasis:
    """Column-orthonormal mode matrix with zero rows at constrained dofs."""

    modes: np.ndarray            # (n_dofs, n_modes)
    singular_values: np.ndarray  # all values from the snapshot SVD
    dirichlet_ids: np.ndarray
    rank_truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dirichlet_ids", np.asarray(self.dirichlet_ids, dtype=int))
        phi = self.modes
        if phi.ndim != 2:
            raise ConfigurationError("modes must form a 2D array")
        gram = phi.T @ phi
        if not np.allclose(gram, np.eye(phi.shape[1]), atol=1e-12):
            raise ConfigurationError("modes are not orthonormal to 1e-12")
        if self.dirichlet_ids.size and np.any(phi[self.dirichlet_ids, :] != 0.0):
            raise ConfigurationError("modes must vanish exactly at Dirichlet dofs")
        s = self.singular_values
        if np.any(s < 0.0) or np.any(np.diff(s) > 0.0):
            raise ConfigurationError("singular values must be nonnegative and non-increasing")

    @property
    def n_dofs(self) -> int:
        return self.modes.shape[0]

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    def truncate(self, m: int) -> "PodBasis":
        """Nested sub-basis spanned by the first m modes."""
        if not 1 <= m <= self.n_modes:
            raise ConfigurationError(f"cannot truncate basis of size {self.n_modes} to {m}")
        return PodBasis(self.modes[:, :m].copy(), self.singular_values, self.dirichlet_ids)


def collect_snapshots(run: TimeHistory, stride: int = 1) -> SnapshotSet:
    """Sample every stride-th state of a run, starting from the first.

    The final state is included whenever the run length makes it land on the
    stride grid; a stride beyond the run length keeps only the initial state.
    """
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    idx = np.arange(0, run.n_steps, stride)
    times = run.times[idx]
    return SnapshotSet(
        displacement=SnapshotMatrix(run.u[idx].T.copy(), DISPLACEMENT, times.copy()),
        velocity=SnapshotMatrix(run.v[idx].T.copy(), VELOCITY, times.copy()),
        acceleration=SnapshotMatrix(run.a[idx].T.copy(), ACCELERATION, times.copy()),
    )


def _fix_mode_signs(modes: np.ndarray) -> np.ndarray:
    for j in range(modes.shape[1]):
        k = int(np.argmax(np.abs(modes[:, j])))
        if modes[k, j] < 0.0:
            modes[:, j] = -modes[:, j]
    return modes


def _constrained_modes(modes: np.ndarray, dirichlet_ids: np.ndarray):
    """Zero the constrained rows and restore orthonormality.

    Singular vectors at or below the numerical rank are not data-determined
    and may carry content at the constrained rows; zeroing it can leave the
    set slightly non-orthonormal, which a QR pass repairs without touching
    the zero rows. Returns (modes, n_dropped) where columns that became
    linearly dependent after zeroing are dropped.
    """
    modes = modes.copy()
    if dirichlet_ids.size:
        modes[dirichlet_ids, :] = 0.0
    gram = modes.T @ modes
    defect = np.abs(gram - np.eye(modes.shape[1])).max() if modes.size else 0.0
    if defect <= 1e-13:
        return _fix_mode_signs(modes), 0
    Q, R = np.linalg.qr(modes)
    diag = np.abs(np.diag(R))
    keep = diag > 1e-10 * max(diag.max(), 1e-300)
    n_dropped = int(np.count_nonzero(~keep))
    out = Q[:, keep].copy()
    if dirichlet_ids.size:
        out[dirichlet_ids, :] = 0.0  # roundoff residue from the QR assembly
    return _fix_mode_signs(out), n_dropped


def _numerical_rank(s: np.ndarray, n: int, m: int) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = s[0] * max(n, m) * np.finfo(float).eps
    return int(np.count_nonzero(s > tol))


def compute_pod(snapshots: SnapshotMatrix, dirichlet_ids, size) -> PodBasis:
    """POD basis of the snapshot matrix with Dirichlet rows zeroed first.

    size selects the basis dimension: an integer is a mode count, a float in
    (0, 1] is an energy target and the smallest count reaching it is used.
    Requests beyond the numerical rank are truncated to the rank with a
    warning flag set on the returned basis.
    """
    return pod_of_matrix(snapshots.columns, dirichlet_ids, size)


def pod_of_matrix(columns, dirichlet_ids, size) -> PodBasis:
    """POD of a raw (n_dofs, n_snapshots) matrix; see compute_pod."""
    dirichlet_ids = np.asarray(dirichlet_ids, dtype=int)
    W = np.array(columns, dtype=float, copy=True)
    if dirichlet_ids.size:
        W[dirichlet_ids, :] = 0.0
    U, s, _ = np.linalg.svd(W, full_matrices=False)

    n, S = W.shape
    if isinstance(size, (int, np.integer)):
        m_req = int(size)
        if not 1 <= m_req <= min(n, S):
            raise ConfigurationError(
                f"mode count {m_req} outside [1, min(n_dofs, n_snapshots)={min(n, S)}]"
            )
    elif isinstance(size, float):
        if not 0.0 < size <= 1.0:
            raise ConfigurationError("energy target must lie in (0, 1]")
        energies = np.cumsum(s**2)
        total = energies[-1]
        if total == 0.0:
            raise ConfigurationError("all singular values vanish; energy target undefined")
        m_req = int(np.searchsorted(energies / total, size - 1e-15) + 1)
        m_req = min(m_req, s.size)
    else:
        raise ConfigurationError(f"size must be an int count or float energy target, got {size!r}")

    rank = _numerical_rank(s, n, S)
    truncated = False
    if m_req > rank:
        warnings.warn(
            f"requested {m_req} modes but snapshot matrix has numerical rank {rank}; truncating",
            stacklevel=2,
        )
        m_req = max(rank, 1)
        truncated = True

    modes, n_dropped = _constrained_modes(U[:, :m_req], dirichlet_ids)
    if n_dropped:
        truncated = True
    return PodBasis(modes, s.copy(), dirichlet_ids, rank_truncated=truncated)


def pod_energy(singular_values, m: int) -> float:
    """Fraction of snapshot energy captured by the leading m modes."""
    s = np.asarray(singular_values, dtype=float)
    if m < 1:
        raise ConfigurationError("mode count must be >= 1")
    total = float(np.sum(s**2))
    if total == 0.0:
        raise ConfigurationError("all singular values vanish; energy undefined")
    return float(np.sum(s[: min(m, s.size)] ** 2) / total)


def combine_bases(phi_u: PodBasis, phi_a: PodBasis, size: int) -> PodBasis:
    """Merge two bases by an SVD of their horizontal concatenation.

    Removes linear dependencies between the inputs (e.g. displacement and
    acceleration modes) and returns the leading `size` left singular vectors.
    """
    if phi_u.n_dofs != phi_a.n_dofs:
        raise ConfigurationError("bases must share the dof count")
    if not np.array_equal(phi_u.dirichlet_ids, phi_a.dirichlet_ids):
        raise ConfigurationError("bases must share the Dirichlet set")
    W = np.hstack([phi_u.modes, phi_a.modes])
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    rank = _numerical_rank(s, *W.shape)
    truncated = False
    m = int(size)
    if not 1 <= m <= W.shape[1]:
        raise ConfigurationError(f"combined size {m} outside [1, {W.shape[1]}]")
    if m > rank:
        warnings.warn(
            f"requested {m} combined modes but concatenation has rank {rank}; truncating",
            stacklevel=2,
        )
        m = max(rank, 1)
        truncated = True
    modes, n_dropped = _constrained_modes(U[:, :m], phi_u.dirichlet_ids)
    if n_dropped:
        truncated = True
    return PodBasis(modes, s.copy(), phi_u.dirichlet_ids, rank_truncated=truncated)


def projection_error(snapshots: SnapshotMatrix, basis: PodBasis) -> float:
    """Relative residual of orthogonally projecting snapshots onto a basis.

    Aggregates all columns through the stacked (Frobenius) norm; with the
    orthonormal bases produced here the pseudo-inverse in the projector
    reduces to the transpose.
    """
    W = snapshots.columns
    denom = float(np.linalg.norm(W))
    if denom == 0.0:
        raise ConfigurationError("snapshots have zero norm; projection error undefined")
    phi = basis.modes
    residual = W - phi @ (phi.T @ W)
    return float(np.linalg.norm(residual) / denom)

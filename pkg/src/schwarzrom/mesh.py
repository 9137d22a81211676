"""1D finite-element core: meshes, constitutive models, mass and force assembly.

Two-node linear elements on a strictly increasing coordinate array. Stretch is
constant on each element, so one-point stress evaluation is exact and every
element contributes a closed-form force pair and stiffness block. Forces are
per unit cross-sectional area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvertedElementError

HENKY = "henky"
LINEAR_ELASTIC = "linear_elastic"


@dataclass(frozen=True)
class ConstitutiveModel:
    """Hyperelastic bar material: kind is 'henky' or 'linear_elastic'.

    The Henky model uses logarithmic strain eps = log(stretch) with quadratic
    energy density W = (E/2) eps^2; the linear elastic model uses
    eps = stretch - 1 with the same energy form.
    """

    kind: str
    youngs_modulus: float
    density: float

    def __post_init__(self):
        if self.kind not in (HENKY, LINEAR_ELASTIC):
            raise ConfigurationError(f"unknown constitutive model kind {self.kind!r}")
        if self.youngs_modulus <= 0.0:
            raise ConfigurationError("Young's modulus must be positive")
        if self.density <= 0.0:
            raise ConfigurationError("density must be positive")

    @property
    def wave_speed(self) -> float:
        return float(np.sqrt(self.youngs_modulus / self.density))


def henky(youngs_modulus: float, density: float) -> ConstitutiveModel:
    return ConstitutiveModel(HENKY, youngs_modulus, density)


def linear_elastic(youngs_modulus: float, density: float) -> ConstitutiveModel:
    return ConstitutiveModel(LINEAR_ELASTIC, youngs_modulus, density)


@dataclass(frozen=True)
class Mesh1D:
    """Spatial discretization of one subdomain.

    node_coords are reference coordinates (strictly increasing); elements are
    (i, i+1) node-index pairs; dirichlet_ids hold the constrained node set
    (end clamps and any coupling boundary nodes that receive prescribed data).
    """

    node_coords: np.ndarray
    elements: np.ndarray
    dirichlet_ids: np.ndarray
    free_ids: np.ndarray = field(init=False)
    lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        coords = np.asarray(self.node_coords, dtype=float)
        elems = np.asarray(self.elements, dtype=int)
        dids = np.unique(np.asarray(self.dirichlet_ids, dtype=int))
        if coords.ndim != 1 or coords.size < 2:
            raise ConfigurationError("mesh needs at least two nodes")
        if np.any(np.diff(coords) <= 0.0):
            raise ConfigurationError("node coordinates must be strictly increasing")
        if elems.shape != (coords.size - 1, 2) or np.any(
            elems != np.column_stack([np.arange(coords.size - 1), np.arange(1, coords.size)])
        ):
            raise ConfigurationError("elements must span adjacent nodes (i, i+1)")
        if dids.size and (dids.min() < 0 or dids.max() >= coords.size):
            raise ConfigurationError("dirichlet node index out of range")
        object.__setattr__(self, "node_coords", coords)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "dirichlet_ids", dids)
        object.__setattr__(self, "free_ids", np.setdiff1d(np.arange(coords.size), dids))
        object.__setattr__(self, "lengths", np.diff(coords))

    @property
    def n_nodes(self) -> int:
        return self.node_coords.size

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def x_left(self) -> float:
        return float(self.node_coords[0])

    @property
    def x_right(self) -> float:
        return float(self.node_coords[-1])

    def with_dirichlet(self, extra_ids) -> "Mesh1D":
        """Return a copy with additional constrained node indices."""
        ids = np.union1d(self.dirichlet_ids, np.asarray(extra_ids, dtype=int))
        return Mesh1D(self.node_coords, self.elements, ids)

    def node_at(self, x: float, tol: float = 1e-12) -> int:
        """Index of the node at coordinate x (within absolute tolerance)."""
        i = int(np.argmin(np.abs(self.node_coords - x)))
        if abs(self.node_coords[i] - x) > tol * max(1.0, abs(x)):
            raise ConfigurationError(f"no mesh node at x={x!r}")
        return i


@dataclass
class KinematicState:
    """Displacement, velocity, and acceleration vectors at one time instant."""

    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    t: float

    def copy(self) -> "KinematicState":
        return KinematicState(self.u.copy(), self.v.copy(), self.a.copy(), self.t)


def build_uniform_mesh(
    x_left: float,
    x_right: float,
    dx: float,
    clamped_left: bool = False,
    clamped_right: bool = False,
) -> Mesh1D:
    """Build a uniform mesh on [x_left, x_right] with element size dx.

    The span must be an integer multiple of dx (relative tolerance 1e-10);
    clamped ends enter the Dirichlet set.
    """
    span = x_right - x_left
    if span <= 0.0 or dx <= 0.0:
        raise ConfigurationError("need x_right > x_left and dx > 0")
    ratio = span / dx
    n_el = int(round(ratio))
    if n_el < 1 or abs(ratio - n_el) > 1e-10 * max(1.0, ratio):
        raise ConfigurationError(
            f"span {span!r} is not an integer multiple of dx {dx!r}"
        )
    coords = x_left + span * np.arange(n_el + 1) / n_el
    elements = np.column_stack([np.arange(n_el), np.arange(1, n_el + 1)])
    dirichlet = []
    if clamped_left:
        dirichlet.append(0)
    if clamped_right:
        dirichlet.append(n_el)
    return Mesh1D(coords, elements, np.asarray(dirichlet, dtype=int))


def stress_and_tangent(model: ConstitutiveModel, stretch):
    """First Piola-Kirchhoff stress P(stretch) and tangent dP/dstretch.

    Henky: P = E log(stretch)/stretch, dP = E (1 - log stretch)/stretch^2.
    Linear elastic: P = E (stretch - 1), dP = E.
    Accepts scalars or arrays; raises InvertedElementError for non-positive
    stretch under the Henky model (element id unknown at this level).
    """
    lam = np.asarray(stretch, dtype=float)
    if model.kind == HENKY and np.any(lam <= 0.0):
        bad = int(np.argmin(lam)) if lam.ndim else -1
        raise InvertedElementError(bad, float(lam.min()) if lam.ndim else float(lam))
    P, dP = stress_and_tangent_strain(model, lam - 1.0)
    if lam.ndim == 0:
        return float(P), float(dP)
    return P, dP


def stress_and_tangent_strain(model: ConstitutiveModel, strain):
    """Stress and tangent from the engineering strain s = stretch - 1.

    Evaluating through the strain avoids the precision loss of forming the
    stretch 1 + s and subtracting 1 again when strains sit near machine
    epsilon, which matters for the tight solver tolerances used here.
    """
    s = np.asarray(strain, dtype=float)
    E = model.youngs_modulus
    if model.kind == HENKY:
        if np.any(s <= -1.0):
            bad = int(np.argmin(s)) if s.ndim else -1
            raise InvertedElementError(bad, float(1.0 + (s.min() if s.ndim else s)))
        lam = 1.0 + s
        log_lam = np.log1p(s)
        P = E * log_lam / lam
        dP = E * (1.0 - log_lam) / lam**2
    else:
        P = E * s
        dP = np.broadcast_to(np.float64(E), s.shape).copy() if s.ndim else float(E)
    return P, dP


def element_strains(mesh: Mesh1D, model: ConstitutiveModel, u: np.ndarray) -> np.ndarray:
    """Per-element engineering strain du/h; raises on inversion for Henky."""
    s = np.diff(u) / mesh.lengths
    if model.kind == HENKY and np.any(s <= -1.0):
        e = int(np.argmin(s))
        raise InvertedElementError(e, float(1.0 + s[e]))
    return s


def element_stretches(mesh: Mesh1D, model: ConstitutiveModel, u: np.ndarray) -> np.ndarray:
    """Per-element stretch 1 + du/h; raises on inversion for Henky."""
    return 1.0 + element_strains(mesh, model, u)


def assemble_mass(mesh: Mesh1D, model: ConstitutiveModel) -> np.ndarray:
    """Consistent mass matrix from linear shape functions (dense, SPD).

    Each element contributes (rho0 * h_e / 6) * [[2, 1], [1, 2]].
    """
    diag, off = mass_tridiagonal(mesh, model)
    n = mesh.n_nodes
    M = np.zeros((n, n))
    idx = np.arange(n)
    M[idx, idx] = diag
    M[idx[:-1], idx[1:]] = off
    M[idx[1:], idx[:-1]] = off
    return M


def mass_tridiagonal(mesh: Mesh1D, model: ConstitutiveModel):
    """(diagonal, off-diagonal) arrays of the consistent mass matrix."""
    m = model.density * mesh.lengths / 6.0
    diag = np.zeros(mesh.n_nodes)
    diag[:-1] += 2.0 * m
    diag[1:] += 2.0 * m
    return diag, m.copy()


def internal_force(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    u: np.ndarray,
    v: np.ndarray | None = None,
) -> np.ndarray:
    """Assembled internal force vector.

    Per element the local force is P(stretch) * [-1, +1]; stretch is constant
    on linear elements so the one-point evaluation is exact. The velocity
    argument is accepted for signature parity with rate-dependent materials
    but is unused by the hyperelastic models implemented here.
    """
    s = element_strains(mesh, model, u)
    P, _ = stress_and_tangent_strain(model, s)
    f = np.zeros(mesh.n_nodes)
    f[:-1] -= P
    f[1:] += P
    return f


def tangent_stiffness(mesh: Mesh1D, model: ConstitutiveModel, u: np.ndarray) -> np.ndarray:
    """Assembled tangent stiffness, equal to the Jacobian of internal_force."""
    diag, off = stiffness_tridiagonal(mesh, model, u)
    n = mesh.n_nodes
    K = np.zeros((n, n))
    idx = np.arange(n)
    K[idx, idx] = diag
    K[idx[:-1], idx[1:]] = off
    K[idx[1:], idx[:-1]] = off
    return K


def stiffness_tridiagonal(mesh: Mesh1D, model: ConstitutiveModel, u: np.ndarray):
    """(diagonal, off-diagonal) arrays of the tangent stiffness."""
    s = element_strains(mesh, model, u)
    _, dP = stress_and_tangent_strain(model, s)
    k = dP / mesh.lengths
    diag = np.zeros(mesh.n_nodes)
    diag[:-1] += k
    diag[1:] += k
    return diag, -k


def element_contributions(
    mesh: Mesh1D,
    model: ConstitutiveModel,
    u: np.ndarray,
    v: np.ndarray | None = None,
):
    """Per-element force pairs and stiffness blocks before assembly.

    Returns (f_local, k_local) with shapes (n_elements, 2) and
    (n_elements, 2, 2), indexed by element id; summing over elements
    reproduces internal_force and tangent_stiffness exactly.
    """
    s = element_strains(mesh, model, u)
    P, dP = stress_and_tangent_strain(model, s)
    n_el = mesh.n_elements
    f_local = np.empty((n_el, 2))
    f_local[:, 0] = -P
    f_local[:, 1] = P
    k = dP / mesh.lengths
    k_local = np.empty((n_el, 2, 2))
    k_local[:, 0, 0] = k
    k_local[:, 1, 1] = k
    k_local[:, 0, 1] = -k
    k_local[:, 1, 0] = -k
    return f_local, k_local

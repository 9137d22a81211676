"""Implicit Newmark-beta stepping with Newton's method on the displacement.

The Newton unknown is the end-of-step displacement on the free dofs;
velocity and acceleration are recovered from the Newmark update formulas

    u_{n+1} = u_n + dt v_n + dt^2/2 [(1 - 2 beta) a_n + 2 beta a_{n+1}]
    v_{n+1} = v_n + dt [(1 - gamma) a_n + gamma a_{n+1}]

Constrained dofs are eliminated from the solve and held at prescribed
(u, v, a) data. Linear systems are factorized dense up to 2000 unknowns and
in symmetric-banded form beyond that (1D linear elements give tridiagonal
Jacobians).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, StepFailureError
from .mesh import ConstitutiveModel, KinematicState

DENSE_SOLVE_MAX_DOFS = 2000


@dataclass(frozen=True)
class NewmarkParams:
    """Newmark-beta parameters and Newton solve controls."""

    beta: float
    gamma: float
    dt: float
    newton_tol: float = 1e-10
    newton_max_iters: int = 25

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            raise ConfigurationError("need 0 < beta <= 0.5")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("need 0 <= gamma <= 1")
        if self.dt <= 0.0:
            raise ConfigurationError("need dt > 0")
        if self.newton_tol <= 0.0:
            raise ConfigurationError("need newton_tol > 0")


class DirichletData:
    """Prescribed (u, v, a) values at constrained dof indices."""

    def __init__(self, ids, u, v, a):
        self.ids = np.asarray(ids, dtype=int)
        self.u = np.atleast_1d(np.asarray(u, dtype=float))
        self.v = np.atleast_1d(np.asarray(v, dtype=float))
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        if not (self.ids.shape == self.u.shape == self.v.shape == self.a.shape):
            raise ConfigurationError("dirichlet ids and values must align")

    def free_indexer(self, n: int):
        """Free-dof selector: a slice when the free set is contiguous."""
        mask = np.ones(n, dtype=bool)
        mask[self.ids] = False
        free = np.flatnonzero(mask)
        if free.size and free[-1] - free[0] == free.size - 1:
            return slice(int(free[0]), int(free[-1]) + 1)
        return free


class SymTridiagonal:
    """Symmetric tridiagonal matrix stored as (diagonal, off-diagonal)."""

    def __init__(self, diag, off):
        self.diag = np.asarray(diag, dtype=float)
        self.off = np.asarray(off, dtype=float)

    @property
    def shape(self):
        n = self.diag.size
        return (n, n)

    def matvec(self, x):
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def submatrix(self, indexer):
        if isinstance(indexer, slice):
            lo = indexer.start if indexer.start is not None else 0
            hi = indexer.stop if indexer.stop is not None else self.diag.size
            return SymTridiagonal(self.diag[lo:hi], self.off[lo : hi - 1])
        return self.to_dense()[np.ix_(indexer, indexer)]

    def to_dense(self):
        n = self.diag.size
        A = np.zeros((n, n))
        idx = np.arange(n)
        A[idx, idx] = self.diag
        A[idx[:-1], idx[1:]] = self.off
        A[idx[1:], idx[:-1]] = self.off
        return A

    def __add__(self, other):
        if isinstance(other, SymTridiagonal):
            return SymTridiagonal(self.diag + other.diag, self.off + other.off)
        return self.to_dense() + other

    def scaled(self, c):
        return SymTridiagonal(c * self.diag, c * self.off)


def solve_spd(J, rhs):
    """Solve J x = rhs for a symmetric positive-definite Jacobian.

    Dense matrices use Cholesky with an LU fallback for marginally
    indefinite tangents; SymTridiagonal uses the banded solver.
    """
    if isinstance(J, SymTridiagonal):
        n = J.diag.size
        ab = np.zeros((2, n))
        ab[0, 1:] = J.off
        ab[1, :] = J.diag
        try:
            return sla.solveh_banded(ab, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            bands = np.zeros((3, n))
            bands[0, 1:] = J.off
            bands[1, :] = J.diag
            bands[2, :-1] = J.off
            return sla.solve_banded((1, 1), bands, rhs)
    try:
        return sla.cho_solve(sla.cho_factor(J, check_finite=False), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return sla.solve(J, rhs)


def _extract(J, indexer):
    if isinstance(J, SymTridiagonal):
        return J.submatrix(indexer)
    if isinstance(indexer, slice):
        return J[indexer, indexer]
    return J[np.ix_(indexer, indexer)]


def newmark_step(
    residual_fn,
    state: KinematicState,
    params: NewmarkParams,
    dirichlet: DirichletData | None = None,
) -> KinematicState:
    """Advance one Newmark step, solving the nonlinear balance with Newton.

    Parameters
    ----------
    residual_fn:
        Maps (u, v, a, t) to (residual, jacobian) where the residual is the
        full-length dynamic balance M a + f_int(u, v) - f_ext(t) and the
        jacobian is its total derivative with respect to the end-of-step
        displacement along the Newmark relations, i.e. M / (beta dt^2) + K(u).
        The jacobian may be a dense array, a SymTridiagonal, or a
        zero-argument callable returning either (evaluated only when a Newton
        update is actually solved).
    state:
        Converged state at the start of the step.
    dirichlet:
        Prescribed (u, v, a) at constrained dofs, held exactly in the result.

    Raises StepFailureError when Newton does not reach the relative residual
    tolerance within the allowed iterations.
    """
    beta, gamma, dt = params.beta, params.gamma, params.dt
    t_next = state.t + dt

    u_pred = state.u + dt * state.v + dt * dt * (0.5 - beta) * state.a
    v_pred = state.v + dt * (1.0 - gamma) * state.a

    u = u_pred.copy()
    a = np.zeros_like(u)
    v = v_pred.copy()
    if dirichlet is not None and dirichlet.ids.size:
        u[dirichlet.ids] = dirichlet.u
        v[dirichlet.ids] = dirichlet.v
        a[dirichlet.ids] = dirichlet.a
        free = dirichlet.free_indexer(u.size)
    else:
        free = slice(None)

    # u, v, a are advanced incrementally by the Newton correction; recomputing
    # a from (u - u_pred)/(beta dt^2) would cancel catastrophically at the
    # small steps used here and put a noise floor under the residual.
    inv_bdt2 = 1.0 / (beta * dt * dt)
    dv_du = gamma * dt * inv_bdt2
    r0_norm = None
    for iteration in range(params.newton_max_iters + 1):
        r, J = residual_fn(u, v, a, t_next)
        r_free = r[free]
        r_norm = float(np.linalg.norm(r_free))
        if r0_norm is None:
            r0_norm = r_norm
            if r0_norm == 0.0:
                break
        if r_norm <= params.newton_tol * r0_norm:
            break
        if iteration == params.newton_max_iters:
            raise StepFailureError(r_norm, iteration)
        if callable(J):
            J = J()
        du = solve_spd(_extract(J, free), -r_free)
        u[free] += du
        a[free] += du * inv_bdt2
        v[free] += du * dv_du

    return KinematicState(u, v, a, t_next)


def cfl_timestep(dx: float, model: ConstitutiveModel) -> float:
    """Time step matching the element transit time of the elastic wave."""
    return dx / model.wave_speed

"""Dense time histories of kinematic fields for one domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .mesh import KinematicState


@dataclass
class TimeHistory:
    """Row-per-instant record of displacement, velocity, and acceleration."""

    times: np.ndarray  # (n_steps,)
    u: np.ndarray      # (n_steps, n_nodes)
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        if not (self.u.shape == self.v.shape == self.a.shape):
            raise ConfigurationError("field arrays must share a shape")
        if self.times.shape != (self.u.shape[0],):
            raise ConfigurationError("times must align with field rows")

    @property
    def n_steps(self) -> int:
        return self.times.size

    @property
    def n_nodes(self) -> int:
        return self.u.shape[1]

    def state_at(self, i: int) -> KinematicState:
        return KinematicState(self.u[i].copy(), self.v[i].copy(), self.a[i].copy(), float(self.times[i]))

    @classmethod
    def from_states(cls, states) -> "TimeHistory":
        states = list(states)
        if not states:
            raise ConfigurationError("empty state sequence")
        return cls(
            times=np.array([s.t for s in states]),
            u=np.vstack([s.u for s in states]),
            v=np.vstack([s.v for s in states]),
            a=np.vstack([s.a for s in states]),
        )


class HistoryRecorder:
    """Preallocated recorder filled one state at a time."""

    def __init__(self, n_steps: int, n_nodes: int):
        self.times = np.empty(n_steps)
        self.u = np.empty((n_steps, n_nodes))
        self.v = np.empty((n_steps, n_nodes))
        self.a = np.empty((n_steps, n_nodes))
        self._next = 0

    def record(self, state: KinematicState):
        i = self._next
        self.times[i] = state.t
        self.u[i] = state.u
        self.v[i] = state.v
        self.a[i] = state.a
        self._next += 1

    def finish(self) -> TimeHistory:
        n = self._next
        return TimeHistory(self.times[:n], self.u[:n], self.v[:n], self.a[:n])

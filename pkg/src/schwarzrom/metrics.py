"""Error metrics and accuracy-versus-cost reporting for coupled runs."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .history import TimeHistory

METRICS_COLUMNS = [
    "label",
    "M1",
    "M2",
    "Ne1",
    "Ne2",
    "cpu_s",
    "mse_u1",
    "mse_u2",
    "mse_v1",
    "mse_v2",
    "mse_a1",
    "mse_a2",
    "NS",
]


def mse(test_history: np.ndarray, reference_history: np.ndarray) -> float:
    """Time-aggregated relative 2-norm error of one field.

    Both inputs are (n_steps, n_dofs) arrays on the same grid; the result is
    sqrt(sum_n ||test_n - ref_n||^2) / sqrt(sum_n ||ref_n||^2).
    """
    test = np.asarray(test_history, dtype=float)
    ref = np.asarray(reference_history, dtype=float)
    if test.shape != ref.shape:
        raise ConfigurationError("histories must share time grid and dof count")
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ConfigurationError("reference history is identically zero")
    return float(np.linalg.norm(test - ref) / denom)


def history_mse(test: TimeHistory, reference: TimeHistory):
    """(u, v, a) errors of one subdomain history against its reference."""
    return (
        mse(test.u, reference.u),
        mse(test.v, reference.v),
        mse(test.a, reference.a),
    )


@dataclass
class RunRecord:
    """Accuracy and cost summary of one model-variant run."""

    label: str
    cpu_seconds: float
    mse_u: tuple = (None, None)
    mse_v: tuple = (None, None)
    mse_a: tuple = (None, None)
    m1: int | None = None
    m2: int | None = None
    ne1: int | None = None
    ne2: int | None = None
    n_schwarz: int | None = None

    def __post_init__(self):
        if self.cpu_seconds <= 0.0:
            raise ConfigurationError("completed runs must report positive CPU time")
        for triple in (self.mse_u, self.mse_v, self.mse_a):
            for value in triple:
                if value is not None and value < 0.0:
                    raise ConfigurationError("errors must be nonnegative")

    @property
    def mean_displacement_mse(self) -> float | None:
        values = [m for m in self.mse_u if m is not None]
        return float(np.mean(values)) if values else None


@dataclass
class ParetoRow:
    label: str
    cpu_seconds: float
    mean_displacement_mse: float | None
    dominated: bool


def pareto_table(records) -> list[ParetoRow]:
    """Rows sorted by CPU time with Pareto-dominated runs flagged.

    A run is dominated when another run is at least as fast and at least as
    accurate, and strictly better in one of the two. Runs without an error
    measure (plain references) are never used as dominators of measured runs
    and are themselves only compared on CPU time.
    """
    rows = []
    for rec in records:
        dominated = False
        for other in records:
            if other is rec:
                continue
            a, b = other.mean_displacement_mse, rec.mean_displacement_mse
            if a is None or b is None:
                continue
            if (
                other.cpu_seconds <= rec.cpu_seconds
                and a <= b
                and (other.cpu_seconds < rec.cpu_seconds or a < b)
            ):
                dominated = True
                break
        rows.append(ParetoRow(rec.label, rec.cpu_seconds, rec.mean_displacement_mse, dominated))
    rows.sort(key=lambda r: r.cpu_seconds)
    return rows


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12e}"
    return str(value)


def write_metrics_csv(records, path):
    """One row per run with the fixed column layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.label,
                    _fmt(r.m1),
                    _fmt(r.m2),
                    _fmt(r.ne1),
                    _fmt(r.ne2),
                    _fmt(r.cpu_seconds),
                    _fmt(r.mse_u[0]),
                    _fmt(r.mse_u[1]),
                    _fmt(r.mse_v[0]),
                    _fmt(r.mse_v[1]),
                    _fmt(r.mse_a[0]),
                    _fmt(r.mse_a[1]),
                    _fmt(r.n_schwarz),
                ]
            )


def write_pareto_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "cpu_s", "mean_mse_u", "dominated"])
        for r in rows:
            writer.writerow(
                [r.label, _fmt(r.cpu_seconds), _fmt(r.mean_displacement_mse), int(r.dominated)]
            )

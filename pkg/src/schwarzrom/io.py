"""On-disk artifact formats: snapshots, bases, sample sets, solution tables.

Snapshot and basis containers carry a small line-oriented text header
followed by a raw column-major float64 payload; sample sets are plain text.
All writers are deterministic so save/load/save round-trips are
byte-identical.
"""

from __future__ import annotations

import hashlib
import sys

import numpy as np

from .ecsw import EcswSampleSet
from .errors import ConfigurationError
from .mesh import Mesh1D
from .pod import PodBasis, SnapshotMatrix

SNAPSHOT_MAGIC = "SNAPSHOT1"
BASIS_MAGIC = "PODBASIS1"
SAMPLE_MAGIC = "# ecsw-sample-set-v1"

_ENDIAN = "little" if sys.byteorder == "little" else "big"


def _payload(array: np.ndarray) -> bytes:
    data = np.asarray(array, dtype="<f8" if _ENDIAN == "little" else ">f8")
    return data.tobytes(order="F")


def _read_floats(buffer: bytes, offset: int, shape, endian: str):
    count = int(np.prod(shape))
    dtype = "<f8" if endian == "little" else ">f8"
    flat = np.frombuffer(buffer, dtype=dtype, count=count, offset=offset)
    return flat.reshape(shape, order="F").astype(float), offset + 8 * count


def write_snapshots(path, snapshots: SnapshotMatrix, dt: float | None = None):
    """Text header (magic, field kind, n, s, dt, endian) + column-major payload."""
    if dt is None:
        times = snapshots.times
        dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    header = (
        f"{SNAPSHOT_MAGIC}\n"
        f"field {snapshots.field_kind}\n"
        f"n {snapshots.n_dofs}\n"
        f"s {snapshots.n_snapshots}\n"
        f"dt {dt!r}\n"
        f"endian {_ENDIAN}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(_payload(snapshots.columns))


def read_snapshots(path) -> SnapshotMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    lines, offset = _split_header(raw, 6)
    if lines[0] != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path}: not a snapshot container")
    fields = dict(line.split(" ", 1) for line in lines[1:])
    n, s = int(fields["n"]), int(fields["s"])
    dt = float(fields["dt"])
    columns, _ = _read_floats(raw, offset, (n, s), fields["endian"])
    times = dt * np.arange(s) if s > 1 else np.zeros(1)
    return SnapshotMatrix(columns, fields["field"], times)


def _split_header(raw: bytes, n_lines: int):
    offset = 0
    lines = []
    for _ in range(n_lines):
        end = raw.index(b"\n", offset)
        lines.append(raw[offset:end].decode("ascii"))
        offset = end + 1
    return lines, offset


def write_basis(path, basis: PodBasis):
    header = (
        f"{BASIS_MAGIC}\n"
        f"n {basis.n_dofs}\n"
        f"m {basis.n_modes}\n"
        f"singular {basis.singular_values.size}\n"
        f"dirichlet {' '.join(str(i) for i in basis.dirichlet_ids)}\n"
        f"truncated {int(basis.rank_truncated)}\n"
        f"endian {_ENDIAN}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(_payload(basis.modes))
        fh.write(_payload(basis.singular_values))


def read_basis(path) -> PodBasis:
    with open(path, "rb") as fh:
        raw = fh.read()
    lines, offset = _split_header(raw, 7)
    if lines[0] != BASIS_MAGIC:
        raise ConfigurationError(f"{path}: not a basis container")
    fields = dict(line.split(" ", 1) for line in lines[1:] if " " in line or line)
    n = int(fields["n"])
    m = int(fields["m"])
    n_s = int(fields["singular"])
    dirichlet_raw = fields.get("dirichlet", "").strip()
    dirichlet = np.array(
        [int(tok) for tok in dirichlet_raw.split()] if dirichlet_raw else [], dtype=int
    )
    endian = fields["endian"]
    modes, offset = _read_floats(raw, offset, (n, m), endian)
    singular, _ = _read_floats(raw, offset, (n_s,), endian)
    return PodBasis(modes, singular, dirichlet, rank_truncated=bool(int(fields["truncated"])))


def mesh_hash(mesh: Mesh1D) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(mesh.node_coords).tobytes())
    digest.update(np.ascontiguousarray(mesh.dirichlet_ids).tobytes())
    return digest.hexdigest()[:16]


def write_sample_set(path, sample: EcswSampleSet, mesh: Mesh1D, n_modes: int, n_snapshots: int):
    """Header with the mesh hash and training sizes, then 'element_id weight' lines."""
    lines = [
        SAMPLE_MAGIC,
        f"# mesh {mesh_hash(mesh)}",
        f"# elements {sample.weights.size}",
        f"# modes {n_modes}",
        f"# snapshots {n_snapshots}",
        f"# step_tol {sample.step_tolerance!r}",
        f"# residual {sample.residual_norm!r}",
        f"# converged {int(sample.converged)}",
        f"# termination {sample.termination}",
        f"# iterations {sample.n_iterations}",
        f"# last_step {sample.last_step_size!r}",
    ]
    for e in sample.sampled_ids:
        lines.append(f"{int(e)} {sample.weights[e]:.17g}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sample_set(path, mesh: Mesh1D | None = None) -> EcswSampleSet:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != SAMPLE_MAGIC:
        raise ConfigurationError(f"{path}: not a sample-set file")
    meta = {}
    body = []
    for line in lines[1:]:
        if line.startswith("# "):
            key, _, value = line[2:].partition(" ")
            meta[key] = value
        elif line:
            body.append(line)
    if mesh is not None and meta.get("mesh") != mesh_hash(mesh):
        raise ConfigurationError(f"{path}: sample set was trained on a different mesh")
    n_el = int(meta["elements"])
    weights = np.zeros(n_el)
    ids = []
    for line in body:
        tok_id, tok_w = line.split()
        ids.append(int(tok_id))
        weights[int(tok_id)] = float(tok_w)
    return EcswSampleSet(
        weights=weights,
        sampled_ids=np.asarray(ids, dtype=int),
        residual_norm=float(meta["residual"]),
        converged=bool(int(meta["converged"])),
        termination=meta["termination"],
        n_iterations=int(meta["iterations"]),
        last_step_size=float(meta["last_step"]),
        step_tolerance=float(meta["step_tol"]),
    )


def write_solution_csv(path, x, u, v, a):
    """One nodal row per line with fixed formatting: x,u,v,a."""
    with open(path, "w", newline="\n") as fh:
        fh.write("x,u,v,a\n")
        for xi, ui, vi, ai in zip(x, u, v, a):
            fh.write(f"{xi:.12e},{ui:.12e},{vi:.12e},{ai:.12e}\n")


def write_projection_csv(path, modes, errors_by_field):
    """Projection-error curves: columns M,e_u,e_v,e_a."""
    with open(path, "w", newline="\n") as fh:
        fh.write("M,e_u,e_v,e_a\n")
        for i, m in enumerate(modes):
            e_u, e_v, e_a = (errors_by_field[f][i] for f in ("u", "v", "a"))
            fh.write(f"{m},{e_u:.12e},{e_v:.12e},{e_a:.12e}\n")

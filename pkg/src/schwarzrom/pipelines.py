"""Experiment pipelines: snapshot generation, training, coupling, reporting.

A pipeline owns an output directory with snapshots/, bases/, samples/ and
report/ subdirectories. Stages communicate through files only, so any stage
can be rerun from existing artifacts; records accumulate in
report/records.json and are rendered to CSV by the report stage.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import io
from .config import (
    FOM_KIND,
    HROM_KIND,
    PIPELINE_PREDICTIVE,
    PIPELINE_REPRODUCTIVE,
    ROM_KIND,
    ExperimentConfig,
    SideSpec,
)
from .ecsw import build_training_system, nnls_solve, training_indices, with_boundary_elements
from .errors import ConfigurationError, StageError
from .history import TimeHistory
from .mesh import build_uniform_mesh
from .metrics import RunRecord, history_mse, pareto_table, write_metrics_csv, write_pareto_csv
from .pod import SnapshotMatrix, pod_of_matrix, projection_error
from .schwarz import (
    NON_OVERLAPPING,
    OVERLAPPING,
    DomainDecomposition,
    Fom,
    Hrom,
    Rom,
    SchwarzConfig,
    SubdomainProblem,
    run_coupled,
    run_single,
)

STAGES = ("snapshots", "pod", "ecsw", "couple", "report")
FIELD_TAGS = ("u", "v", "a")


class PipelineRunner:
    """Stage executor bound to one config, scale, and output directory."""

    def __init__(self, config: ExperimentConfig, out_dir, scale_name: str = "desk"):
        self.config = config
        self.scale_name = scale_name
        self.scale = config.scale(scale_name)
        self.out = Path(out_dir)
        for sub in ("snapshots", "bases", "samples", "report"):
            (self.out / sub).mkdir(parents=True, exist_ok=True)

    # -- problem construction --------------------------------------------------

    def build_meshes(self):
        g = self.config.geometry
        if g.overlapping:
            right1 = g.split + 0.5 * g.overlap
            left2 = g.split - 0.5 * g.overlap
        else:
            right1 = left2 = g.split
        mesh1 = build_uniform_mesh(g.x_left, right1, self.scale.dx1, clamped_left=True)
        mesh1 = mesh1.with_dirichlet([mesh1.n_nodes - 1])
        mesh2 = build_uniform_mesh(left2, g.x_right, self.scale.dx2, clamped_right=True)
        if g.overlapping:
            mesh2 = mesh2.with_dirichlet([0])
        return mesh1, mesh2

    def schwarz_config(self, final_time=None) -> SchwarzConfig:
        s = self.config.schwarz
        return SchwarzConfig(
            delta=s.delta,
            controller_dt=self.scale.controller_dt,
            final_time=self.scale.final_time if final_time is None else final_time,
            theta=s.theta,
            max_schwarz_iters=s.max_iters,
            steps_per_interval=int(round(self.scale.controller_dt / self.scale.dt)),
            transfer=s.transfer,
        )

    def build_dd(self, variants=(Fom(), Fom())) -> DomainDecomposition:
        mesh1, mesh2 = self.build_meshes()
        params = self.config.integrator.params(self.scale.dt)
        sub1 = SubdomainProblem(
            mesh1, self.config.model, params, variants[0], np.array([mesh1.n_nodes - 1])
        )
        sub2 = SubdomainProblem(mesh2, self.config.model, params, variants[1], np.array([0]))
        mode = OVERLAPPING if self.config.geometry.overlapping else NON_OVERLAPPING
        return DomainDecomposition([sub1, sub2], mode)

    # -- artifact bookkeeping --------------------------------------------------

    def _snap_path(self, prefix: str, side: int, field_tag: str) -> Path:
        return self.out / "snapshots" / f"{prefix}_omega{side + 1}_{field_tag}.snap"

    def _save_histories(self, prefix, histories):
        for i, hist in enumerate(histories):
            for tag, (data, kind) in {
                "u": (hist.u, "displacement"),
                "v": (hist.v, "velocity"),
                "a": (hist.a, "acceleration"),
            }.items():
                snaps = SnapshotMatrix(data.T.copy(), kind, hist.times.copy())
                io.write_snapshots(self._snap_path(prefix, i, tag), snaps)

    def _load_history(self, prefix, side) -> TimeHistory:
        arrays = {}
        times = None
        for tag in FIELD_TAGS:
            path = self._snap_path(prefix, side, tag)
            if not path.exists():
                raise StageError("couple", f"missing snapshot artifact {path}")
            snaps = io.read_snapshots(path)
            arrays[tag] = snaps.columns.T.copy()
            times = snaps.times
        return TimeHistory(times, arrays["u"], arrays["v"], arrays["a"])

    def _records_path(self) -> Path:
        return self.out / "report" / "records.json"

    def _append_records(self, new_records):
        path = self._records_path()
        existing = []
        if path.exists():
            existing = json.loads(path.read_text())
        by_label = {r["label"]: r for r in existing}
        for rec in new_records:
            by_label[rec["label"]] = rec
        ordered = [by_label[r["label"]] for r in existing if r["label"] in by_label]
        for rec in new_records:
            if rec not in ordered:
                ordered.append(rec)
        path.write_text(json.dumps(ordered, indent=1, sort_keys=True))

    def _index(self, kind: str) -> dict:
        path = self.out / kind / "index.json"
        return json.loads(path.read_text()) if path.exists() else {}

    def _write_index(self, kind: str, index: dict):
        (self.out / kind / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True))

    # -- stages -----------------------------------------------------------------

    def run(self, stage: str = "all"):
        if stage == "all":
            for name in STAGES:
                self.run(name)
            return self
        if stage not in STAGES:
            raise ConfigurationError(f"unknown stage {stage!r}")
        try:
            getattr(self, f"stage_{stage}")()
        except StageError:
            raise
        except Exception as err:
            raise StageError(stage, str(err)) from err
        return self

    def stage_snapshots(self):
        cfg = self.config
        records = []

        train_ic = cfg.ic.build()
        dd = self.build_dd()
        histories, stats = run_coupled(dd, self.schwarz_config(self.scale.train_time), train_ic)
        self._save_histories("train", histories)
        records.append(
            {
                "label": "FOM-FOM",
                "cpu_s": stats.wall_seconds,
                "ns": int(stats.total_iterations),
                "role": "reference",
            }
        )

        if cfg.pipeline == PIPELINE_PREDICTIVE:
            eval_ic = cfg.predictive_ic.build()
            histories, stats = run_coupled(dd, self.schwarz_config(), eval_ic)
            self._save_histories("eval", histories)
            records.append(
                {
                    "label": "FOM-FOM-eval",
                    "cpu_s": stats.wall_seconds,
                    "ns": int(stats.total_iterations),
                    "role": "reference",
                }
            )

        if cfg.include_monolithic:
            g = cfg.geometry
            mesh = build_uniform_mesh(
                g.x_left, g.x_right, self.scale.dx1, clamped_left=True, clamped_right=True
            )
            import time as _time

            t0 = _time.perf_counter()
            mono = run_single(
                mesh, cfg.model, cfg.integrator.params(self.scale.dt), self.scale.train_time, train_ic
            )
            cpu = _time.perf_counter() - t0
            for tag, (data, kind) in {
                "u": (mono.u, "displacement"),
                "v": (mono.v, "velocity"),
                "a": (mono.a, "acceleration"),
            }.items():
                snaps = SnapshotMatrix(data.T.copy(), kind, mono.times.copy())
                io.write_snapshots(self.out / "snapshots" / f"mono_{tag}.snap", snaps)
            records.append({"label": "FOM", "cpu_s": cpu, "role": "reference"})

        self._append_records(records)

    def _required_basis_sizes(self):
        """Per side: the int mode counts and energy targets the variants need."""
        needed = {0: [], 1: []}
        for variant in self.config.variants:
            for i, side in enumerate(variant.sides):
                if side.kind != FOM_KIND:
                    needed[i].append(side)
        return needed

    def _projection_mode_cap(self):
        explicit = self.config.output.projection_modes
        if explicit:
            return max(explicit)
        if self.config.pipeline != PIPELINE_PREDICTIVE:
            return 0
        sizes = [
            side.modes
            for variant in self.config.variants
            for side in variant.sides
            if side.modes is not None
        ]
        return max(sizes) if sizes else 0

    def stage_pod(self):
        mesh1, mesh2 = self.build_meshes()
        meshes = (mesh1, mesh2)
        needed = self._required_basis_sizes()
        index = self._index("bases")
        train_sets = ("train",)
        if self.config.pipeline == PIPELINE_PREDICTIVE:
            train_sets = ("train", "eval")

        for prefix in train_sets:
            for i in (0, 1):
                sides = needed[i] if prefix == "train" else []
                proj_cap = self._projection_mode_cap() if self.config.pipeline == PIPELINE_PREDICTIVE else 0
                int_sizes = [s.modes for s in sides if s.modes is not None]
                energies = [s.energy for s in sides if s.energy is not None]
                cap = max(int_sizes + [proj_cap] + [0])
                if cap == 0 and not energies:
                    continue
                path = self._snap_path(prefix, i, "u")
                if not path.exists():
                    raise StageError("pod", f"missing snapshot artifact {path}")
                snaps = io.read_snapshots(path)
                mesh = meshes[i]
                max_possible = min(snaps.n_dofs, snaps.n_snapshots)
                cap = min(max(cap, 1), max_possible)
                basis_full = pod_of_matrix(snaps.columns, mesh.dirichlet_ids, int(cap))
                sigma = basis_full.singular_values

                def resolve(side_key, m):
                    m = min(m, basis_full.n_modes)
                    basis = basis_full.truncate(m) if m < basis_full.n_modes else basis_full
                    name = f"{prefix}_omega{i + 1}_{side_key}.podb"
                    io.write_basis(self.out / "bases" / name, basis)
                    index[f"{prefix}:omega{i + 1}:{side_key}"] = {"file": name, "modes": int(m)}

                for m in sorted(set(int_sizes)):
                    resolve(f"m{m}", m)
                for e in sorted(set(energies)):
                    cum = np.cumsum(sigma**2)
                    m_e = int(np.searchsorted(cum / cum[-1], e - 1e-15) + 1)
                    resolve(f"e{e!r}", m_e)
                if prefix == "eval" or (
                    self.config.pipeline == PIPELINE_PREDICTIVE and proj_cap
                ):
                    resolve(f"m{int(cap)}", int(cap))
        self._write_index("bases", index)

    def stage_ecsw(self):
        mesh1, mesh2 = self.build_meshes()
        meshes = (mesh1, mesh2)
        interface_nodes = (mesh1.n_nodes - 1, 0)
        needed = self._required_basis_sizes()
        bases_index = self._index("bases")
        index = self._index("samples")
        for i in (0, 1):
            hrom_sides = [s for s in needed[i] if s.kind == HROM_KIND]
            if not hrom_sides:
                continue
            u_snaps = io.read_snapshots(self._snap_path("train", i, "u"))
            v_snaps = io.read_snapshots(self._snap_path("train", i, "v"))
            idx = training_indices(u_snaps.n_snapshots, self.config.training.ecsw_stride)
            if idx.size == 0:
                raise StageError("ecsw", "training stride leaves no snapshots")
            disp = u_snaps.columns[:, idx]
            vel = v_snaps.columns[:, idx]
            for side in hrom_sides:
                key = f"train:omega{i + 1}:{side.size_key}"
                if key not in bases_index:
                    raise StageError("ecsw", f"missing basis for {key}; run the pod stage")
                basis = io.read_basis(self.out / "bases" / bases_index[key]["file"])
                system = build_training_system(meshes[i], self.config.model, basis, disp, vel)
                sample = nnls_solve(
                    system.C,
                    system.d,
                    step_tolerance=self.config.training.nnls_step_tol,
                    max_iters=self.config.training.nnls_max_iters,
                )
                sample = with_boundary_elements(
                    sample, meshes[i], extra_nodes=[interface_nodes[i]]
                )
                name = f"omega{i + 1}_{side.size_key}.ecsw"
                io.write_sample_set(
                    self.out / "samples" / name,
                    sample,
                    meshes[i],
                    basis.n_modes,
                    system.snapshot_count,
                )
                index[f"omega{i + 1}:{side.size_key}"] = {
                    "file": name,
                    "n_sampled": int(sample.n_sampled),
                    "converged": bool(sample.converged),
                    "termination": sample.termination,
                }
        self._write_index("samples", index)

    def _resolve_side(self, side: SideSpec, side_idx: int, mesh):
        if side.kind == FOM_KIND:
            return Fom(), None, None
        bases_index = self._index("bases")
        key = f"train:omega{side_idx + 1}:{side.size_key}"
        if key not in bases_index:
            raise StageError("couple", f"missing basis for {key}; run the pod stage")
        basis = io.read_basis(self.out / "bases" / bases_index[key]["file"])
        if side.kind == ROM_KIND:
            return Rom(basis), basis.n_modes, None
        samples_index = self._index("samples")
        skey = f"omega{side_idx + 1}:{side.size_key}"
        if skey not in samples_index:
            raise StageError("couple", f"missing sample set for {skey}; run the ecsw stage")
        sample = io.read_sample_set(self.out / "samples" / samples_index[skey]["file"], mesh)
        return Hrom(basis, sample), basis.n_modes, sample.n_sampled

    def stage_couple(self):
        cfg = self.config
        reference_prefix = "eval" if cfg.pipeline == PIPELINE_PREDICTIVE else "train"
        references = [self._load_history(reference_prefix, i) for i in (0, 1)]
        run_ic = (cfg.predictive_ic if cfg.pipeline == PIPELINE_PREDICTIVE else cfg.ic).build()
        mesh1, mesh2 = self.build_meshes()
        records = []
        for variant in cfg.variants:
            sides = []
            m_counts = []
            ne_counts = []
            for i, (side, mesh) in enumerate(zip(variant.sides, (mesh1, mesh2))):
                obj, m, ne = self._resolve_side(side, i, mesh)
                sides.append(obj)
                m_counts.append(m)
                ne_counts.append(ne)
            dd = self.build_dd(tuple(sides))
            histories, stats = run_coupled(dd, self.schwarz_config(), run_ic)
            mses = [history_mse(h, ref) for h, ref in zip(histories, references)]
            self._write_solutions(variant.label, histories)
            records.append(
                {
                    "label": variant.label,
                    "cpu_s": stats.wall_seconds,
                    "ns": int(stats.total_iterations),
                    "m1": m_counts[0],
                    "m2": m_counts[1],
                    "ne1": ne_counts[0],
                    "ne2": ne_counts[1],
                    "mse_u": [mses[0][0], mses[1][0]],
                    "mse_v": [mses[0][1], mses[1][1]],
                    "mse_a": [mses[0][2], mses[1][2]],
                    "role": "variant",
                }
            )
        self._append_records(records)

    def _write_solutions(self, label, histories):
        meshes = self.build_meshes()
        for t in self.config.output.times:
            idx = int(round(t / self.scale.controller_dt))
            for i, hist in enumerate(histories):
                if not 0 <= idx < hist.n_steps:
                    raise StageError("couple", f"output time {t} outside the run")
                if abs(hist.times[idx] - t) > 1e-9 * max(self.scale.final_time, 1e-30):
                    raise StageError("couple", f"output time {t} off the controller grid")
                safe = label.replace("/", "-").replace(" ", "_")
                path = self.out / "report" / f"solution_{safe}_omega{i + 1}_t{idx}.csv"
                io.write_solution_csv(
                    path, meshes[i].node_coords, hist.u[idx], hist.v[idx], hist.a[idx]
                )

    def stage_report(self):
        path = self._records_path()
        if not path.exists():
            raise StageError("report", "no records; run the couple stage first")
        raw = json.loads(path.read_text())
        records = []
        for r in raw:
            records.append(
                RunRecord(
                    label=r["label"],
                    cpu_seconds=r["cpu_s"],
                    mse_u=tuple(r.get("mse_u", (None, None))),
                    mse_v=tuple(r.get("mse_v", (None, None))),
                    mse_a=tuple(r.get("mse_a", (None, None))),
                    m1=r.get("m1"),
                    m2=r.get("m2"),
                    ne1=r.get("ne1"),
                    ne2=r.get("ne2"),
                    n_schwarz=r.get("ns"),
                )
            )
        write_metrics_csv(records, self.out / "report" / "metrics.csv")
        measured = [r for r in records if r.mean_displacement_mse is not None]
        write_pareto_csv(pareto_table(measured), self.out / "report" / "pareto.csv")
        if self.config.pipeline == PIPELINE_PREDICTIVE:
            self._write_projection_curves()

    def _projection_grid(self, cap):
        explicit = self.config.output.projection_modes
        if explicit:
            return [m for m in sorted(set(explicit)) if m <= cap]
        grid = sorted({*range(10, cap + 1, 10), min(100, cap), cap})
        return [m for m in grid if m >= 1]

    def _write_projection_curves(self):
        bases_index = self._index("bases")
        cap = self._projection_mode_cap()
        if cap == 0:
            return
        for i in (0, 1):
            eval_snaps = {tag: io.read_snapshots(self._snap_path("eval", i, tag)) for tag in FIELD_TAGS}
            for kind, prefix in (("predictive", "train"), ("reproductive", "eval")):
                key = f"{prefix}:omega{i + 1}:m{cap}"
                if key not in bases_index:
                    raise StageError("report", f"missing projection basis {key}")
                basis = io.read_basis(self.out / "bases" / bases_index[key]["file"])
                grid = self._projection_grid(basis.n_modes)
                errors = {tag: [] for tag in FIELD_TAGS}
                for m in grid:
                    sub = basis.truncate(m)
                    for tag in FIELD_TAGS:
                        errors[tag].append(projection_error(eval_snaps[tag], sub))
                io.write_projection_csv(
                    self.out / "report" / f"projection_error_{kind}_omega{i + 1}.csv",
                    grid,
                    errors,
                )


def pipeline_reproductive(config: ExperimentConfig, out_dir, scale: str = "desk", stage: str = "all"):
    """Snapshots from a coupled full-order run, training, coupled variants, reports."""
    if config.pipeline != PIPELINE_REPRODUCTIVE:
        raise ConfigurationError("config does not describe a reproductive pipeline")
    return PipelineRunner(config, out_dir, scale).run(stage)


def pipeline_predictive(config: ExperimentConfig, out_dir, scale: str = "desk", stage: str = "all"):
    """Train on one initial condition, evaluate coupled variants on another."""
    if config.pipeline != PIPELINE_PREDICTIVE:
        raise ConfigurationError("config does not describe a predictive pipeline")
    return PipelineRunner(config, out_dir, scale).run(stage)


def run_pipeline(config: ExperimentConfig, out_dir, scale: str = "desk", stage: str = "all"):
    if config.pipeline == PIPELINE_PREDICTIVE:
        return pipeline_predictive(config, out_dir, scale, stage)
    return pipeline_reproductive(config, out_dir, scale, stage)

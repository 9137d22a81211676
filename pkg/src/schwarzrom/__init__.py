"""Schwarz alternating-method coupling of 1D finite-element and reduced models.

Building blocks: a nonlinear 1D bar discretization (mesh), implicit Newmark
stepping (newmark), POD bases (pod), Galerkin reduced models with strong
boundary enforcement (rom), ECSW hyper-reduction (ecsw), the alternating
coupling driver (schwarz), error/cost reporting (metrics), and experiment
pipelines with a command-line front end (pipelines, cli).
"""

from .errors import (
    ConfigurationError,
    IntervalFailureError,
    InvertedElementError,
    SchwarzRomError,
    StageError,
    StepFailureError,
)
from .history import TimeHistory
from .mesh import (
    ConstitutiveModel,
    KinematicState,
    Mesh1D,
    assemble_mass,
    build_uniform_mesh,
    element_contributions,
    henky,
    internal_force,
    linear_elastic,
    stress_and_tangent,
    tangent_stiffness,
)
from .newmark import DirichletData, NewmarkParams, cfl_timestep, newmark_step
from .pod import (
    PodBasis,
    SnapshotMatrix,
    SnapshotSet,
    collect_snapshots,
    combine_bases,
    compute_pod,
    pod_energy,
    projection_error,
)
from .rom import (
    ReferenceState,
    RomOperators,
    build_rom_operators,
    reconstruct,
    rom_residual,
    set_reference_state,
)
from .ecsw import (
    EcswSampleSet,
    EcswTrainingSystem,
    build_training_system,
    hrom_assemble,
    nnls,
    nnls_solve,
    with_boundary_elements,
)
from .schwarz import (
    NON_OVERLAPPING,
    OVERLAPPING,
    DomainDecomposition,
    Fom,
    Hrom,
    Rom,
    SchwarzConfig,
    SchwarzStats,
    SubdomainProblem,
    check_convergence,
    interface_traction,
    overlapping_transmission,
    relax,
    run_coupled,
    run_single,
    schwarz_interval,
)
from .metrics import RunRecord, history_mse, mse, pareto_table

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

"""Closed-loop spin-lattice simulation with fixed-rank hierarchical
Tucker truncation and empirical stability certification."""

__version__ = "0.1.0"

from .analysis import (
    CertificateReport,
    DecayFit,
    check_practical_stability,
    check_tail_bound,
    check_transfer_bound,
    estimate_contraction,
    fit_spectral_decay,
    fit_tube_decay,
    geometric_bound,
    rank_for_tolerance,
)
from .closed_loop import (
    RankSweepResult,
    TrajectoryLog,
    compute_tube,
    run_nominal,
    run_rank_sweep,
    run_surrogate,
    run_transfer,
)
from .config import RunConfig, build_initial_state, fingerprint, parse_config
from .errors import CapabilityError, ConfigError, InsufficientDataError
from .ht import (
    DimensionTree,
    RankBudget,
    TruncationReport,
    build_balanced_tree,
    hsvd_truncate,
    node_spectra,
    truncation_residual,
)
from .model import (
    Hamiltonian,
    LatticeSpec,
    control_hamiltonian,
    feedback,
    heisenberg_drift,
    named_state,
    phase_distance,
    projector_distance,
    target_state,
    total_sz,
)
from .propagate import SplitPlan, exact_step, strang_step, term_exponential
from .tensor import (
    LocalTerm,
    ModeShape,
    State,
    apply_local_term,
    inner,
    linear_index,
    matricize,
    dematricize,
    multi_index,
    singular_values,
)

__all__ = [
    "CapabilityError",
    "CertificateReport",
    "ConfigError",
    "DecayFit",
    "DimensionTree",
    "Hamiltonian",
    "InsufficientDataError",
    "LatticeSpec",
    "LocalTerm",
    "ModeShape",
    "RankBudget",
    "RankSweepResult",
    "RunConfig",
    "SplitPlan",
    "State",
    "TrajectoryLog",
    "TruncationReport",
    "apply_local_term",
    "build_balanced_tree",
    "build_initial_state",
    "check_practical_stability",
    "check_tail_bound",
    "check_transfer_bound",
    "compute_tube",
    "control_hamiltonian",
    "dematricize",
    "estimate_contraction",
    "exact_step",
    "feedback",
    "fingerprint",
    "fit_spectral_decay",
    "fit_tube_decay",
    "geometric_bound",
    "heisenberg_drift",
    "hsvd_truncate",
    "inner",
    "linear_index",
    "matricize",
    "multi_index",
    "named_state",
    "node_spectra",
    "parse_config",
    "phase_distance",
    "projector_distance",
    "rank_for_tolerance",
    "run_nominal",
    "run_rank_sweep",
    "run_surrogate",
    "run_transfer",
    "singular_values",
    "strang_step",
    "target_state",
    "term_exponential",
    "total_sz",
    "truncation_residual",
]

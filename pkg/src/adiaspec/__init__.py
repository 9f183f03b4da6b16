"""Spectral geometry and Lyapunov exponents of adiabatically modulated
periodic Schrodinger operators.

The pipeline: `hill` resolves the unperturbed band structure and the
Bloch quasi-momentum, `geometry` builds the iso-energy picture in the
slow variable (branch points, pre-bands, pre-gaps, level lines),
`actions` turns pre-gaps into tunneling actions and the asymptotic
Lyapunov exponent, and `cocycle` measures the exponent directly from
matrix products or from long-range integration of the equation itself.
"""

from .actions import (
    ActionSet,
    AsymptoticLyapunov,
    Coefficient,
    action_with_error,
    coefficient_magnitude_window,
    compute_actions,
    lyapunov_asymptotic,
    total_T,
    tunneling_action,
    tunneling_coefficient,
)
from .cocycle import (
    CocycleSpec,
    ConjugationReport,
    LyapunovEstimate,
    MatrixFamily,
    SmallDenominatorWarning,
    cocycle_lyapunov,
    conjugation_invariance_check,
    default_z_samples,
    direct_lyapunov,
    frequency_from_epsilon,
    herman_bound_check,
    herman_family,
    model_matrix,
    theta_to_Theta,
)
from .errors import (
    AdiaspecError,
    BranchSelectionError,
    ConfigError,
    ConsistencyError,
    ConvergenceFailure,
    CoverageError,
    DegeneracyError,
    DegeneratePointError,
    InsufficientLengthError,
    InvalidInputError,
    PathError,
    ResolutionFailure,
    StallError,
)
from .geometry import (
    AnalyticPotential,
    BandLabel,
    GapLabel,
    IsoEnergyGeometry,
    RealBranch,
    StokesLine,
    WindowReport,
    analyze_window,
    best_window_energy,
    branch_points,
    complex_momentum,
    period_index,
    real_branch,
    sigma_set,
    strip_clearance,
    trace_stokes_line,
)
from .hill import (
    BandStructure,
    DiscriminantModel,
    FundamentalMatrix,
    PeriodicPotential,
    QuasiMomentumValue,
    band_edges,
    bloch_floquet,
    discriminant,
    fundamental_matrix,
    quasimomentum_main,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "AdiaspecError",
    "AnalyticPotential",
    "AsymptoticLyapunov",
    "BandLabel",
    "BandStructure",
    "BranchSelectionError",
    "Coefficient",
    "CocycleSpec",
    "ConfigError",
    "ConjugationReport",
    "ConsistencyError",
    "ConvergenceFailure",
    "CoverageError",
    "DegeneracyError",
    "DegeneratePointError",
    "DiscriminantModel",
    "FundamentalMatrix",
    "GapLabel",
    "InsufficientLengthError",
    "InvalidInputError",
    "IsoEnergyGeometry",
    "LyapunovEstimate",
    "MatrixFamily",
    "PathError",
    "PeriodicPotential",
    "QuasiMomentumValue",
    "RealBranch",
    "ResolutionFailure",
    "SmallDenominatorWarning",
    "StallError",
    "StokesLine",
    "WindowReport",
    "action_with_error",
    "analyze_window",
    "band_edges",
    "best_window_energy",
    "bloch_floquet",
    "branch_points",
    "cocycle_lyapunov",
    "coefficient_magnitude_window",
    "complex_momentum",
    "compute_actions",
    "conjugation_invariance_check",
    "default_z_samples",
    "direct_lyapunov",
    "discriminant",
    "frequency_from_epsilon",
    "fundamental_matrix",
    "herman_bound_check",
    "herman_family",
    "lyapunov_asymptotic",
    "model_matrix",
    "period_index",
    "quasimomentum_main",
    "real_branch",
    "sigma_set",
    "strip_clearance",
    "theta_to_Theta",
    "total_T",
    "trace_stokes_line",
    "tunneling_action",
    "tunneling_coefficient",
]

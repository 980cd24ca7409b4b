"""Photon-count statistics for two independent U(1)-invariant Bose sources."""

__version__ = "0.1.0"

from .detectors import (  # noqa: E402
    Completeness,
    DetectorArray,
    DetectorMatrix,
    DilatedNetwork,
    build_dilation,
    homodyne_pair,
    mean_count,
    mean_field_count,
    paper_pair,
    scale_array,
    validate_array,
)
from .errors import (  # noqa: E402
    BosecountError,
    BudgetExceeded,
    ConfigError,
    DegenerateDetector,
    NegligibleEvidence,
    NoPeaks,
    NonHermitianOrNegative,
    NumericalError,
    OverComplete,
    ParameterError,
    PhysicsError,
)
from .interference import (  # noqa: E402
    MeanFieldEstimate,
    NoSolution,
    PeakReport,
    conditional,
    find_peaks,
    infer_phase,
    predict_counts,
    scaling_invariance_check,
)
from .kernel import (  # noqa: E402
    Backend,
    CountTable,
    JointCountDistribution,
    KernelCache,
    fock_joint,
    marginal,
    mixture_joint,
    moment_oracle,
)
from .number_stats import (  # noqa: E402
    Classification,
    NumberDistribution,
    binomial_thinning,
    classify,
    effective_moments,
    make_distribution,
    moments,
)

__all__ = [
    "Backend",
    "binomial_thinning",
    "BosecountError",
    "BudgetExceeded",
    "build_dilation",
    "Classification",
    "classify",
    "Completeness",
    "conditional",
    "ConfigError",
    "CountTable",
    "DegenerateDetector",
    "DetectorArray",
    "DetectorMatrix",
    "DilatedNetwork",
    "effective_moments",
    "find_peaks",
    "fock_joint",
    "homodyne_pair",
    "infer_phase",
    "JointCountDistribution",
    "KernelCache",
    "make_distribution",
    "marginal",
    "mean_count",
    "mean_field_count",
    "MeanFieldEstimate",
    "mixture_joint",
    "moment_oracle",
    "moments",
    "NegligibleEvidence",
    "NonHermitianOrNegative",
    "NoPeaks",
    "NoSolution",
    "NumberDistribution",
    "NumericalError",
    "OverComplete",
    "paper_pair",
    "ParameterError",
    "PeakReport",
    "PhysicsError",
    "predict_counts",
    "scale_array",
    "scaling_invariance_check",
    "validate_array",
]

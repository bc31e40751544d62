"""Numerical laboratory for averaging inequalities on the discrete torus.

Function tables on Z_m^n, structured averaging operators with separable
fast paths, exact inequality evaluators, a coefficient-recovery lab for the
shell difference identity, and extremal search over tables.
"""

__version__ = "0.1.0"

from .averaging import (
    SupportSet,
    box_average,
    build_even_box,
    build_parity_shell,
    check_radius,
    convolve,
    convolve_box_separable,
    convolve_shell_separable,
    shell_average,
)
from .identity import (
    IdentityCheck,
    IdentityCoefficients,
    coefficient_pairs,
    coefficient_scale,
    decomposition_moment,
    decomposition_term,
    decomposition_term_table,
    fit_identity_coefficients,
    shell_difference_sum,
    shell_difference_sum_table,
    verify_identity,
)
from .inequalities import (
    PROVEN_BOUND_RTOL,
    REPORT_CSV_COLUMNS,
    ProvenBoundViolation,
    RatioReport,
    approximation_ratio,
    edge_energy,
    enflo_ratio,
    pisier_ratio,
    rademacher_ratio,
    scaled_enflo_ratio,
    scheme_composite_check,
    smoothing_ratio,
)
from .kernels import AVAILABLE_BACKENDS, HAVE_NUMBA, active_backend, force_backend
from .search import (
    SCAN_CSV_COLUMNS,
    SEARCH_OBJECTIVES,
    OptimizationConfig,
    ScanRow,
    SearchOutcome,
    default_k_rule,
    gradient_check,
    maximize_ratio,
    scan_grid,
)
from .torus import (
    ExponentSpec,
    FunctionTable,
    NormSpec,
    TorusGeometry,
    as_exponent,
    as_norm,
    ell1_length,
    flip_sign,
    linf_dist,
    residue_abs,
    residue_sign,
    shift_eval,
    sign_vectors,
)

__all__ = [
    "__version__",
    "TorusGeometry",
    "FunctionTable",
    "NormSpec",
    "ExponentSpec",
    "as_norm",
    "as_exponent",
    "residue_abs",
    "residue_sign",
    "ell1_length",
    "linf_dist",
    "sign_vectors",
    "flip_sign",
    "shift_eval",
    "SupportSet",
    "check_radius",
    "build_even_box",
    "build_parity_shell",
    "convolve",
    "convolve_box_separable",
    "convolve_shell_separable",
    "box_average",
    "shell_average",
    "AVAILABLE_BACKENDS",
    "HAVE_NUMBA",
    "active_backend",
    "force_backend",
    "RatioReport",
    "ProvenBoundViolation",
    "REPORT_CSV_COLUMNS",
    "PROVEN_BOUND_RTOL",
    "edge_energy",
    "rademacher_ratio",
    "enflo_ratio",
    "scaled_enflo_ratio",
    "approximation_ratio",
    "smoothing_ratio",
    "pisier_ratio",
    "scheme_composite_check",
    "IdentityCoefficients",
    "IdentityCheck",
    "coefficient_pairs",
    "coefficient_scale",
    "decomposition_term",
    "decomposition_term_table",
    "shell_difference_sum",
    "shell_difference_sum_table",
    "fit_identity_coefficients",
    "verify_identity",
    "decomposition_moment",
    "OptimizationConfig",
    "SearchOutcome",
    "ScanRow",
    "SCAN_CSV_COLUMNS",
    "SEARCH_OBJECTIVES",
    "maximize_ratio",
    "gradient_check",
    "default_k_rule",
    "scan_grid",
]

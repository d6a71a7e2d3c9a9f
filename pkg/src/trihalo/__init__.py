"""Interpolation and restriction operators for halo exchange across 3:1
cell-centred AMR patch boundaries: per-axis linear baseline, its collapsed
sparse-matrix form, and second/third-order expansion-based schemes, with a
validation and benchmarking harness."""

from .csr import CsrOperator, OperatorKey, apply, dump_operator, extract_half, extract_segment, from_triplets
from .errors import (
    ConfigurationError,
    ContractViolationError,
    SingularFitError,
    StencilInfeasibleError,
    TrihaloError,
)
from .geometry import (
    DEFAULT_UNKNOWNS,
    FaceConfig,
    HaloBuffer,
    RegionShape,
    ReferenceFrame,
    from_reference,
    interp_source_shape,
    interp_target_shape,
    reference_frame,
    restrict_source_shape,
    restrict_target_shape,
    to_reference,
)
from .harness import (
    BenchReport,
    ConvergenceReport,
    run_bench,
    run_consistency_suite,
    run_convergence,
    run_unit_oracle,
    sample_field,
)
from .linear import AxisOperator, apply_tensor_interpolate, apply_tensor_restrict, build_axis_normal, build_axis_tangential, collapse_to_matrix
from .schemes import SCHEMES, HaloExchange, interpolate_halo, restrict_halo, scheme_feasible
from .taylor import (
    DerivativeFit,
    OperatorCache,
    StencilSpec,
    TaylorBasis,
    build_derivative_fit,
    build_interpolation,
    build_restriction,
    nearest_source_cell,
    operator_cache_get,
    select_stencil,
    taylor_basis,
)

__version__ = "0.1.0"

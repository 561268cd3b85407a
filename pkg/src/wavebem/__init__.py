"""Boundary-element solver for acoustic wave transmission problems.

Laplace-domain boundary integral operators on two-subdomain skeletons,
a single-trace variational formulation with Dirichlet, Neumann and
impedance boundary parts, and a convolution-quadrature time march.
"""

from wavebem.calderon import (
    build_block_calderon,
    calderon_residual,
    frequency_scaling,
    pairing,
    scale_traces,
)
from wavebem.cq import (
    TimeMarchResult,
    bdf_delta,
    contour_radius,
    cq_march,
    cq_weights,
    reconstruct_time_field,
    time_domain_coercivity_sum,
)
from wavebem.mesh import (
    MaterialParams,
    SurfaceMesh,
    generate_builtin,
    icosphere,
    load_mesh,
    orientation_sign,
    refine,
    save_mesh,
    split_ball,
    subdomain_surface,
    validate_mesh,
)
from wavebem.operators import (
    QuadratureOrders,
    assemble_operators,
    double_layer_potential,
    single_layer_potential,
)
from wavebem.signals import (
    CausalPulse,
    CausalRamp,
    point_source_field,
    point_source_traces,
    polar_cap_bump,
)
from wavebem.solver import (
    SIGMA0_DEFAULT,
    AssembledSystem,
    ImpedanceOperator,
    LaplaceSolveResult,
    NumericsError,
    TransmissionProblem,
    assemble_rhs,
    assemble_system,
    default_transfer,
    impedance_default,
    reconstruct_field,
    solve_frequency,
)
from wavebem.tracespace import (
    MultiTraceVector,
    build_single_trace_map,
    classify_dofs,
    discrete_norm,
    offset_traces,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "CausalPulse",
    "CausalRamp",
    "ImpedanceOperator",
    "LaplaceSolveResult",
    "MaterialParams",
    "MultiTraceVector",
    "NumericsError",
    "QuadratureOrders",
    "SIGMA0_DEFAULT",
    "SurfaceMesh",
    "TimeMarchResult",
    "TransmissionProblem",
    "assemble_operators",
    "assemble_rhs",
    "assemble_system",
    "bdf_delta",
    "build_block_calderon",
    "build_single_trace_map",
    "calderon_residual",
    "classify_dofs",
    "contour_radius",
    "cq_march",
    "cq_weights",
    "default_transfer",
    "discrete_norm",
    "double_layer_potential",
    "frequency_scaling",
    "generate_builtin",
    "icosphere",
    "impedance_default",
    "load_mesh",
    "offset_traces",
    "orientation_sign",
    "pairing",
    "point_source_field",
    "point_source_traces",
    "polar_cap_bump",
    "reconstruct_field",
    "reconstruct_time_field",
    "refine",
    "save_mesh",
    "scale_traces",
    "single_layer_potential",
    "solve_frequency",
    "split_ball",
    "subdomain_surface",
    "time_domain_coercivity_sum",
    "validate_mesh",
    "__version__",
]

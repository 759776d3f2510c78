"""Decentralized cubic-regularized Newton over a gossip network.

Agents on a connected undirected graph jointly minimize a finite sum of
smooth convex losses, talking only to graph neighbors.  The outer loop is
an accelerated cubic-regularized scheme driven by estimate functions; each
model subproblem is solved over the consensus constraint by smoothed dual
ascent, where every dual step costs one synchronous exchange of stacked
vectors and one per-agent scale equation.
"""

from .graphs import (
    Graph,
    LaplacianSpec,
    apply_laplacian_block,
    build_laplacian,
    consensus_gap,
    generate_graph,
    graph_from_edgelist,
    graph_to_edgelist,
)
from .linalg import (
    SymEigen,
    finite_diff_gradient,
    finite_diff_hessian,
    shifted_diag_solve,
    sym_eigendecompose,
)
from .objectives import (
    LOGISTIC_CURV3,
    LogisticLocal,
    QuadraticLocal,
    StackedObjective,
    load_libsvm,
    split_shards,
    synth_classification,
)
from .cubic import (
    CubicModel,
    cubic_dual_max,
    cubic_dual_value,
    local_best_response,
    model_value,
    solve_secular,
)
from .inner import (
    InnerReport,
    InnerSettings,
    SmoothingParams,
    beta_step,
    default_radius,
    inner_iterations_bound,
    make_smoothing,
    run_inner,
)
from .outer import (
    EstimateState,
    OuterConfig,
    OuterTrace,
    build_phi_model,
    delta_schedules,
    estimate_gap_certificate,
    lambda_rate_bound,
    outer_iteration_bound,
    phi_value,
    run_outer,
    solve_alpha,
    uniform_convexity_constants,
)
from .baselines import (
    BaselineConfig,
    CenTrace,
    MethodTrace,
    cen_gm,
    dec_acc_gm,
    dec_cubic,
    dec_newton,
)
from .harness import (
    AccessRecorder,
    AgentView,
    CommLedger,
    RelaxationBracket,
    exchange_round,
    gossip_recorded,
    relaxed_constraint_oracle,
)
from .estimator import DistributedCubicClassifier

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "LaplacianSpec",
    "apply_laplacian_block",
    "build_laplacian",
    "consensus_gap",
    "generate_graph",
    "graph_from_edgelist",
    "graph_to_edgelist",
    "SymEigen",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "shifted_diag_solve",
    "sym_eigendecompose",
    "LOGISTIC_CURV3",
    "LogisticLocal",
    "QuadraticLocal",
    "StackedObjective",
    "load_libsvm",
    "split_shards",
    "synth_classification",
    "CubicModel",
    "cubic_dual_max",
    "cubic_dual_value",
    "local_best_response",
    "model_value",
    "solve_secular",
    "InnerReport",
    "InnerSettings",
    "SmoothingParams",
    "beta_step",
    "default_radius",
    "inner_iterations_bound",
    "make_smoothing",
    "run_inner",
    "EstimateState",
    "OuterConfig",
    "OuterTrace",
    "build_phi_model",
    "delta_schedules",
    "estimate_gap_certificate",
    "lambda_rate_bound",
    "outer_iteration_bound",
    "phi_value",
    "run_outer",
    "solve_alpha",
    "uniform_convexity_constants",
    "BaselineConfig",
    "CenTrace",
    "MethodTrace",
    "cen_gm",
    "dec_acc_gm",
    "dec_cubic",
    "dec_newton",
    "AccessRecorder",
    "AgentView",
    "CommLedger",
    "RelaxationBracket",
    "exchange_round",
    "gossip_recorded",
    "relaxed_constraint_oracle",
    "DistributedCubicClassifier",
    "__version__",
]

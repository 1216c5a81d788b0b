"""Simulation and verification laboratory for the vertex-reinforced jump
process and its random-potential representation.

The package is organized around one pipeline: build a weighted graph with
absorbing boundary (``graphs``), sample the random potential beta on it
(``potential``), solve the associated positive operator for partition
functions and Green entries (``operators``), and then interrogate the
solved field — renewal cuts and overshoot martingales (``renewal``), the
jump process itself (``processes``), solvable chain models (``toymodel``),
and replicated statistical suites (``estimators``, ``experiments``).
``vrjplab.cli`` exposes the whole thing as seeded, CSV-producing
experiments.
"""

__version__ = "0.1.0"

from .config import DEFAULT_CONFIG, RunConfig, Tolerances, load_run_config
from .errors import (
    ConfigError,
    DegenerateInputError,
    DegenerateSampleError,
    OracleInapplicableError,
    VrjplabError,
)
from .estimators import (
    DEGENERATE_BUDGET,
    SIGMA_POLICY,
    EstimatorSummary,
    RunResult,
    median_of_means,
    run_replicates,
    summarize,
    trend_slope,
)
from .experiments import (
    martingale_resample_check,
    moment_suite,
    phase_scan,
    rescale_conductance,
    tail_suite,
)
from .graphs import (
    ABSORBING_CLASSES,
    WeightedGraph,
    build_box_lattice,
    build_halfspace_box,
    build_toy_graph,
    component_of,
    from_edges,
    parse_graph,
    random_connected_graph,
    serialize_graph,
    unwire_absorbing,
    wire_boundary,
)
from .operators import PolymerSolve, boundary_split, green, path_sum_oracle, psi
from .potential import (
    BetaField,
    ConditionalSpec,
    condition_params,
    laplace_analytic,
    log_density,
    marginal_params,
    parse_beta,
    sample_beta,
    sample_beta_single,
    serialize_beta,
)
from .processes import (
    StopRule,
    Trajectory,
    exit_probability_annealed,
    quenched_exit_solve,
    quenched_rate_matrix,
    simulate_quenched,
    simulate_vrjp,
    trajectory_rows,
)
from .renewal import (
    RENEWAL_RTOL,
    OvershootTrace,
    RenewalDecomposition,
    conditional_expectation_mcheck,
    cut_vertices,
    exit_distribution,
    ig_tail_check,
    ig_tail_constant,
    level_mass,
    overshoot_trace,
    renewal_decompose,
    resample_mcheck_values,
)
from .reports import config_digest, trace_rows, write_csv, write_manifest
from .seeding import replicate_rng, spawn_rngs
from .toymodel import (
    ToyMomentResult,
    ToyMomentSpec,
    build_toy_chain,
    chain_partition_identity,
    comparison_chain,
    convex_order_chain_test,
    convex_order_pair,
    toy_moment_check,
    toy_moment_factorized,
    toy_uniform_bound_experiment,
)

__all__ = [
    "ABSORBING_CLASSES",
    "BetaField",
    "ConditionalSpec",
    "ConfigError",
    "DEFAULT_CONFIG",
    "DEGENERATE_BUDGET",
    "DegenerateInputError",
    "DegenerateSampleError",
    "EstimatorSummary",
    "OracleInapplicableError",
    "OvershootTrace",
    "PolymerSolve",
    "RENEWAL_RTOL",
    "RenewalDecomposition",
    "RunConfig",
    "RunResult",
    "SIGMA_POLICY",
    "StopRule",
    "Tolerances",
    "ToyMomentResult",
    "ToyMomentSpec",
    "Trajectory",
    "VrjplabError",
    "WeightedGraph",
    "boundary_split",
    "build_box_lattice",
    "build_halfspace_box",
    "build_toy_chain",
    "build_toy_graph",
    "chain_partition_identity",
    "comparison_chain",
    "component_of",
    "condition_params",
    "conditional_expectation_mcheck",
    "config_digest",
    "convex_order_chain_test",
    "convex_order_pair",
    "cut_vertices",
    "exit_distribution",
    "exit_probability_annealed",
    "from_edges",
    "green",
    "ig_tail_check",
    "ig_tail_constant",
    "laplace_analytic",
    "level_mass",
    "load_run_config",
    "log_density",
    "marginal_params",
    "martingale_resample_check",
    "median_of_means",
    "moment_suite",
    "overshoot_trace",
    "parse_beta",
    "parse_graph",
    "path_sum_oracle",
    "phase_scan",
    "psi",
    "quenched_exit_solve",
    "quenched_rate_matrix",
    "random_connected_graph",
    "renewal_decompose",
    "replicate_rng",
    "resample_mcheck_values",
    "rescale_conductance",
    "run_replicates",
    "sample_beta",
    "sample_beta_single",
    "serialize_beta",
    "serialize_graph",
    "simulate_quenched",
    "simulate_vrjp",
    "spawn_rngs",
    "summarize",
    "tail_suite",
    "toy_moment_check",
    "toy_moment_factorized",
    "toy_uniform_bound_experiment",
    "trace_rows",
    "trajectory_rows",
    "trend_slope",
    "unwire_absorbing",
    "wire_boundary",
    "write_csv",
    "write_manifest",
]

"""Approximate Nash equilibria for stationary surveillance-evasion games on a grid."""

from .eikonal import available_backends, set_backend, solve_distance, solve_eikonal, upwind_update
from .grid import (
    BLOCKED,
    FREE,
    Grid,
    InvalidArgument,
    Obstacle,
    OutOfDomain,
    build_grid,
    rasterize,
    sample_bilinear,
)
from .nash import (
    EquilibriumReport,
    Tolerances,
    adaptive_delta,
    compute_equilibrium,
    compute_equilibrium_multi,
    compute_metrics,
    perturbed_lambda,
    residual,
    sample_pareto_front,
    worst_case_check,
)
from .scenario import (
    Scenario,
    ScenarioError,
    build_context,
    bundled_scenarios,
    load_bundled,
    load_scenario,
    parse_scenario,
    write_report,
)
from .simplex import project_simplex, project_simplex_support, solve_mixing_weights, supergradient_ascent
from .trajectory import (
    Evader,
    GameContext,
    InfeasibleScenario,
    InvalidTrajectory,
    TraceError,
    Trajectory,
    evaluate_G,
    integrate_costs,
    trace_path,
)
from .visibility import (
    ObserverSet,
    compute_shadow_mask,
    observability_at,
    observability_fields,
    pointwise_observability,
    weighted_observability,
)

__version__ = "0.1.0"

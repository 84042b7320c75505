"""Risk-averse routing equilibria.

Nonatomic routing games whose players weigh uncertain path costs by
conditional value-at-risk. The package computes the resulting equilibria
exactly (closed-form risk operator) and by sample-average approximation,
runs seeded consistency experiments, and evaluates the finite-sample
guarantee constants that calibrate how many draws an approximation needs.
"""

from .bounds import (
    BoundsReport,
    ConcentrationReport,
    CostBounds,
    bounds_report,
    compute_cost_bounds,
    compute_lipschitz,
    covering_number,
    empirical_concentration_check,
    exponential_constants,
    phi_bounds,
    pointwise_concentration,
    sample_complexity,
)
from .costs import (
    AffineAdditive,
    AffineUncertainSlope,
    CvarResult,
    EmpiricalCostOperator,
    ExactCostOperator,
    cvar_operator,
    empirical_cvar,
    eval_cost,
    exact_cvar_affine_additive,
    path_cost_samples,
    reference_operator,
    uniform_cvar,
)
from .equilibrium import (
    EquilibriumResult,
    MonotonicityReport,
    SolverConfig,
    ViProblem,
    WardropReport,
    check_monotonicity_affine,
    check_wardrop,
    natural_residual,
    solve,
)
from .game import (
    FeasibleSet,
    GameSpec,
    ODPair,
    PathDef,
    diameter,
    is_feasible,
    project,
    sample_feasible,
    uniform_split,
    validate_spec,
)
from .saa import (
    ExperimentConfig,
    ExperimentError,
    ExperimentResult,
    RunRecord,
    derive_run_seed,
    distance_to_reference,
    empirical_cdf,
    exact_reference,
    run_experiment,
    solve_saa,
    write_cdf_csv,
    write_runs_csv,
    write_summary_json,
)
from .specio import (
    SpecFormatError,
    golden_spec_path,
    load_flow,
    load_golden_spec,
    load_spec,
    parse_spec,
    result_to_json,
)
from .uncertainty import (
    FiniteSamples,
    SampleSet,
    UniformBox,
    sample,
    support_vertices,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Augmented Lagrangian solver for block-structured 0/1 programs."""

from .alfunc import (
    DualState,
    Violation,
    al_value,
    block_gradient,
    classical_al_value,
    dual_subgradient,
    exact_dual_value,
    lipschitz_kappa,
    lr_dual_value,
)
from .alm import (
    AlmConfig,
    AlmResult,
    SolveTrace,
    alm_solve,
    bounds_and_gaps,
    dual_update,
    step_size,
)
from .bcd import (
    BcdConfig,
    BcdResult,
    bcd_solve,
    classical_step_exact,
    classical_step_linearized,
    is_blockwise_optimal,
    is_tau_stationary,
    prox_linear_step,
)
from .model import (
    Assignment,
    AssumptionReport,
    Block,
    BlockProblem,
    DagPaths,
    EnumerationCapError,
    ExplicitPoints,
    InfeasibleError,
    InstanceError,
    ParseError,
    Polyhedron,
    ValidationError,
    brute_force_optimum,
    check_assumptions,
    cost_value,
    instance_document,
    load_instance,
    parse_instance,
    save_instance,
    verify_assignment,
)
from .oracle import (
    OracleAnswer,
    OracleQuery,
    build_oracle,
    default_oracles,
    enumerate_feasible,
    minimize_linear,
)
from .refine import (
    ConflictGraph,
    SolutionPool,
    graph_update,
    mis_pack,
    pool_insert,
    sweep,
)
from .ttp import TrainSpec, TtpSpec, build_instance, generate_random

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

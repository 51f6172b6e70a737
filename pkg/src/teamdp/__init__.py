"""Exact solvers, reductions, and validators for finite sequential
decentralized stochastic control (team) problems."""

from .errors import (
    AbsoluteContinuityError,
    CapExceededError,
    ShapeMismatchError,
    SpecFormatError,
    TeamDpError,
)
from .model import (
    CostTable,
    DecisionMaker,
    DeterministicPolicy,
    Distribution,
    FiniteSpace,
    Kernel,
    RandomizedPolicy,
    TeamSpec,
    ValidationReport,
    count_deterministic_policies,
    deterministic_kernel,
    enumerate_deterministic_stage_policies,
    expected_cost,
    lift_policy,
    perfect_recall_expansion,
    uniform_distribution,
    validate_team,
)
from .oracle import (
    OracleResult,
    brute_force,
    path_enumeration_cost,
    randomized_sample,
    sample_randomized_policy,
)
from .reduction import (
    AbsoluteContinuityReport,
    ReducedStaticTeam,
    ReferenceMeasures,
    as_team_spec,
    check_absolute_continuity,
    default_references,
    reduced_expected_cost,
    static_reduce,
    with_prior,
)
from .solver import (
    CoState,
    ExtendedState,
    SolveResult,
    StageAction,
    StagewiseReport,
    attach_final_action,
    canonical_key,
    costate,
    initial_state,
    solve_exact,
    stagewise_iterate,
    transition,
    verify_stagewise,
)
from .strategic import (
    MembershipReport,
    StrategicMeasure,
    induce_measure,
    measure_expected_cost,
    validate_la,
    validate_lr,
)

__version__ = "0.1.0"

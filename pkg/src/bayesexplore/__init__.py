"""Incentive-compatible exploration with heterogeneous agents.

Exact LP-based explorability analysis, the public, reported and private type
policies, a per-round BIC auditor and information-theoretic diagnostics.
"""
from .explorability import (
    PRIVATE,
    PUBLIC,
    SignalStructure,
    StochasticPolicy,
    benchmark_opt,
    check_information_monotonicity,
    comparative_statics,
    delta_signal_explorable_menus,
    eventually_explorable,
    explorable_report,
    max_support_policy,
    opt_by_state,
    phase_schedule,
    signal_explorable_actions,
)
from .harness import ExperimentSpec, ExperimentSummary, run_experiment
from .lp import LinearProgram, solve
from .maxexplore import max_explore, required_length_private, required_length_public, sample_bound
from .model import (
    Instance,
    InstanceError,
    Menu,
    OutcomeDistribution,
    distinguishing_example,
    enumerate_menus,
    example1,
    load_instance,
    menu_outcome_distribution,
    resolve_instance,
)
from .policies import (
    REPORTED,
    audit_bic,
    estimate_triple_list,
    run_policy,
    run_private_policy,
    run_public_policy,
    run_reported_policy,
)
from .trace import Trace, total_reward, trace_from_csv, trace_to_csv

__version__ = "0.1.0"

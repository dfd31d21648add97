"""Multi-agent tabular Q-learning on a stochastic grid world.

Agents select arbitrary (state, action) pairs each step, treat the magnitude
of their Q-updates as a bandit reward, and share one global table. Joint
selection runs either with conflicts (one random winner per duplicated pair)
or conflict-free (pairwise-distinct proposals). The harness reproduces the
loss-curve, valid-rate, and area-ratio comparisons between the four
selection modes.
"""
from ._version import __version__
from .gridworld import (
    ACTIONS,
    N_ACTIONS,
    Action,
    GridSpec,
    SpecialCell,
    State,
    Transition,
    enumerate_pairs,
    step,
    transition_model,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    batch_series,
    config_digest,
    emit_plots,
    emit_table1,
    load_config,
    run_batch,
    run_sweep,
    save_config,
)
from .metrics import (
    MetricsSeries,
    aggregate_trials,
    area_under,
    choice_histogram,
    loss,
    valid_rate,
)
from .multiagent import (
    Conflict,
    Mode,
    Policy,
    SelectionRound,
    TrialRecord,
    TrialStreams,
    exact_two_agent_exclusion,
    fresh_agents,
    multi_agent_step,
    resolve_conflicts,
    run_trial,
    select_conflict,
    select_conflict_free,
    trial_seed,
    zero_q_table,
)
from .planner import OptimalQ, bellman_residual, greedy_policy, value_iteration
from .policies import (
    AgentBanditState,
    Schedules,
    epsilon_greedy,
    q_update,
    record_dq,
    schedule_at,
    softmax_probs,
)

__all__ = [
    "__version__",
    "ACTIONS",
    "N_ACTIONS",
    "Action",
    "AgentBanditState",
    "ConfigError",
    "Conflict",
    "ExperimentConfig",
    "GridSpec",
    "MetricsSeries",
    "Mode",
    "OptimalQ",
    "Policy",
    "RunManifest",
    "Schedules",
    "SelectionRound",
    "SpecialCell",
    "State",
    "Transition",
    "TrialRecord",
    "TrialStreams",
    "aggregate_trials",
    "area_under",
    "batch_series",
    "bellman_residual",
    "choice_histogram",
    "config_digest",
    "emit_plots",
    "emit_table1",
    "enumerate_pairs",
    "epsilon_greedy",
    "exact_two_agent_exclusion",
    "fresh_agents",
    "greedy_policy",
    "load_config",
    "loss",
    "multi_agent_step",
    "q_update",
    "record_dq",
    "resolve_conflicts",
    "run_batch",
    "run_sweep",
    "run_trial",
    "save_config",
    "schedule_at",
    "select_conflict",
    "select_conflict_free",
    "softmax_probs",
    "step",
    "transition_model",
    "trial_seed",
    "valid_rate",
    "value_iteration",
    "zero_q_table",
]

"""Event-triggered distributed online convex optimization simulator.

The package simulates a network of agents that cooperatively minimize a
stream of convex losses under time-varying inequality constraints. Agents
exchange decisions over a time-varying communication graph, but each agent
broadcasts only when its decision has drifted from the last broadcast by at
least a (decaying) threshold. The library provides the round-synchronous
runtime, parameter-sequence constructors with theoretical rate predictions,
regret and violation metrics with offline benchmark solvers, and an
experiment harness exposed as an HTTP service plus a thin CLI client.
"""

from etopt.geometry import Box, euclid_norm, pos_part, project_box
from etopt.network import (
    GraphSchedule,
    MixingReport,
    consensus_mix,
    mixing_matrix,
    validate_mixing_matrix,
)
from etopt.problems import (
    FixedDataProblem,
    LinearRegressionProblem,
    OnlineProblem,
    RoundData,
)
from etopt.schedules import (
    Schedule,
    ThresholdFamily,
    decoupled_schedule,
    geometric_threshold,
    poly_threshold,
    predicted_rates,
    trigger_coupled_schedule,
)
from etopt.engine import AgentState, RunRecord, run
from etopt.metrics import net_ccv, net_regret, path_length, round_series
from etopt.benchmarks import solve_dynamic_benchmark, solve_static_benchmark

__version__ = "0.1.0"

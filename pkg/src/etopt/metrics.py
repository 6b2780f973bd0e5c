"""Regret, cumulative violation, trigger statistics, and CSV emission.

The network metrics evaluate every agent's decision under the round's
*global* loss (the average of all local losses) and under the *stacked*
constraint vector of all agents, so they need the recorded decisions and the
problem oracles, not just the per-agent losses the runtime logged. With n
agents this costs n*n oracle evaluations per round, done in one vectorized
batch per round.

CSV layout (one row per prefix length, header required, 17 significant
digits): t, avg_cum_loss, avg_cum_violation, cum_triggers,
net_regret_dynamic, net_regret_static. Benchmark columns not requested are
emitted as nan. The weaker pre-clipped violation metric is available as an
optional trailing column and is never the headline number.
"""

from dataclasses import dataclass, field

import numpy as np

from etopt.geometry import pos_part


def path_length(decisions):
    """Total movement of a decision sequence: sum of step norms."""
    decisions = np.atleast_2d(np.asarray(decisions, dtype=float))
    diffs = np.diff(decisions, axis=0)
    return float(np.sqrt((diffs**2).sum(axis=1)).sum())


@dataclass
class MetricsSeries:
    """Per-prefix metric trajectories of one run."""

    rounds: np.ndarray  # (T,) 1..T
    avg_cum_loss: np.ndarray  # (T,) mean_i sum_{s<=t} f_s(x_{i,s}) / t
    avg_cum_violation: np.ndarray  # (T,) mean_i sum_{s<=t} |clip(g_s(x_{i,s}))| / t
    cum_triggers: np.ndarray  # (T,) network broadcast count through round t
    net_regret_dynamic: np.ndarray = None  # (T,) prefix regret vs dynamic comparator
    net_regret_static: np.ndarray = None  # (T,) prefix regret vs static comparator
    avg_cum_violation_preclip: np.ndarray = None  # optional weaker metric
    metadata: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return int(self.rounds[-1])


def _network_round_values(record, problem, approx_agents=None, sample_seed=0):
    """Round-wise network loss and violation means over the agents' decisions.

    With ``approx_agents`` set, the network quantities are estimated from a
    fixed seeded subsample of that many agents instead of all of them. This
    trades the exact n*n evaluations per round for a labeled approximation
    intended for large networks.
    """
    if record.decisions is None:
        raise ValueError("network metrics need recorded decisions")
    subset = None
    if approx_agents is not None and approx_agents < problem.n:
        gen = np.random.default_rng(sample_seed)
        subset = np.sort(gen.choice(problem.n, size=approx_agents, replace=False))
    horizon = record.horizon
    mean_loss = np.zeros(horizon)
    mean_viol = np.zeros(horizon)
    for t in range(1, horizon + 1):
        loss_vals, viol = problem.global_eval(
            t, record.decisions[t - 1], agent_subset=subset
        )
        mean_loss[t - 1] = float(loss_vals.mean())
        mean_viol[t - 1] = float(viol.mean())
    return mean_loss, mean_viol


def net_regret(record, problem, bench):
    """Cumulative network loss of the run minus that of the comparator."""
    if bench.decisions.shape[0] != record.horizon:
        raise ValueError("comparator length does not match the run horizon")
    mean_loss, _ = _network_round_values(record, problem)
    return float(mean_loss.sum() - bench.loss_values.sum())


def net_ccv(record, problem):
    """Cumulative clipped-constraint violation averaged over agents."""
    _, mean_viol = _network_round_values(record, problem)
    return float(mean_viol.sum())


def trigger_series(record):
    """Cumulative broadcast counts: (network (T,), per-agent (T, n))."""
    per_agent = np.cumsum(record.broadcasts, axis=0)
    return per_agent.sum(axis=1), per_agent


def round_series(
    record,
    problem,
    dynamic=None,
    static=None,
    include_preclip=False,
    approx_agents=None,
    sample_seed=0,
):
    """Assemble the per-prefix metric trajectories of a run.

    ``dynamic`` and ``static`` are optional comparator sequences; their
    regret columns are prefix sums against the comparator's per-round
    losses. The static comparator is the full-horizon optimum, so its
    prefix column reaches the exact static regret at the final round.
    ``approx_agents`` switches the network evaluations to a seeded agent
    subsample (approximate, labeled in the metadata; meant for large n).
    """
    horizon = record.horizon
    ts = np.arange(1, horizon + 1, dtype=float)
    mean_loss, mean_viol = _network_round_values(
        record, problem, approx_agents=approx_agents, sample_seed=sample_seed
    )
    cum_loss = np.cumsum(mean_loss)
    series = MetricsSeries(
        rounds=np.arange(1, horizon + 1),
        avg_cum_loss=cum_loss / ts,
        avg_cum_violation=np.cumsum(mean_viol) / ts,
        cum_triggers=trigger_series(record)[0],
    )
    if approx_agents is not None and approx_agents < problem.n:
        series.metadata["network_eval"] = (
            f"approximate: sampled {approx_agents} of {problem.n} agents"
        )
    if dynamic is not None:
        series.net_regret_dynamic = cum_loss - np.cumsum(dynamic.loss_values)
    if static is not None:
        series.net_regret_static = cum_loss - np.cumsum(static.loss_values)
    if include_preclip:
        running = np.zeros((record.n, sum(problem.constraint_dim(i) for i in range(problem.n))))
        preclip = np.zeros(horizon)
        for t in range(1, horizon + 1):
            stacked = _stacked_constraints(problem, t, record.decisions[t - 1])
            running += stacked
            preclip[t - 1] = float(
                np.mean(np.linalg.norm(pos_part(running), axis=1))
            )
        series.avg_cum_violation_preclip = preclip / ts
    return series


def _stacked_constraints(problem, t, points):
    """All agents' constraint vectors at each query point, stacked per point."""
    points = np.atleast_2d(points)
    blocks = []
    for i in range(problem.n):
        data = problem.round_data(t)[i]
        blocks.append(points @ data.constraint_matrix.T - data.constraint_offset)
    return np.hstack(blocks)


def _fmt(value):
    return "nan" if value is None else f"{value:.17g}"


def render_series_csv(series, metadata=None):
    """Render a MetricsSeries to CSV text with leading '# key=value' lines."""
    meta = dict(series.metadata)
    if metadata:
        meta.update(metadata)
    lines = [f"# {key}={meta[key]}" for key in meta]
    cols = [
        "t",
        "avg_cum_loss",
        "avg_cum_violation",
        "cum_triggers",
        "net_regret_dynamic",
        "net_regret_static",
    ]
    if series.avg_cum_violation_preclip is not None:
        cols.append("avg_cum_violation_preclip")
    lines.append(",".join(cols))
    for k in range(series.horizon):
        row = [
            str(int(series.rounds[k])),
            _fmt(float(series.avg_cum_loss[k])),
            _fmt(float(series.avg_cum_violation[k])),
            str(int(series.cum_triggers[k])),
            _fmt(
                None
                if series.net_regret_dynamic is None
                else float(series.net_regret_dynamic[k])
            ),
            _fmt(
                None
                if series.net_regret_static is None
                else float(series.net_regret_static[k])
            ),
        ]
        if series.avg_cum_violation_preclip is not None:
            row.append(_fmt(float(series.avg_cum_violation_preclip[k])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"

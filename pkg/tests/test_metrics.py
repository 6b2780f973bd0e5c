import numpy as np
import pytest

from conftest import TableMixing, scalar_round
from etopt.benchmarks import BenchmarkSequence
from etopt.engine import run
from etopt.geometry import Box
from etopt.metrics import (
    net_ccv,
    net_regret,
    path_length,
    render_series_csv,
    round_series,
    trigger_series,
)
from etopt.network import GraphSchedule
from etopt.problems import FixedDataProblem, LinearRegressionProblem, RoundData
from etopt.schedules import decoupled_schedule


def bench_from(decisions, problem, kind="custom"):
    decisions = np.atleast_2d(decisions)
    losses = np.array(
        [problem.global_eval(t, decisions[t - 1][None, :])[0][0] for t in range(1, len(decisions) + 1)]
    )
    return BenchmarkSequence(
        kind=kind,
        decisions=decisions,
        loss_values=losses,
        feasibility_margins=np.zeros(len(decisions)),
    )


def single_agent_problem(seed=1, horizon=12):
    rounds = {}
    rng = np.random.default_rng(seed)
    for t in range(1, horizon + 1):
        rounds[t] = [
            RoundData(
                design=rng.uniform(-1, 1, size=(2, 1)),
                target=rng.uniform(-2, 2, size=2),
                constraint_matrix=rng.uniform(0, 2, size=(1, 1)),
                constraint_offset=rng.uniform(0, 1, size=1),
            )
        ]
    return FixedDataProblem(rounds, box=Box.symmetric(5.0, 1))


def test_path_length_examples():
    assert path_length(np.zeros((5, 3))) == 0.0
    assert path_length(np.array([[0.0], [3.0], [7.0]])) == 7.0
    rng = np.random.default_rng(2)
    walk = np.cumsum(rng.normal(size=(50, 4)), axis=0)
    manual = sum(np.linalg.norm(walk[k + 1] - walk[k]) for k in range(49))
    assert path_length(walk) == pytest.approx(manual, rel=1e-12)


def test_regret_zero_against_own_decisions():
    prob = single_agent_problem()
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, TableMixing({t: np.eye(1) for t in range(1, 12)}), sched, 12)
    bench = bench_from(record.decisions[:, 0, :], prob)
    assert net_regret(record, prob, bench) == pytest.approx(0.0, abs=1e-12)


def test_regret_of_duplicated_agents_matches_single_agent():
    # Two agents with identical data and symmetric mixing stay identical,
    # so the network regret equals the single-agent regret.
    single = single_agent_problem(seed=5)
    dup_rounds = {
        t: [single.round_data(t)[0], single.round_data(t)[0]] for t in range(1, 13)
    }
    dup = FixedDataProblem(dup_rounds, box=Box.symmetric(5.0, 1))
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    rec1 = run(single, TableMixing({t: np.eye(1) for t in range(1, 12)}), sched, 12)
    rec2 = run(dup, TableMixing({t: np.full((2, 2), 0.5) for t in range(1, 12)}), sched, 12)
    assert np.allclose(rec2.decisions[:, 0, :], rec2.decisions[:, 1, :], atol=1e-12)

    y = np.zeros((12, 1))
    r1 = net_regret(rec1, single, bench_from(y, single))
    r2 = net_regret(rec2, dup, bench_from(y, dup))
    assert r2 == pytest.approx(r1, rel=1e-10)


def test_net_ccv_zero_when_feasible():
    rounds = {
        t: [scalar_round(1.0, 0.0, 1.0, 5.0)] for t in range(1, 6)
    }  # g(x) = x - 5 <= 0 on the box
    prob = FixedDataProblem(rounds, box=Box.symmetric(1.0, 1))
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, TableMixing({t: np.eye(1) for t in range(1, 6)}), sched, 5)
    assert net_ccv(record, prob) == 0.0


def test_net_ccv_single_round_value():
    rounds = {
        1: [
            RoundData(
                design=np.zeros((1, 1)),
                target=np.zeros(1),
                constraint_matrix=np.array([[1.0], [2.0]]).reshape(2, 1),
                constraint_offset=np.array([1.0, -2.0]),
            )
        ]
    }
    prob = FixedDataProblem(rounds, box=Box.symmetric(5.0, 1))
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, TableMixing({}), sched, 1)
    # At x=0 the constraint vector is (-1, 2): clipped norm is 2.
    assert net_ccv(record, prob) == pytest.approx(2.0)


def test_per_agent_cumulative_violation_dominates_clipped_sum():
    # Triangle inequality: sum_t |clip(g_t)| >= |sum_t clip(g_t)|.
    prob = LinearRegressionProblem(n=3, p=2, q=2, m=2, seed=3)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, GraphSchedule(n=3, edge_prob=0.3, seed=1), sched, 20)
    for i in range(prob.n):
        clipped = [
            np.maximum(
                np.concatenate(
                    [prob.constraint(t, j, record.decisions[t - 1, i]) for j in range(prob.n)]
                ),
                0.0,
            )
            for t in range(1, 21)
        ]
        lhs = sum(np.linalg.norm(v) for v in clipped)
        rhs = np.linalg.norm(np.sum(clipped, axis=0))
        assert lhs >= rhs - 1e-12


def test_trigger_series_counts():
    prob = LinearRegressionProblem(n=4, p=2, q=2, m=1, seed=4)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, GraphSchedule(n=4, edge_prob=0.2, seed=2), sched, 15)
    network, per_agent = trigger_series(record)
    assert np.array_equal(network, 4 * np.arange(1, 16))
    assert np.array_equal(per_agent[-1], record.trigger_totals)
    # Independent recount straight from the flags.
    assert np.array_equal(network, np.cumsum(record.broadcasts.sum(axis=1)))


def test_trigger_series_frozen_when_never_firing():
    rounds = {t: [scalar_round(0.0, 0.0, 1.0, 5.0)] for t in range(1, 8)}
    prob = FixedDataProblem(rounds, box=Box.symmetric(1.0, 1))
    sched = decoupled_schedule(1.0, 0.5, 0.5, 10.0, 1.0)  # giant threshold
    record = run(prob, TableMixing({t: np.eye(1) for t in range(1, 8)}), sched, 7)
    network, _ = trigger_series(record)
    assert np.array_equal(network, np.ones(7, dtype=int))


def test_series_prefix_one_and_constant_loss():
    # Zero design keeps the loss constant and the decision static.
    rounds = {t: [scalar_round(0.0, 3.0, 1.0, 5.0)] for t in range(1, 9)}
    prob = FixedDataProblem(rounds, box=Box.symmetric(1.0, 1))
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, TableMixing({t: np.eye(1) for t in range(1, 9)}), sched, 8)
    series = round_series(record, prob)
    assert np.allclose(series.avg_cum_loss, 4.5, atol=1e-12)
    f1, v1 = prob.global_eval(1, record.decisions[0])
    assert series.avg_cum_loss[0] == pytest.approx(float(f1.mean()))
    assert series.avg_cum_violation[0] == pytest.approx(float(v1.mean()))


def test_series_consistent_with_totals():
    prob = LinearRegressionProblem(n=3, p=2, q=2, m=2, seed=6)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 1.0, 1.0)
    record = run(prob, GraphSchedule(n=3, edge_prob=0.3, seed=3), sched, 18)
    y = np.tile(np.linspace(-0.5, 0.5, 2), (18, 1))
    bench = bench_from(y, prob)
    series = round_series(record, prob, dynamic=bench)
    total_reg = net_regret(record, prob, bench)
    assert series.net_regret_dynamic[-1] == pytest.approx(total_reg, rel=1e-12)
    assert series.avg_cum_violation[-1] * 18 == pytest.approx(
        net_ccv(record, prob), rel=1e-12
    )
    assert series.avg_cum_loss[-1] * 18 - bench.loss_values.sum() == pytest.approx(
        total_reg, rel=1e-12
    )


def test_series_requires_recorded_decisions():
    prob = LinearRegressionProblem(n=3, p=2, q=2, m=1, seed=8)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(
        prob, GraphSchedule(n=3, edge_prob=0.2, seed=1), sched, 5, record_decisions=False
    )
    with pytest.raises(ValueError):
        round_series(record, prob)


def test_preclip_column_is_weaker_metric():
    prob = LinearRegressionProblem(n=3, p=2, q=2, m=2, seed=9)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, GraphSchedule(n=3, edge_prob=0.3, seed=4), sched, 12)
    series = round_series(record, prob, include_preclip=True)
    assert series.avg_cum_violation_preclip is not None
    assert np.all(series.avg_cum_violation_preclip <= series.avg_cum_violation + 1e-12)


def test_csv_rendering_format():
    prob = LinearRegressionProblem(n=3, p=2, q=2, m=1, seed=10)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, GraphSchedule(n=3, edge_prob=0.2, seed=5), sched, 4)
    series = round_series(record, prob)
    text = render_series_csv(series, {"seed": 5})
    lines = text.strip().split("\n")
    assert lines[0] == "# seed=5"
    assert lines[1] == (
        "t,avg_cum_loss,avg_cum_violation,cum_triggers,"
        "net_regret_dynamic,net_regret_static"
    )
    assert len(lines) == 2 + 4
    first = lines[2].split(",")
    assert first[0] == "1"
    # 17 significant digits and absent benchmarks rendered as nan.
    assert float(first[1]) == pytest.approx(series.avg_cum_loss[0])
    assert len(first[1].replace(".", "").replace("-", "").lstrip("0")) >= 16
    assert first[4] == "nan" and first[5] == "nan"


def test_csv_roundtrip_values():
    prob = LinearRegressionProblem(n=3, p=2, q=2, m=1, seed=11)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, GraphSchedule(n=3, edge_prob=0.2, seed=6), sched, 6)
    series = round_series(record, prob)
    text = render_series_csv(series)
    rows = [line.split(",") for line in text.strip().split("\n")[1:]]
    for k, row in enumerate(rows):
        assert float(row[1]) == series.avg_cum_loss[k]
        assert int(row[3]) == series.cum_triggers[k]


def test_sampled_estimator_is_labeled_and_close():
    prob = LinearRegressionProblem(n=12, p=2, q=2, m=1, seed=15)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    record = run(prob, GraphSchedule(n=12, edge_prob=0.2, seed=7), sched, 30)
    exact = round_series(record, prob)
    approx = round_series(record, prob, approx_agents=6, sample_seed=1)
    assert "approximate" in approx.metadata["network_eval"]
    # Subsampling the network loss stays in the right ballpark without
    # matching exactly.
    ratio = approx.avg_cum_loss[-1] / exact.avg_cum_loss[-1]
    assert 0.5 < ratio < 2.0
    assert approx.avg_cum_loss[-1] != exact.avg_cum_loss[-1]
    # Full-size "sample" falls back to the exact evaluation.
    full = round_series(record, prob, approx_agents=12)
    assert full.avg_cum_loss[-1] == exact.avg_cum_loss[-1]
    assert "network_eval" not in full.metadata


def test_regret_and_ccv_match_brute_force_triple_loop():
    prob = LinearRegressionProblem(n=4, p=3, q=2, m=2, seed=20)
    sched = decoupled_schedule(1.0, 0.5, 0.5, 1.0, 1.0)
    record = run(prob, GraphSchedule(n=4, edge_prob=0.3, seed=9), sched, 10)
    y = np.tile(np.linspace(-0.2, 0.4, 3), (10, 1))
    bench = bench_from(y, prob)

    brute_reg = 0.0
    brute_ccv = 0.0
    for t in range(1, 11):
        for i in range(4):
            x = record.decisions[t - 1, i]
            brute_reg += np.mean([prob.loss(t, j, x) for j in range(4)]) / 4
            stacked = np.concatenate([prob.constraint(t, j, x) for j in range(4)])
            brute_ccv += np.linalg.norm(np.maximum(stacked, 0.0)) / 4
        brute_reg -= np.mean([prob.loss(t, j, y[t - 1]) for j in range(4)])
    assert net_regret(record, prob, bench) == pytest.approx(brute_reg, rel=1e-10)
    assert net_ccv(record, prob) == pytest.approx(brute_ccv, rel=1e-10)

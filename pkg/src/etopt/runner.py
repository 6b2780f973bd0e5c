"""Experiment orchestration: single runs, sweeps, and validation.

A run validates the full setup (aborting before round 1 on failure),
executes the protocol, optionally solves the requested comparators, and
renders the metric series to CSV plus a JSON-ready summary. A sweep executes
the cross product of threshold scales and seeds; cells that share a seed
share their problem data bit for bit (the threshold scale never enters data
generation), which the recorded data digests certify. Sweep cells are
independent and can run in a bounded process pool; outputs are assembled in
a fixed order so worker count never changes the bytes.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from etopt import __version__
from etopt.benchmarks import SolverOptions, solve_dynamic_benchmark, solve_static_benchmark
from etopt.config import check_basic, config_from_dict, config_to_dict
from etopt.engine import run as engine_run
from etopt.errors import ConfigError, UnsupportedCaseError, ValidationFailure
from etopt.geometry import Box
from etopt.metrics import render_series_csv, round_series
from etopt.network import GraphSchedule
from etopt.problems import LinearRegressionProblem
from etopt.schedules import (
    decoupled_schedule,
    geometric_threshold,
    poly_threshold,
    predicted_rates,
    trigger_coupled_schedule,
)
from etopt.validation import validate_setup

# Hold every generated round in memory when the run is small enough that the
# digest, runtime, and metric passes should share one generation.
_FULL_CACHE_LIMIT = 200_000


@dataclass
class RunArtifacts:
    summary: dict
    artifacts: dict  # file name -> text content
    validation: object
    record: object = None
    series: object = None


@dataclass
class SweepArtifacts:
    cells: list
    artifacts: dict
    validation_passed: bool = True


def build_problem(config):
    cache = None
    if config.n * config.horizon <= _FULL_CACHE_LIMIT:
        cache = config.horizon + 1
    return LinearRegressionProblem(
        n=config.n,
        p=config.p,
        q=config.q,
        m=config.m,
        seed=config.master_seed(),
        box=Box.symmetric(config.box_halfwidth, config.p),
        cache_rounds=cache,
    )


def build_graph(config):
    return GraphSchedule(
        n=config.n, edge_prob=config.edge_prob, seed=config.graph_stream_seed()
    )


def build_schedule(config):
    if config.schedule == "thm1":
        if config.tau_family == "poly":
            threshold = poly_threshold(tau0=config.tau0, theta=config.theta3)
        else:
            threshold = geometric_threshold(config.c)
        return trigger_coupled_schedule(config.kappa, threshold)
    if config.schedule == "thm2":
        return decoupled_schedule(
            config.alpha0, config.theta1, config.theta2, config.tau0, config.theta3
        )
    raise ConfigError(f"unknown schedule selection {config.schedule!r}")


def build_components(config):
    check_basic(config)
    return build_problem(config), build_graph(config), build_schedule(config)


def execute_validate(config):
    """Validation report; construction failures become failed named checks."""
    from etopt.validation import CheckResult, ValidationReport

    try:
        problem, graph, schedule = build_components(config)
    except ConfigError as exc:
        return ValidationReport([CheckResult("configuration", False, str(exc))])
    return validate_setup(problem, graph, schedule, config.horizon)


def _rates_summary(schedule):
    try:
        pred = predicted_rates(schedule)
    except UnsupportedCaseError as exc:
        return {"supported": False, "detail": str(exc)}
    def terms(seq):
        return [
            {
                "t_power": term.t_power,
                "log_power": term.log_power,
                "budget_power": term.budget_power,
                "path_factor": term.path_factor,
                "scale": term.scale,
            }
            for term in seq
        ]
    return {
        "supported": True,
        "regret_case": pred.regret_case,
        "ccv_case": pred.ccv_case,
        "regret_terms": terms(pred.regret),
        "ccv_terms": terms(pred.ccv),
    }


def _bound_estimates(report):
    for check in report.checks:
        if check.name == "oracle-bound-estimates":
            return check.detail
    return ""


def execute_run(config):
    """Validate, run, benchmark, and render one experiment."""
    problem, graph, schedule = build_components(config)
    report = validate_setup(problem, graph, schedule, config.horizon)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise ValidationFailure(f"validation failed: {names}")

    record = engine_run(
        problem,
        graph,
        schedule,
        config.horizon,
        seed=config.master_seed(),
        init_rule=config.init_rule,
        record_decisions=config.record_decisions,
        event_triggered=config.event_triggered,
    )

    opts = SolverOptions(
        tol=config.solver_tol,
        max_iter=config.solver_max_iter,
        verify=config.verify,
        grid_pitch=config.grid_pitch,
        seed=config.master_seed(),
    )
    dynamic = static = None
    if "dynamic" in config.benchmark_kinds:
        dynamic = solve_dynamic_benchmark(problem, config.horizon, opts)
    if "static" in config.benchmark_kinds:
        static = solve_static_benchmark(problem, config.horizon, opts)

    digest = problem.data_digest(config.horizon)
    series = round_series(
        record,
        problem,
        dynamic=dynamic,
        static=static,
        include_preclip=config.include_preclip,
    )
    metadata = {
        "generator": f"etopt {__version__}",
        "seed": config.master_seed(),
        "horizon": config.horizon,
        "n": config.n,
        "p": config.p,
        "q": config.q,
        "m": config.m,
        "edge_prob": config.edge_prob,
        "schedule": schedule.describe(),
        "tau0": config.tau0,
        "event_triggered": config.event_triggered,
        "data_digest": digest,
    }
    summary = {
        "horizon": config.horizon,
        "n": config.n,
        "seed": config.master_seed(),
        "tau0": config.tau0,
        "data_digest": digest,
        "total_triggers": record.total_triggers,
        "max_gap_excess": record.max_gap_excess,
        "final_avg_cum_loss": float(series.avg_cum_loss[-1]),
        "final_avg_cum_violation": float(series.avg_cum_violation[-1]),
        "net_ccv": float(series.avg_cum_violation[-1] * config.horizon),
        "rates": _rates_summary(schedule),
        "bound_estimates": _bound_estimates(report),
    }
    if dynamic is not None:
        summary["net_regret_dynamic"] = float(series.net_regret_dynamic[-1])
        summary["dynamic_flagged_rounds"] = list(dynamic.flagged_rounds)
    if static is not None:
        summary["net_regret_static"] = float(series.net_regret_static[-1])
        summary["static_path_length"] = static.path_length()
        summary["static_flagged_rounds"] = list(static.flagged_rounds)

    artifacts = {
        "series.csv": render_series_csv(series, metadata),
        "summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n",
    }
    return RunArtifacts(
        summary=summary,
        artifacts=artifacts,
        validation=report,
        record=record,
        series=series,
    )


def _sweep_cell(config_dict):
    config = config_from_dict(config_dict)
    result = execute_run(config)
    series = result.series
    return {
        "tau0": config.tau0,
        "seed": config.master_seed(),
        "summary": result.summary,
        "rounds": series.rounds.tolist(),
        "avg_cum_loss": series.avg_cum_loss.tolist(),
        "avg_cum_violation": series.avg_cum_violation.tolist(),
        "cum_triggers": series.cum_triggers.tolist(),
        "net_regret_dynamic": (
            None
            if series.net_regret_dynamic is None
            else series.net_regret_dynamic.tolist()
        ),
        "net_regret_static": (
            None
            if series.net_regret_static is None
            else series.net_regret_static.tolist()
        ),
    }


def _fmt(value):
    return "nan" if value is None else f"{value:.17g}"


def execute_sweep(config, tau0_values=None, seeds=None, workers=None):
    """Cross product of threshold scales and seeds; shared data per seed."""
    tau0_values = tuple(config.sweep_tau0 if tau0_values is None else tau0_values)
    seeds = tuple(config.sweep_seeds if seeds is None else seeds)
    workers = config.workers if workers is None else workers
    if not tau0_values or not seeds:
        raise ConfigError("sweep needs nonempty tau0_values and seeds")
    cells = [
        config_to_dict(replace(config, tau0=tau0, seed=seed))
        for seed in seeds
        for tau0 in tau0_values
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(cell) for cell in cells]

    lines = [f"# generator=etopt {__version__}", "# kind=sweep"]
    for res in results:
        lines.append(
            f"# cell tau0={res['tau0']:g} seed={res['seed']} "
            f"data_digest={res['summary']['data_digest']}"
        )
    lines.append(
        "tau0,seed,t,avg_cum_loss,avg_cum_violation,cum_triggers,"
        "net_regret_dynamic,net_regret_static"
    )
    for res in results:
        dyn = res["net_regret_dynamic"]
        stat = res["net_regret_static"]
        for k, t in enumerate(res["rounds"]):
            lines.append(
                ",".join(
                    [
                        f"{res['tau0']:.17g}",
                        str(res["seed"]),
                        str(int(t)),
                        _fmt(res["avg_cum_loss"][k]),
                        _fmt(res["avg_cum_violation"][k]),
                        str(int(res["cum_triggers"][k])),
                        _fmt(None if dyn is None else dyn[k]),
                        _fmt(None if stat is None else stat[k]),
                    ]
                )
            )
    long_csv = "\n".join(lines) + "\n"
    summaries = [res["summary"] for res in results]
    artifacts = {
        "sweep.csv": long_csv,
        "sweep_summaries.json": json.dumps(summaries, indent=2, sort_keys=True) + "\n",
    }
    return SweepArtifacts(cells=summaries, artifacts=artifacts)

"""Pre-run model validation: named checks with a pass/fail report.

The checks cover the standing requirements of the analysis: bounded convex
feasible set with subgradient oracles (verified empirically by finite
differences and bound estimation), doubly stochastic mixing with a weight
floor and joint connectivity, and the parameter-sequence conditions
(positivity, monotonicity, the dual product bound, nonnegative
non-increasing thresholds). Reports never raise; callers decide whether a
failed report aborts.
"""

from dataclasses import dataclass

import numpy as np

from etopt import rng
from etopt.errors import ConfigError
from etopt.network import union_strongly_connected, validate_mixing_matrix
from etopt.schedules import scan_schedule

FD_STEP = 1e-5
FD_TOL = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f": {self.detail}" if self.detail else "")


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def lines(self):
        return [c.line() for c in self.checks]


def _sample_rounds(horizon, count):
    if horizon <= count:
        return list(range(1, horizon + 1))
    return sorted({int(t) for t in np.linspace(1, horizon, count)})


def check_mixing(graph, horizon, sample=25):
    """Double stochasticity, weight floor, diagonal, and joint connectivity."""
    checks = []
    w_floor = 1.0 / graph.n
    worst_dev, worst_min, diag_ok = 0.0, np.inf, True
    rounds = _sample_rounds(horizon, sample)
    for t in rounds:
        report = validate_mixing_matrix(graph.matrix(t), w_floor)
        worst_dev = max(worst_dev, report.max_row_deviation, report.max_col_deviation)
        worst_min = min(worst_min, report.min_positive_entry)
        diag_ok &= report.diagonal_positive
    checks.append(
        CheckResult(
            "mixing-doubly-stochastic",
            worst_dev < 1e-12,
            f"max row/col deviation {worst_dev:.3g} over {len(rounds)} rounds",
        )
    )
    checks.append(
        CheckResult(
            "mixing-weight-floor",
            worst_min >= w_floor,
            f"min positive entry {worst_min:.6g}, floor {w_floor:.6g}",
        )
    )
    checks.append(CheckResult("mixing-diagonal-positive", diag_ok))
    window_ok = True
    for start in rounds[: max(1, len(rounds) // 2)]:
        edge_sets = [graph.round_edges(start + k) for k in range(graph.window)]
        window_ok &= union_strongly_connected(edge_sets, graph.n)
    checks.append(
        CheckResult(
            "graph-joint-connectivity",
            window_ok,
            f"window length {graph.window}",
        )
    )
    return checks


def check_schedule(schedule, horizon):
    """Sequence scans, named after the failing property when they fail."""
    return [
        CheckResult(f"schedule-{name}", ok, detail)
        for name, ok, detail in scan_schedule(schedule, horizon)
    ]


def check_oracles(problem, horizon, seed=0, rounds=3, agents=2, probes=2):
    """Finite-difference agreement of the loss gradient plus bound estimates."""
    gen = rng.stream(seed, rng.BENCH, round_index=0, agent=0)
    box = problem.box
    span = box.upper - box.lower
    max_fd_err = 0.0
    grad_max = 0.0
    g_norm_max = 0.0
    g_row_max = 0.0
    f_spread = 0.0
    f_samples = []
    for t in _sample_rounds(horizon, rounds):
        for i in range(min(problem.n, agents)):
            for _ in range(probes):
                x = box.lower + gen.random(problem.p) * span
                grad = np.asarray(problem.loss_subgrad(t, i, x), dtype=float)
                for k in range(problem.p):
                    step = np.zeros(problem.p)
                    step[k] = FD_STEP
                    fd = (
                        problem.loss(t, i, x + step) - problem.loss(t, i, x - step)
                    ) / (2 * FD_STEP)
                    max_fd_err = max(max_fd_err, abs(fd - grad[k]))
                grad_max = max(grad_max, float(np.linalg.norm(grad)))
                gval = np.asarray(problem.constraint(t, i, x), dtype=float)
                g_norm_max = max(g_norm_max, float(np.linalg.norm(gval)))
                sub = np.asarray(problem.clipped_constraint_subgrad(t, i, x))
                if sub.size:
                    g_row_max = max(
                        g_row_max, float(np.max(np.linalg.norm(sub, axis=1)))
                    )
                f_samples.append(problem.loss(t, i, x))
    if f_samples:
        f_spread = float(max(f_samples) - min(f_samples))
    return [
        CheckResult(
            "oracle-loss-gradient",
            bool(max_fd_err < FD_TOL),
            f"max finite-difference error {max_fd_err:.3g}",
        ),
        CheckResult(
            "oracle-bound-estimates",
            True,
            "empirical value-spread bound "
            f"{max(f_spread, g_norm_max):.6g}, "
            f"empirical subgradient bound {max(grad_max, g_row_max):.6g}",
        ),
    ]


def validate_setup(problem, graph, schedule, horizon):
    """Full pre-run report; construction errors become failed checks."""
    checks = []
    for maker, label in (
        (lambda: check_mixing(graph, horizon), "mixing"),
        (lambda: check_schedule(schedule, horizon), "schedule"),
        (lambda: check_oracles(problem, horizon), "oracle"),
    ):
        try:
            checks.extend(maker())
        except ConfigError as exc:
            checks.append(CheckResult(label, False, str(exc)))
    return ValidationReport(checks)

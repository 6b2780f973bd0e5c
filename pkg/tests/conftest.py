"""Shared helpers for the test suite."""

import numpy as np
import pytest

from etopt.geometry import Box
from etopt.problems import FixedDataProblem, RoundData


class TableMixing:
    """Mixing source backed by an explicit per-round matrix table."""

    def __init__(self, table):
        self.table = {t: np.asarray(w, dtype=float) for t, w in table.items()}

    def matrix(self, t):
        return self.table[t]


def scalar_round(a, theta, b_row, b_off):
    """1-D RoundData from scalars."""
    return RoundData(
        design=np.array([[a]]),
        target=np.array([theta]),
        constraint_matrix=np.array([[b_row]]),
        constraint_offset=np.array([b_off]),
    )


@pytest.fixture
def trace_problem():
    """The fixed tiny instance used by the hand-trace tests.

    Two agents, one decision coordinate, one constraint each, three rounds,
    feasible box [-4, 4]. Data constants chosen so the trajectory exercises
    consensus with a stale broadcast, both trigger branches, dual activation
    and dual clipping, and the box clamp on both sides.
    """
    rounds = {
        1: [scalar_round(2.0, 3.0, 1.0, -0.25), scalar_round(1.0, -1.0, 0.5, 0.25)],
        2: [scalar_round(1.5, 1.0, 1.0, 0.5), scalar_round(1.0, -0.7, 0.25, 0.25)],
        3: [scalar_round(1.0, 2.0, 1.0, 0.5), scalar_round(1.0, 0.0, 1.0, 1.0)],
    }
    return FixedDataProblem(rounds, box=Box(np.array([-4.0]), np.array([4.0])))


@pytest.fixture
def trace_mixing():
    return TableMixing({1: np.eye(2), 2: np.full((2, 2), 0.5)})

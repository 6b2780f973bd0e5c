"""Time-varying communication topology and consensus mixing.

Each round draws an undirected Erdos-Renyi layer on top of a deterministic
path ``(0,1), (1,2), ...`` that keeps every round's graph connected. Edge
weights follow the uniform rule: an arc (j -> i) contributes ``1/n`` to
``W[i, j]`` and each diagonal entry absorbs the remainder of its row. With
the path edges present and at most ``n - 1`` neighbors per node the diagonal
stays positive, and symmetry of the undirected edge set makes the matrix
doubly stochastic, so consensus mixing preserves the network average.

The runtime accepts any mixing source (a ``matrix(t)`` provider), so
user-supplied weight sequences can replace the built-in random family as
long as they pass :func:`validate_mixing_matrix`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from etopt import rng
from etopt.errors import ConfigError

STOCHASTICITY_TOL = 1e-12


@lru_cache(maxsize=32)
def _pair_indices(n):
    iu, ju = np.triu_indices(n, k=1)
    return iu, ju, ju == iu + 1


@dataclass(frozen=True)
class GraphSchedule:
    """Seeded generator of one undirected edge set per round.

    ``window`` records the joint-connectivity horizon of the schedule. The
    built-in construction always contains the path, so every single round is
    already connected (window 1); the field matters only when replaying
    recorded schedules from sparser generators.
    """

    n: int
    edge_prob: float = 0.1
    seed: int = 0
    window: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("graph needs at least 2 agents")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ConfigError("edge_prob must be in [0, 1]")
        if self.window < 1:
            raise ConfigError("window must be a positive integer")

    def _round_mask(self, t):
        iu, ju, path = _pair_indices(self.n)
        gen = rng.stream(self.seed, rng.GRAPH, round_index=t)
        mask = gen.random(iu.shape[0]) < self.edge_prob
        return iu, ju, mask | path

    def round_edges(self, t):
        """Undirected edge set for round ``t`` as a set of (i, j), i < j.

        Non-path pairs are independent Bernoulli(edge_prob) draws from the
        stream (seed, GRAPH, t); the path edges (i, i+1) are always present.
        Deterministic given (seed, t).
        """
        iu, ju, mask = self._round_mask(t)
        return {(int(i), int(j)) for i, j in zip(iu[mask], ju[mask])}

    def matrix(self, t):
        """Mixing matrix for round ``t``."""
        iu, ju, mask = self._round_mask(t)
        w = np.zeros((self.n, self.n))
        w[iu[mask], ju[mask]] = 1.0 / self.n
        w[ju[mask], iu[mask]] = 1.0 / self.n
        np.fill_diagonal(w, 1.0 - w.sum(axis=1))
        return w


@dataclass(frozen=True)
class StaticMixing:
    """Mixing source that returns the same matrix every round."""

    weights: np.ndarray

    def matrix(self, t):
        return self.weights


def mixing_matrix(edges, n):
    """Build the uniform-weight mixing matrix from an undirected edge set.

    Off-diagonal entry (i, j) is ``1/n`` when agent i hears agent j, the
    diagonal absorbs 1 minus the rest of the row.
    """
    w = np.zeros((n, n))
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"edge ({i}, {j}) outside agent range")
        w[i, j] = 1.0 / n
        w[j, i] = 1.0 / n
    diag = 1.0 - w.sum(axis=1)
    if np.any(diag <= 0):
        raise ValueError("a node's neighborhood drove its self-weight nonpositive")
    np.fill_diagonal(w, diag)
    return w


@dataclass(frozen=True)
class MixingReport:
    """Measured deviations of one mixing matrix from the model requirements."""

    max_row_deviation: float
    max_col_deviation: float
    min_positive_entry: float
    diagonal_positive: bool
    passed: bool


def validate_mixing_matrix(w, min_weight):
    """Check double stochasticity, diagonal support, and the weight floor.

    Row and column sums must equal 1 within ``STOCHASTICITY_TOL``; every
    strictly positive entry must be at least ``min_weight``; every diagonal
    entry must be strictly positive. Returns a report, never raises.
    """
    w = np.asarray(w, dtype=float)
    row_dev = float(np.max(np.abs(w.sum(axis=1) - 1.0)))
    col_dev = float(np.max(np.abs(w.sum(axis=0) - 1.0)))
    positive = w[w > 0]
    min_pos = float(positive.min()) if positive.size else 0.0
    diag_ok = bool(np.all(np.diag(w) > 0))
    passed = (
        row_dev < STOCHASTICITY_TOL
        and col_dev < STOCHASTICITY_TOL
        and np.all(w >= 0)
        and diag_ok
        and positive.size > 0
        and min_pos >= min_weight
    )
    return MixingReport(row_dev, col_dev, min_pos, diag_ok, bool(passed))


def consensus_mix(w, broadcasts):
    """One mixing step: each agent averages the decisions it can hear.

    ``broadcasts`` is an (n, p) array of the last-broadcast decisions; row i
    of the result is ``sum_j w[i, j] * broadcasts[j]``.
    """
    w = np.asarray(w, dtype=float)
    broadcasts = np.asarray(broadcasts, dtype=float)
    if w.shape[0] != w.shape[1] or w.shape[1] != broadcasts.shape[0]:
        raise ValueError(
            f"shape mismatch: weights {w.shape}, broadcasts {broadcasts.shape}"
        )
    return w @ broadcasts


def union_strongly_connected(edge_sets, n):
    """Whether the union of directed arc sets over a window is strongly connected.

    Undirected pairs count as arcs both ways. Used by the validation command
    to check joint connectivity of custom schedules over their window.
    """
    rows, cols = [], []
    for edges in edge_sets:
        for i, j in edges:
            rows += [i, j]
            cols += [j, i]
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return int(ncomp) == 1

"""Per-agent, per-round loss and constraint oracles.

A problem exposes, for round ``t`` and agent ``i``, the loss, a loss
subgradient, the constraint vector, and a subgradient matrix of the clipped
constraints. The shipped instance is the online linear-regression family:
quadratic losses ``0.5 * ||design @ x - target||**2`` against drifting random
data, with affine constraints ``constraint_matrix @ x - constraint_offset``.

Rounds are revealed one at a time by the runtime; the oracle itself is
stateless and deterministic, so any round can be regenerated from the data
seed for offline benchmarking and metric evaluation.
"""

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from etopt import rng
from etopt.errors import ConfigError
from etopt.geometry import Box


@dataclass(frozen=True)
class RoundData:
    """One agent's data for one round of the regression family."""

    design: np.ndarray  # (q, p)
    target: np.ndarray  # (q,)
    constraint_matrix: np.ndarray  # (m, p)
    constraint_offset: np.ndarray  # (m,)


@dataclass(frozen=True)
class StackedRound:
    """All agents' round data batched along a leading agent axis.

    Only available when every agent has the same shapes; the runtime and the
    metric evaluators use it to process one round in a handful of array ops.
    """

    designs: np.ndarray  # (n, q, p)
    targets: np.ndarray  # (n, q)
    constraint_matrices: np.ndarray  # (n, m, p)
    constraint_offsets: np.ndarray  # (n, m)


def quadratic_loss(data, x):
    """Value of 0.5 * ||design @ x - target||^2."""
    r = data.design @ x - data.target
    return 0.5 * float(r @ r)


def quadratic_loss_grad(data, x):
    """Gradient design.T @ (design @ x - target)."""
    return data.design.T @ (data.design @ x - data.target)


def affine_constraint(data, x):
    """Constraint vector constraint_matrix @ x - constraint_offset."""
    return data.constraint_matrix @ x - data.constraint_offset


def clipped_affine_subgrad(data, x):
    """Subgradient matrix of the clipped constraints, one row per component.

    Row j is the j-th constraint row where the constraint is strictly
    violated and the zero row otherwise; at an exactly active constraint the
    zero row is a valid selection and keeps the update direction small.
    """
    active = affine_constraint(data, x) > 0.0
    return np.where(active[:, None], data.constraint_matrix, 0.0)


class OnlineProblem:
    """Oracle interface consumed by the runtime and the metric evaluators.

    Subclasses define the data access; the default evaluators below assume
    the quadratic/affine family stored in :class:`RoundData`. Fully custom
    convex families may instead override the ``loss*``/``constraint*``
    methods directly.
    """

    n: int
    p: int
    box: Box

    def round_data(self, t):
        """List of per-agent :class:`RoundData` for round ``t`` (1-based)."""
        raise NotImplementedError

    def constraint_dim(self, i):
        raise NotImplementedError

    # -- scalar oracles ----------------------------------------------------

    def loss(self, t, i, x):
        return quadratic_loss(self.round_data(t)[i], x)

    def loss_subgrad(self, t, i, x):
        return quadratic_loss_grad(self.round_data(t)[i], x)

    def constraint(self, t, i, x):
        return affine_constraint(self.round_data(t)[i], x)

    def clipped_constraint_subgrad(self, t, i, x):
        return clipped_affine_subgrad(self.round_data(t)[i], x)

    # -- batch access -------------------------------------------------------

    def round_stacked(self, t):
        """Agent-batched view of a round, or None when shapes differ."""
        agents = self.round_data(t)
        shapes = {(d.design.shape, d.constraint_matrix.shape) for d in agents}
        if len(shapes) != 1:
            return None
        return StackedRound(
            designs=np.stack([d.design for d in agents]),
            targets=np.stack([d.target for d in agents]),
            constraint_matrices=np.stack([d.constraint_matrix for d in agents]),
            constraint_offsets=np.stack([d.constraint_offset for d in agents]),
        )

    def global_eval(self, t, points, agent_subset=None):
        """Network loss and stacked violation norm at each query point.

        ``points`` is (k, p). Returns ``(loss_vals, violation_norms)`` where
        ``loss_vals[j]`` is the average over agents of their round-``t`` loss
        at ``points[j]`` and ``violation_norms[j]`` is the Euclidean norm of
        the clipped stack of every agent's constraint vector at ``points[j]``.
        ``agent_subset`` restricts both to the given agent indices (used by
        the sampled metric estimator; the violation stack then covers only
        those agents).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = points.shape[0]
        agents = range(self.n) if agent_subset is None else agent_subset
        stacked = self.round_stacked(t)
        if stacked is not None:
            designs = stacked.designs
            targets = stacked.targets
            cons = stacked.constraint_matrices
            offsets = stacked.constraint_offsets
            if agent_subset is not None:
                designs = designs[agent_subset]
                targets = targets[agent_subset]
                cons = cons[agent_subset]
                offsets = offsets[agent_subset]
            resid = np.einsum("nqp,kp->nkq", designs, points) - targets[:, None, :]
            loss_vals = 0.5 * np.einsum("nkq,nkq->k", resid, resid)
            gvals = (
                np.einsum("nmp,kp->nkm", cons, points) - offsets[:, None, :]
            )
            sq_viol = np.einsum("nkm->k", np.maximum(gvals, 0.0) ** 2)
            return loss_vals / len(designs), np.sqrt(sq_viol)
        loss_vals = np.zeros(k)
        sq_viol = np.zeros(k)
        count = 0
        for i in agents:
            data = self.round_data(t)[i]
            resid = points @ data.design.T - data.target  # (k, q)
            loss_vals += 0.5 * np.einsum("kq,kq->k", resid, resid)
            gvals = points @ data.constraint_matrix.T - data.constraint_offset
            sq_viol += np.sum(np.maximum(gvals, 0.0) ** 2, axis=1)
            count += 1
        return loss_vals / count, np.sqrt(sq_viol)

    # -- affine/quadratic structure for benchmark solvers ------------------

    def round_quadratic(self, t):
        """Network loss at round ``t`` as (H, c, const): 0.5 x'Hx + c'x + const."""
        stacked = self.round_stacked(t)
        if stacked is not None:
            h = np.einsum("nqp,nqr->pr", stacked.designs, stacked.designs)
            c = -np.einsum("nqp,nq->p", stacked.designs, stacked.targets)
            const = 0.5 * float(np.einsum("nq,nq->", stacked.targets, stacked.targets))
            return h / self.n, c / self.n, const / self.n
        p = self.p
        h = np.zeros((p, p))
        c = np.zeros(p)
        const = 0.0
        for data in self.round_data(t):
            h += data.design.T @ data.design
            c -= data.design.T @ data.target
            const += 0.5 * float(data.target @ data.target)
        return h / self.n, c / self.n, const / self.n

    def round_constraints(self, t):
        """Stacked affine constraints (G, h) with the network order of agents."""
        g = np.vstack([d.constraint_matrix for d in self.round_data(t)])
        h = np.concatenate([d.constraint_offset for d in self.round_data(t)])
        return g, h

    def data_digest(self, horizon):
        """SHA-256 over the canonical byte serialization of rounds 1..horizon."""
        digest = hashlib.sha256()
        for t in range(1, horizon + 1):
            for data in self.round_data(t):
                for arr in (
                    data.design,
                    data.target,
                    data.constraint_matrix,
                    data.constraint_offset,
                ):
                    digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return digest.hexdigest()


class LinearRegressionProblem(OnlineProblem):
    """Drifting linear-regression instance with affine constraints.

    Per round and agent, the design matrix is uniform on [-1, 1] entrywise,
    the regression target is the design's row sums plus standard normal
    noise, constraint rows are uniform on [0, 2], and constraint offsets
    uniform on [0, 1] (so the origin is always feasible). Data for (t, i)
    comes from the stream (seed, DATA, t, i) with the draw order
    design, noise, constraint_matrix, constraint_offset.
    """

    def __init__(self, n, p, q, m, seed=0, box=None, cache_rounds=8):
        if min(n, p, q, m) < 1:
            raise ConfigError("problem dimensions must be positive")
        self.n = int(n)
        self.p = int(p)
        self.q = int(q)
        self.m = int(m)
        self.seed = int(seed)
        self.box = box if box is not None else Box.symmetric(5.0, p)
        if self.box.dim != self.p:
            raise ConfigError("box dimension does not match decision dimension")
        # Sequential access dominates (runtime, then metrics), so a small LRU
        # suffices; passing a large cache_rounds keeps every round in memory
        # when repeated passes over the same horizon are expected.
        self._round_cached = lru_cache(maxsize=cache_rounds)(self._generate_round)

    def constraint_dim(self, i):
        return self.m

    def agent_round_data(self, t, i):
        """Data for one agent, regenerable independently of the others."""
        gen = rng.stream(self.seed, rng.DATA, round_index=t, agent=i)
        design = gen.uniform(-1.0, 1.0, size=(self.q, self.p))
        noise = gen.standard_normal(self.q)
        constraint_matrix = gen.uniform(0.0, 2.0, size=(self.m, self.p))
        constraint_offset = gen.uniform(0.0, 1.0, size=self.m)
        return RoundData(
            design=design,
            target=design @ np.ones(self.p) + noise,
            constraint_matrix=constraint_matrix,
            constraint_offset=constraint_offset,
        )

    def _generate_round(self, t):
        return [self.agent_round_data(t, i) for i in range(self.n)]

    def round_data(self, t):
        if t < 1:
            raise ValueError("rounds are 1-based")
        return self._round_cached(t)


class FixedDataProblem(OnlineProblem):
    """Problem with explicitly supplied per-round data, mainly for tests."""

    def __init__(self, rounds, box):
        """``rounds`` maps round index (1-based) to a list of RoundData."""
        if not rounds:
            raise ConfigError("need at least one round of data")
        first = next(iter(rounds.values()))
        self.n = len(first)
        self.p = first[0].design.shape[1]
        self.box = box
        self._rounds = {
            t: [
                RoundData(
                    design=np.asarray(d.design, dtype=float),
                    target=np.asarray(d.target, dtype=float),
                    constraint_matrix=np.asarray(d.constraint_matrix, dtype=float),
                    constraint_offset=np.asarray(d.constraint_offset, dtype=float),
                )
                for d in agents
            ]
            for t, agents in rounds.items()
        }

    def constraint_dim(self, i):
        return next(iter(self._rounds.values()))[i].constraint_offset.shape[0]

    def round_data(self, t):
        try:
            return self._rounds[t]
        except KeyError:
            raise ValueError(f"no data supplied for round {t}") from None

"""Round-synchronous runtime for the event-triggered primal-dual protocol.

Each round t the runtime records the losses and constraint values that the
current decisions incur, and only then reveals the round-t oracles to the
update step (the online protocol: data is adversarial until the decision is
committed). The update for every agent i is

    z_{t+1}   = sum_j W_t[i, j] * xhat_{j, t}                (consensus)
    w_{t+1}   = df_{i,t}(x_t) + dG.T @ q_t                   (direction)
    x_{t+1}   = clamp(z_{t+1} - alpha_{t+1} * w_{t+1})       (primal)
    q_{t+1}   = [ (1 - beta_{t+1} gamma_{t+1}) q_t
                  + gamma_{t+1} (clip(g_{i,t}(x_t))
                  + dG @ (x_{t+1} - x_t)) ]_+                (dual)

where dG is the subgradient matrix of the clipped constraints at x_t and the
primal update runs before the dual update inside the same round. The agent
then broadcasts x_{t+1} only if it moved at least tau_{t+1} away from its
last broadcast xhat_{i,t}; otherwise the neighbors keep mixing the stale
value. Every agent broadcasts unconditionally at round 1.
"""

from dataclasses import dataclass, field

import numpy as np

from etopt import rng
from etopt.errors import ConfigError, RunFailure
from etopt.geometry import euclid_norm, pos_part, project_box


@dataclass
class AgentState:
    """One agent's mutable state between rounds."""

    index: int
    x: np.ndarray  # current decision, always inside the feasible box
    x_hat: np.ndarray  # last broadcast decision
    dual: np.ndarray  # nonnegative multipliers, one per local constraint
    triggers: int = 1  # broadcasts so far (round 1 is unconditional)


@dataclass(frozen=True)
class RoundObservation:
    """What an agent reads from its round-t oracles after committing x_t."""

    loss_grad: np.ndarray  # (p,)
    clipped_values: np.ndarray  # (m_i,) clipped constraint values
    clipped_subgrad: np.ndarray  # (m_i, p) rows of the clipped subgradients


@dataclass
class RunRecord:
    """Per-round, per-agent outcomes of one run plus run metadata."""

    horizon: int
    n: int
    own_losses: np.ndarray  # (T, n) f_{i,t}(x_{i,t})
    own_constraints: list  # [t][i] -> (m_i,) g_{i,t}(x_{i,t})
    broadcasts: np.ndarray  # (T, n) bool
    trigger_totals: np.ndarray  # (n,) int
    decisions: np.ndarray = None  # (T, n, p) when recorded
    broadcast_values: np.ndarray = None  # (T, n, p) xhat_{i,t} when traced
    duals: list = None  # [t][i] -> (m_i,) q_{i,t} when traced
    max_gap_excess: float = -np.inf  # max over (i,t) of |xhat - x| - tau_t
    meta: dict = field(default_factory=dict)

    @property
    def total_triggers(self):
        return int(self.trigger_totals.sum())

    def equals(self, other):
        """Exact (bit-for-bit) equality of all recorded trajectories."""
        return (
            self.horizon == other.horizon
            and self.n == other.n
            and np.array_equal(self.own_losses, other.own_losses)
            and np.array_equal(self.broadcasts, other.broadcasts)
            and np.array_equal(self.trigger_totals, other.trigger_totals)
            and all(
                np.array_equal(a, b)
                for row_a, row_b in zip(self.own_constraints, other.own_constraints)
                for a, b in zip(row_a, row_b)
            )
            and (
                (self.decisions is None and other.decisions is None)
                or np.array_equal(self.decisions, other.decisions)
            )
        )


class _RevealClock:
    """Guards the online protocol inside the runtime.

    Oracles for round t may be queried only once the round-t decisions are
    committed; the runtime advances the clock, and every oracle access runs
    through :meth:`check`.
    """

    def __init__(self):
        self.committed = 0

    def commit(self, t):
        self.committed = t

    def check(self, t):
        if t > self.committed:
            raise RunFailure(
                f"oracle for round {t} queried before its decisions were committed"
            )


def init_agents(problem, init_rule="origin", seed=0):
    """Initial states: x_1 per rule, xhat_1 = x_1, zero duals, one broadcast.

    Rule "origin" projects the zero vector into the feasible box; "uniform"
    draws each agent's start uniformly from the box using the stream
    (seed, INIT, agent).
    """
    box = problem.box
    states = []
    for i in range(problem.n):
        if init_rule == "origin":
            x = project_box(np.zeros(problem.p), box)
        elif init_rule == "uniform":
            gen = rng.stream(seed, rng.INIT, agent=i)
            x = box.lower + gen.random(problem.p) * (box.upper - box.lower)
        else:
            raise ConfigError(f"unknown init rule {init_rule!r}")
        states.append(
            AgentState(
                index=i,
                x=x,
                x_hat=x.copy(),
                dual=np.zeros(problem.constraint_dim(i)),
            )
        )
    return states


def observe(problem, t, i, x, constraint_value=None):
    """Bundle the oracle reads an agent makes after committing x_{i,t}."""
    g = problem.constraint(t, i, x) if constraint_value is None else constraint_value
    return RoundObservation(
        loss_grad=np.asarray(problem.loss_subgrad(t, i, x), dtype=float),
        clipped_values=pos_part(g),
        clipped_subgrad=np.asarray(
            problem.clipped_constraint_subgrad(t, i, x), dtype=float
        ),
    )


def primal_dual_step(state, z, obs, box, alpha_next, beta_next, gamma_next):
    """One primal-then-dual update; returns (x_next, dual_next, direction).

    Refuses to step when beta_next * gamma_next > 1, which would let the
    dual shrink factor go negative and voids the convergence analysis.
    """
    if beta_next * gamma_next > 1.0:
        raise ConfigError(
            f"dual step requires beta*gamma <= 1, got {beta_next * gamma_next}"
        )
    direction = obs.loss_grad + obs.clipped_subgrad.T @ state.dual
    x_next = project_box(z - alpha_next * direction, box)
    dual_next = pos_part(
        (1.0 - beta_next * gamma_next) * state.dual
        + gamma_next * (obs.clipped_values + obs.clipped_subgrad @ (x_next - state.x))
    )
    return x_next, dual_next, direction


def trigger_fires(x_next, x_hat, tau_next):
    """Broadcast test: fire when the drift reaches the threshold.

    The comparison is >=, so a zero threshold fires every round.
    """
    return euclid_norm(x_next - x_hat) >= tau_next


def run(
    problem,
    mixing,
    schedule,
    horizon,
    seed=0,
    init_rule="origin",
    record_decisions=True,
    event_triggered=True,
    trace_states=False,
):
    """Execute the protocol for ``horizon`` rounds and collect a RunRecord.

    ``mixing`` is any object with ``matrix(t)`` returning the round-t weight
    matrix. With ``event_triggered=False`` the broadcast test is skipped
    entirely and every round broadcasts (the classical protocol); with a
    threshold sequence that is identically zero the two variants produce
    bit-identical records.

    Decisions, duals, and the broadcast gap obey: x stays in the box, duals
    stay nonnegative, and |xhat_{i,t} - x_{i,t}| <= tau_t after every round;
    the realized maximum excess over the threshold is reported in
    ``max_gap_excess`` (nonpositive up to roundoff).
    """
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    ts = np.arange(1, horizon + 1)
    if np.any(schedule.beta_values(ts) * schedule.gamma_values(ts) > 1.0):
        raise ConfigError("schedule violates beta*gamma <= 1 on the run horizon")
    if np.any(schedule.tau_values(ts) < 0.0):
        raise ConfigError("threshold sequence must be nonnegative")

    batched = _uniform_dims(problem) and _default_oracles(problem)
    loop = _StackedLoop if batched else _GenericLoop
    return loop(
        problem, mixing, schedule, horizon, seed, init_rule,
        record_decisions, event_triggered, trace_states,
    ).execute()


def _uniform_dims(problem):
    dims = {problem.constraint_dim(i) for i in range(problem.n)}
    return len(dims) == 1


def _default_oracles(problem):
    # The batched loop evaluates the quadratic/affine family straight from
    # the round data; a problem that overrides any scalar oracle must go
    # through the per-agent path so its own definitions are honored.
    from etopt.problems import OnlineProblem

    cls = type(problem)
    return all(
        getattr(cls, name) is getattr(OnlineProblem, name)
        for name in ("loss", "loss_subgrad", "constraint", "clipped_constraint_subgrad")
    )


class _GenericLoop:
    """Round loop over per-agent states; works for any constraint dims."""

    def __init__(
        self, problem, mixing, schedule, horizon, seed, init_rule,
        record_decisions, event_triggered, trace_states,
    ):
        self.problem = problem
        self.mixing = mixing
        self.schedule = schedule
        self.horizon = horizon
        self.seed = seed
        self.init_rule = init_rule
        self.record_decisions = record_decisions
        self.event_triggered = event_triggered
        self.trace_states = trace_states
        n, p = problem.n, problem.p
        self.clock = _RevealClock()
        self.own_losses = np.zeros((horizon, n))
        self.own_constraints = []
        self.broadcasts = np.zeros((horizon, n), dtype=bool)
        self.broadcasts[0, :] = True
        self.decisions = np.zeros((horizon, n, p)) if record_decisions else None
        self.broadcast_values = np.zeros((horizon, n, p)) if trace_states else None
        self.duals = [] if trace_states else None
        self.max_gap_excess = -schedule.tau(1)  # xhat_1 == x_1 exactly

    def execute(self):
        states = init_agents(self.problem, init_rule=self.init_rule, seed=self.seed)
        horizon = self.horizon
        for t in range(1, horizon + 1):
            self.clock.commit(t)
            round_constraints = []
            for st in states:
                self.clock.check(t)
                self.own_losses[t - 1, st.index] = self.problem.loss(t, st.index, st.x)
                round_constraints.append(self.problem.constraint(t, st.index, st.x))
                if self.record_decisions:
                    self.decisions[t - 1, st.index] = st.x
                if self.trace_states:
                    self.broadcast_values[t - 1, st.index] = st.x_hat
            if self.trace_states:
                self.duals.append([st.dual.copy() for st in states])
            self.own_constraints.append(round_constraints)
            if t == horizon:
                break
            self._update(states, t, round_constraints)
        return self._record(np.array([st.triggers for st in states]))

    def _update(self, states, t, round_constraints):
        n = self.problem.n
        alpha_next = self.schedule.alpha(t + 1)
        beta_next = self.schedule.beta(t + 1)
        gamma_next = self.schedule.gamma(t + 1)
        tau_next = self.schedule.tau(t + 1)
        w = np.asarray(self.mixing.matrix(t), dtype=float)
        if w.shape != (n, n):
            raise RunFailure(f"mixing matrix for round {t} has shape {w.shape}")
        z_all = w @ np.stack([st.x_hat for st in states])
        for st in states:
            self.clock.check(t)
            obs = observe(
                self.problem, t, st.index, st.x,
                constraint_value=round_constraints[st.index],
            )
            x_next, dual_next, _ = primal_dual_step(
                st, z_all[st.index], obs, self.problem.box,
                alpha_next, beta_next, gamma_next,
            )
            fired = (
                trigger_fires(x_next, st.x_hat, tau_next)
                if self.event_triggered
                else True
            )
            if fired:
                st.x_hat = x_next.copy()
                st.triggers += 1
            self.broadcasts[t, st.index] = fired
            st.x = x_next
            st.dual = dual_next
            self.max_gap_excess = max(
                self.max_gap_excess, euclid_norm(st.x_hat - st.x) - tau_next
            )

    def _record(self, trigger_totals):
        return RunRecord(
            horizon=self.horizon,
            n=self.problem.n,
            own_losses=self.own_losses,
            own_constraints=self.own_constraints,
            broadcasts=self.broadcasts,
            trigger_totals=trigger_totals,
            decisions=self.decisions,
            broadcast_values=self.broadcast_values,
            duals=self.duals,
            max_gap_excess=float(self.max_gap_excess),
            meta={
                "seed": self.seed,
                "horizon": self.horizon,
                "n": self.problem.n,
                "p": self.problem.p,
                "schedule": self.schedule.describe(),
                "init_rule": self.init_rule,
                "event_triggered": self.event_triggered,
            },
        )


class _StackedLoop(_GenericLoop):
    """Agent-batched round loop for problems with uniform shapes.

    Runs the same update as the per-agent path, a few array ops per round
    instead of a few per agent. Used whenever every agent has the same
    constraint dimension; batched and per-agent results agree to roundoff.
    """

    def execute(self):
        problem, schedule = self.problem, self.schedule
        horizon, n = self.horizon, problem.n
        states = init_agents(problem, init_rule=self.init_rule, seed=self.seed)
        x = np.stack([st.x for st in states])
        x_hat = x.copy()
        q = np.stack([st.dual for st in states])
        triggers = np.ones(n, dtype=int)

        for t in range(1, horizon + 1):
            self.clock.commit(t)
            self.clock.check(t)
            stacked = problem.round_stacked(t)
            if stacked is None:
                raise RunFailure(f"round {t} lost the uniform agent shapes")
            resid = (
                np.einsum("nqp,np->nq", stacked.designs, x) - stacked.targets
            )
            self.own_losses[t - 1] = 0.5 * np.einsum("nq,nq->n", resid, resid)
            gvals = (
                np.einsum("nmp,np->nm", stacked.constraint_matrices, x)
                - stacked.constraint_offsets
            )
            self.own_constraints.append(gvals.copy())
            if self.record_decisions:
                self.decisions[t - 1] = x
            if self.trace_states:
                self.broadcast_values[t - 1] = x_hat
                self.duals.append([row.copy() for row in q])
            if t == horizon:
                break

            alpha_next = schedule.alpha(t + 1)
            beta_next = schedule.beta(t + 1)
            gamma_next = schedule.gamma(t + 1)
            tau_next = schedule.tau(t + 1)
            w = np.asarray(self.mixing.matrix(t), dtype=float)
            if w.shape != (n, n):
                raise RunFailure(f"mixing matrix for round {t} has shape {w.shape}")
            z = w @ x_hat

            grads = np.einsum("nqp,nq->np", stacked.designs, resid)
            rows = np.where(
                (gvals > 0.0)[:, :, None], stacked.constraint_matrices, 0.0
            )
            direction = grads + np.einsum("nmp,nm->np", rows, q)
            x_next = np.clip(
                z - alpha_next * direction, problem.box.lower, problem.box.upper
            )
            q = np.maximum(
                (1.0 - beta_next * gamma_next) * q
                + gamma_next
                * (np.maximum(gvals, 0.0) + np.einsum("nmp,np->nm", rows, x_next - x)),
                0.0,
            )
            if self.event_triggered:
                drift = np.sqrt(((x_next - x_hat) ** 2).sum(axis=1))
                fired = drift >= tau_next
            else:
                fired = np.ones(n, dtype=bool)
            x_hat = np.where(fired[:, None], x_next, x_hat)
            triggers += fired
            self.broadcasts[t] = fired
            x = x_next
            gap = np.sqrt(((x_hat - x) ** 2).sum(axis=1))
            self.max_gap_excess = max(
                self.max_gap_excess, float(np.max(gap) - tau_next)
            )
        return self._record(triggers)

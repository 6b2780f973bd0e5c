"""Parameter sequences for the runtime and their theoretical rate tables.

Two built-in families are provided. In the trigger-coupled family the primal
step size is tied to the running budget of the broadcast thresholds,

    alpha_t = sqrt(Psi_t / t),  beta_t = t^-kappa,  gamma_t = t^-(1-kappa),

where ``Psi_t`` is the running sum of the thresholds ``tau_1 + ... + tau_t``
and ``kappa`` is in (0, 1). In the decoupled family the four sequences are
independent powers,

    alpha_t = alpha0 / t^theta1,  beta_t = t^-theta2,
    gamma_t = t^-(1-theta2),      tau_t = tau0 / t^theta3,

with theta1, theta2 in (0, 1) and alpha0, theta3 positive (tau0 may be zero,
which disables event-triggered broadcasting entirely).

Both families keep ``beta_t * gamma_t = 1/t <= 1``, which the dual update
requires, and all sequences decrease as the round index grows. The running
threshold sum is accumulated by compensated (Kahan) summation and memoized,
never replaced by a closed form, so arbitrary threshold families stay exact.

:func:`predicted_rates` maps a schedule to the structured growth exponents of
the regret and cumulative-violation guarantees, selecting among the tabulated
parameter cases so tests can compare the selection literally.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from etopt.errors import ConfigError, UnsupportedCaseError


# ---------------------------------------------------------------------------
# threshold families


@dataclass(frozen=True)
class ThresholdFamily:
    """Event-trigger threshold sequence tau_t, nonnegative and non-increasing.

    kind "poly" is tau0 / t**exponent; "geo" is ratio**-t; "custom" wraps an
    arbitrary callable (scans then fall back to per-element evaluation).
    """

    kind: str
    tau0: float = 1.0
    exponent: float = 1.0
    ratio: float = 2.0
    func: object = None

    def value(self, t):
        if t < 1:
            raise ValueError("rounds are 1-based")
        if self.kind == "poly":
            return self.tau0 / t**self.exponent
        if self.kind == "geo":
            return self.ratio ** (-t)
        return float(self.func(t))

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        if self.kind == "poly":
            return self.tau0 / ts**self.exponent
        if self.kind == "geo":
            return self.ratio ** (-ts)
        return np.array([float(self.func(int(t))) for t in ts])

    def describe(self):
        if self.kind == "poly":
            return f"poly(tau0={self.tau0:g}, exponent={self.exponent:g})"
        if self.kind == "geo":
            return f"geo(ratio={self.ratio:g})"
        return "custom"


def poly_threshold(tau0=1.0, theta=1.0):
    """Polynomially decaying thresholds tau0 / t**theta."""
    if tau0 < 0:
        raise ConfigError("tau0 must be nonnegative")
    if theta <= 0:
        raise ConfigError("threshold decay exponent must be positive")
    return ThresholdFamily(kind="poly", tau0=float(tau0), exponent=float(theta))


def geometric_threshold(ratio):
    """Geometrically decaying thresholds ratio**-t; requires ratio > 1."""
    if ratio <= 1:
        raise ConfigError("geometric threshold ratio must exceed 1")
    return ThresholdFamily(kind="geo", ratio=float(ratio))


def custom_threshold(func):
    """Wrap a callable t -> tau_t. The caller vouches for monotonicity."""
    return ThresholdFamily(kind="custom", func=func)


# ---------------------------------------------------------------------------
# schedules


class Schedule:
    """The four parameter sequences used by the runtime, all 1-based in t."""

    def __init__(self, threshold, meta, label):
        self.threshold = threshold
        self.meta = meta
        self.label = label
        self._lock = threading.Lock()
        self._psi = np.zeros(0)
        self._count = 0
        self._running = 0.0
        self._comp = 0.0

    # Subclasses implement alpha/beta/gamma plus the vectorized *_values.

    def tau(self, t):
        return self.threshold.value(t)

    def tau_values(self, ts):
        return self.threshold.values(ts)

    def cumulative_threshold(self, t):
        """Running sum tau_1 + ... + tau_t (compensated, memoized)."""
        self._extend(t)
        return float(self._psi[t - 1])

    def cumulative_values(self, upto):
        self._extend(upto)
        return self._psi[:upto].copy()

    def _extend(self, upto):
        if self._count >= upto:
            return
        with self._lock:
            if self._count >= upto:
                return
            new = self.threshold.values(np.arange(self._count + 1, upto + 1))
            if np.any(new < 0):
                raise ConfigError("threshold sequence must be nonnegative")
            grown = np.empty(upto)
            grown[: self._count] = self._psi[: self._count]
            running, comp = self._running, self._comp
            for k, tau_t in enumerate(new, start=self._count):
                y = float(tau_t) - comp
                s = running + y
                comp = (s - running) - y
                running = s
                grown[k] = s
            # Publish the array before the counter so concurrent readers
            # never see an index past the filled prefix.
            self._psi = grown
            self._running, self._comp = running, comp
            self._count = upto

    def describe(self):
        return f"{self.label}({self.meta})"


@dataclass(frozen=True)
class CoupledMeta:
    kappa: float
    threshold: ThresholdFamily


@dataclass(frozen=True)
class DecoupledMeta:
    alpha0: float
    theta1: float
    theta2: float
    tau0: float
    theta3: float


class _CoupledSchedule(Schedule):
    def __init__(self, kappa, threshold):
        super().__init__(threshold, CoupledMeta(kappa, threshold), "trigger_coupled")
        self.kappa = kappa

    def alpha(self, t):
        return math.sqrt(self.cumulative_threshold(t) / t)

    def beta(self, t):
        return t**-self.kappa

    def gamma(self, t):
        return t ** -(1.0 - self.kappa)

    def alpha_values(self, ts):
        ts = np.asarray(ts, dtype=int)
        psi = self.cumulative_values(int(ts.max()))
        return np.sqrt(psi[ts - 1] / ts)

    def beta_values(self, ts):
        return np.asarray(ts, dtype=float) ** -self.kappa

    def gamma_values(self, ts):
        return np.asarray(ts, dtype=float) ** -(1.0 - self.kappa)


class _DecoupledSchedule(Schedule):
    def __init__(self, alpha0, theta1, theta2, tau0, theta3):
        threshold = ThresholdFamily(kind="poly", tau0=tau0, exponent=theta3)
        meta = DecoupledMeta(alpha0, theta1, theta2, tau0, theta3)
        super().__init__(threshold, meta, "decoupled")
        self.alpha0 = alpha0
        self.theta1 = theta1
        self.theta2 = theta2
        self.tau0 = tau0
        self.theta3 = theta3

    def alpha(self, t):
        return self.alpha0 / t**self.theta1

    def beta(self, t):
        return t**-self.theta2

    def gamma(self, t):
        return t ** -(1.0 - self.theta2)

    def alpha_values(self, ts):
        return self.alpha0 / np.asarray(ts, dtype=float) ** self.theta1

    def beta_values(self, ts):
        return np.asarray(ts, dtype=float) ** -self.theta2

    def gamma_values(self, ts):
        return np.asarray(ts, dtype=float) ** -(1.0 - self.theta2)


def trigger_coupled_schedule(kappa, threshold):
    """Schedule whose primal step tracks the threshold budget.

    Requires kappa in (0, 1) and a threshold family with tau_1 > 0 (an
    all-zero threshold leaves the step size undefined; use the decoupled
    schedule with tau0 = 0 for the always-broadcast regime).
    """
    if not 0.0 < kappa < 1.0:
        raise ConfigError("kappa out of (0, 1)")
    if threshold.value(1) <= 0.0:
        raise ConfigError(
            "trigger-coupled schedule needs tau_1 > 0; "
            "with an all-zero threshold use the decoupled schedule"
        )
    return _CoupledSchedule(float(kappa), threshold)


def decoupled_schedule(alpha0, theta1, theta2, tau0, theta3):
    """Schedule with independent power-law sequences."""
    if alpha0 <= 0:
        raise ConfigError("alpha0 must be positive")
    if not 0.0 < theta1 < 1.0:
        raise ConfigError("theta1 out of (0, 1)")
    if not 0.0 < theta2 < 1.0:
        raise ConfigError("theta2 out of (0, 1)")
    if tau0 < 0:
        raise ConfigError("tau0 must be nonnegative")
    if theta3 <= 0:
        raise ConfigError("theta3 must be positive")
    return _DecoupledSchedule(
        float(alpha0), float(theta1), float(theta2), float(tau0), float(theta3)
    )


# ---------------------------------------------------------------------------
# invariant scans


def scan_schedule(schedule, horizon):
    """Scan the four sequences up to ``horizon`` for the model requirements.

    Checks: alpha, beta, gamma strictly positive and decreasing; tau
    nonnegative and non-increasing from round 2 on; beta*gamma <= 1
    everywhere; and positivity of the per-round dual coefficient
    1/gamma_t - 1/gamma_{t+1} + beta_{t+1}, which the violation analysis
    needs term by term. Returns a list of (name, passed, detail) triples.
    """
    ts = np.arange(1, horizon + 1)
    alpha = schedule.alpha_values(ts)
    beta = schedule.beta_values(ts)
    gamma = schedule.gamma_values(ts)
    tau = schedule.tau_values(ts)
    results = []

    def mono(name, seq, strict, start=0):
        diffs = np.diff(seq[start:])
        bad = np.where(diffs >= 0 if strict else diffs > 0)[0]
        ok = bad.size == 0
        detail = "" if ok else f"first violation at t={int(bad[0]) + start + 1}"
        results.append((name, ok, detail))

    for name, seq in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        pos = bool(np.all(seq > 0))
        results.append((f"{name}-positive", pos, "" if pos else "nonpositive entry"))
        mono(f"{name}-decreasing", seq, strict=True)
    nonneg = bool(np.all(tau >= 0))
    results.append(("tau-nonnegative", nonneg, "" if nonneg else "negative entry"))
    mono("tau-nonincreasing", tau, strict=False, start=1)

    product_ok = bool(np.all(beta * gamma <= 1.0))
    results.append(
        (
            "dual-step-product",
            product_ok,
            "" if product_ok else "beta*gamma exceeds 1",
        )
    )
    dual_coeff = 1.0 / gamma[:-1] - 1.0 / gamma[1:] + beta[1:]
    coeff_ok = bool(np.all(dual_coeff > 0))
    results.append(
        (
            "dual-coefficient-positive",
            coeff_ok,
            "" if coeff_ok else "nonpositive dual coefficient",
        )
    )
    return results


# ---------------------------------------------------------------------------
# theoretical growth rates


@dataclass(frozen=True)
class RateTerm:
    """One additive term of a growth bound.

    The term reads ``scale * T**t_power * log(T)**log_power *
    Psi_T**budget_power`` with an optional multiplier of the comparator path
    length. ``scale`` is kept symbolic (a string) so tests compare the
    printed structure, not a numeric simplification.
    """

    t_power: float
    log_power: float = 0.0
    budget_power: float = 0.0
    path_factor: str = ""  # "", "P_T", or "1+P_T"
    scale: str = "1"


@dataclass(frozen=True)
class RatePrediction:
    regret_case: str
    ccv_case: str
    regret: tuple = field(default_factory=tuple)
    ccv: tuple = field(default_factory=tuple)


def _coupled_rates(meta):
    kappa = meta.kappa
    fam = meta.threshold
    if fam.kind == "poly":
        if fam.tau0 <= 0:
            raise UnsupportedCaseError("all-zero threshold has no coupled rate case")
        theta = fam.exponent
        if theta < 1.0:
            case = "0<theta<1"
            regret = (
                RateTerm(max(kappa, 1.0 - theta / 2.0)),
                RateTerm(theta / 2.0, path_factor="P_T"),
            )
            ccv = (RateTerm(max(1.0 - kappa / 2.0, 1.0 - theta / 4.0)),)
        elif theta == 1.0:
            case = "theta=1"
            regret = (
                RateTerm(kappa),
                RateTerm(0.5, log_power=0.5),
                RateTerm(0.5, log_power=-0.5, path_factor="P_T"),
            )
            ccv = (RateTerm(1.0 - kappa / 2.0), RateTerm(0.75, log_power=0.25))
        else:
            case = "theta>1"
            regret = (
                RateTerm(max(kappa, 0.5)),
                RateTerm(0.5, path_factor="P_T"),
            )
            ccv = (RateTerm(max(1.0 - kappa / 2.0, 0.75)),)
        return RatePrediction(case, case, regret, ccv)
    if fam.kind == "geo":
        regret = (RateTerm(max(kappa, 0.5)), RateTerm(0.5, path_factor="P_T"))
        ccv = (RateTerm(max(1.0 - kappa / 2.0, 0.75)),)
        return RatePrediction("geometric", "geometric", regret, ccv)
    # Custom thresholds only admit the budget-parameterized general form.
    regret = (
        RateTerm(kappa),
        RateTerm(0.5, budget_power=0.5),
        RateTerm(0.5, budget_power=-0.5, path_factor="P_T"),
    )
    ccv = (RateTerm(1.0 - kappa / 2.0), RateTerm(0.75, budget_power=0.25))
    return RatePrediction("general", "general", regret, ccv)


def _decoupled_rates(meta):
    a0, t1, t2, tau0, t3 = (
        meta.alpha0,
        meta.theta1,
        meta.theta2,
        meta.tau0,
        meta.theta3,
    )
    if t3 <= t1:
        raise UnsupportedCaseError(
            "threshold must decay faster than the primal step (theta3 > theta1)"
        )
    common = (RateTerm(1.0 - t1, scale="alpha0"), RateTerm(t2))
    path = RateTerm(t1, path_factor="1+P_T", scale="1/alpha0")
    if t3 < 1.0 + t1:
        regret_case = "theta1<theta3<1+theta1"
        regret = common + (RateTerm(1.0 + t1 - t3, scale="tau0/alpha0"), path)
    elif t3 == 1.0 + t1:
        regret_case = "theta3=1+theta1"
        regret = common + (RateTerm(0.0, log_power=1.0, scale="tau0/alpha0"), path)
    else:
        regret_case = "theta3>1+theta1"
        regret = common + (RateTerm(0.0, scale="tau0/alpha0"), path)
    ccv_common = (
        RateTerm(1.0 - t1 / 2.0, scale="sqrt(alpha0)"),
        RateTerm(1.0 - t2 / 2.0),
    )
    if t3 < 1.0:
        ccv_case = "theta1<theta3<1"
        ccv = ccv_common + (RateTerm(1.0 - t3 / 2.0, scale="sqrt(tau0)"),)
    elif t3 == 1.0:
        ccv_case = "theta3=1"
        ccv = ccv_common + (RateTerm(0.5, log_power=0.5, scale="sqrt(tau0)"),)
    else:
        ccv_case = "theta3>1"
        ccv = ccv_common + (RateTerm(0.5, scale="sqrt(tau0)"),)
    return RatePrediction(regret_case, ccv_case, regret, ccv)


def predicted_rates(schedule_or_meta):
    """Structured growth exponents of the regret and violation guarantees.

    Accepts a schedule or its meta record. Raises
    :class:`UnsupportedCaseError` when the parameters fall outside every
    tabulated case (for the decoupled family that is theta3 <= theta1, where
    no sublinear guarantee is tabulated).
    """
    meta = getattr(schedule_or_meta, "meta", schedule_or_meta)
    if isinstance(meta, CoupledMeta):
        return _coupled_rates(meta)
    if isinstance(meta, DecoupledMeta):
        return _decoupled_rates(meta)
    raise UnsupportedCaseError(f"no rate table for schedule meta {meta!r}")

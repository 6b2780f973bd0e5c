import math
import threading
from fractions import Fraction

import numpy as np
import pytest

from etopt.errors import ConfigError, UnsupportedCaseError
from etopt.schedules import (
    RateTerm,
    custom_threshold,
    decoupled_schedule,
    geometric_threshold,
    poly_threshold,
    predicted_rates,
    scan_schedule,
    trigger_coupled_schedule,
)


def harmonic(t):
    return sum(Fraction(1, s) for s in range(1, t + 1))


def test_coupled_direct_substitution():
    sched = trigger_coupled_schedule(0.5, poly_threshold(1.0, 1.0))
    assert sched.cumulative_threshold(1) == 1.0
    assert sched.alpha(1) == 1.0
    assert sched.beta(1) == 1.0
    assert sched.gamma(1) == 1.0
    assert sched.cumulative_threshold(2) == 1.5
    assert sched.alpha(2) == pytest.approx(math.sqrt(0.75), abs=1e-15)
    assert sched.beta(2) == pytest.approx(2**-0.5, abs=1e-15)
    assert sched.gamma(2) == pytest.approx(2**-0.5, abs=1e-15)


def test_coupled_alpha_matches_harmonic_closed_form():
    sched = trigger_coupled_schedule(0.3, poly_threshold(1.0, 1.0))
    for t in (1, 2, 10, 100):
        expected = math.sqrt(float(harmonic(t)) / t)
        assert abs(sched.alpha(t) - expected) < 1e-12


def test_cumulative_matches_independent_resummation():
    rng = np.random.default_rng(6)
    taus = np.sort(rng.uniform(0.0, 2.0, size=10_000))[::-1]
    fam = custom_threshold(lambda t: float(taus[t - 1]))
    sched = trigger_coupled_schedule(0.5, fam)
    for t in (1, 7, 100, 2_500, 10_000):
        assert abs(sched.cumulative_threshold(t) - math.fsum(taus[:t])) < 1e-12


def test_dual_product_identity_both_families():
    ts = np.arange(1, 1_000_001)
    coupled = trigger_coupled_schedule(0.25, poly_threshold(1.0, 1.0))
    decoupled = decoupled_schedule(1.0, 0.5, 0.5, 50.0, 1.0)
    for sched in (coupled, decoupled):
        prod = sched.beta_values(ts) * sched.gamma_values(ts)
        assert np.all(prod <= 1.0)
        assert prod[0] == 1.0


def test_decoupled_examples():
    sched = decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0)
    ts = np.arange(1, 50)
    assert np.all(sched.tau_values(ts) == 0.0)
    assert sched.alpha(9) == pytest.approx(1 / 3)
    assert sched.beta(9) == pytest.approx(1 / 3)
    assert sched.gamma(9) == pytest.approx(1 / 3)
    assert decoupled_schedule(2.0, 0.5, 0.5, 0.0, 1.0).alpha(4) == 1.0


def test_threshold_families():
    poly = poly_threshold(1.0, 1.0)
    assert [poly.value(t) for t in (1, 2, 3)] == [1.0, 0.5, pytest.approx(1 / 3)]
    geo = geometric_threshold(2.0)
    assert [geo.value(t) for t in (1, 2, 3)] == [0.5, 0.25, 0.125]
    ts = np.arange(1, 10_001)
    for fam in (poly, geo, poly_threshold(50.0, 2.0)):
        vals = fam.values(ts)
        assert np.all(np.diff(vals) <= 0)
        assert np.all(vals >= 0)


def test_parameter_validation():
    with pytest.raises(ConfigError, match="kappa out of"):
        trigger_coupled_schedule(1.5, poly_threshold(1.0, 1.0))
    with pytest.raises(ConfigError, match="kappa out of"):
        trigger_coupled_schedule(0.0, poly_threshold(1.0, 1.0))
    with pytest.raises(ConfigError):
        geometric_threshold(1.0)
    with pytest.raises(ConfigError):
        poly_threshold(-1.0, 1.0)
    with pytest.raises(ConfigError):
        poly_threshold(1.0, 0.0)
    # An all-zero threshold leaves the coupled step size undefined.
    with pytest.raises(ConfigError, match="tau_1 > 0"):
        trigger_coupled_schedule(0.5, poly_threshold(0.0, 1.0))
    with pytest.raises(ConfigError):
        decoupled_schedule(0.0, 0.5, 0.5, 1.0, 1.0)
    with pytest.raises(ConfigError):
        decoupled_schedule(1.0, 1.2, 0.5, 1.0, 1.0)
    with pytest.raises(ConfigError):
        decoupled_schedule(1.0, 0.5, 0.5, -1.0, 1.0)


SHIPPED = [
    trigger_coupled_schedule(0.5, poly_threshold(1.0, 1.0)),
    trigger_coupled_schedule(0.25, poly_threshold(1.0, 0.5)),
    trigger_coupled_schedule(0.75, poly_threshold(1.0, 2.0)),
    trigger_coupled_schedule(0.5, geometric_threshold(2.0)),
    decoupled_schedule(1.0, 0.5, 0.5, 0.0, 1.0),
    decoupled_schedule(1.0, 0.5, 0.5, 50.0, 1.0),
]


@pytest.mark.parametrize("sched", SHIPPED, ids=lambda s: s.describe())
def test_scans_pass_for_shipped_schedules(sched):
    results = scan_schedule(sched, 100_000)
    failed = [name for name, ok, _ in results if not ok]
    assert failed == []


def test_scan_catches_violations():
    bad = decoupled_schedule(1.0, 0.5, 0.5, 1.0, 1.0)
    bad.threshold = custom_threshold(lambda t: 1.0 if t != 5 else 2.0)
    names = {name: ok for name, ok, _ in scan_schedule(bad, 10)}
    assert not names["tau-nonincreasing"]


def test_cumulative_thread_safe():
    sched = trigger_coupled_schedule(0.5, poly_threshold(1.0, 1.0))
    results = []

    def worker():
        results.append(sched.cumulative_threshold(50_000))

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(set(results)) == 1


# ---------------------------------------------------------------------------
# predicted growth rates, table-driven over every printed case


def term_set(terms):
    return {
        (t.t_power, t.log_power, t.budget_power, t.path_factor, t.scale)
        for t in terms
    }


def test_rates_poly_slow_decay():
    pred = predicted_rates(trigger_coupled_schedule(0.3, poly_threshold(1.0, 0.5)))
    assert pred.regret_case == "0<theta<1"
    assert term_set(pred.regret) == {
        (max(0.3, 1 - 0.25), 0.0, 0.0, "", "1"),
        (0.25, 0.0, 0.0, "P_T", "1"),
    }
    assert term_set(pred.ccv) == {(max(1 - 0.15, 1 - 0.125), 0.0, 0.0, "", "1")}


def test_rates_poly_unit_decay():
    pred = predicted_rates(trigger_coupled_schedule(0.5, poly_threshold(1.0, 1.0)))
    assert pred.regret_case == "theta=1"
    assert term_set(pred.regret) == {
        (0.5, 0.0, 0.0, "", "1"),
        (0.5, 0.5, 0.0, "", "1"),
        (0.5, -0.5, 0.0, "P_T", "1"),
    }
    assert term_set(pred.ccv) == {
        (0.75, 0.0, 0.0, "", "1"),
        (0.75, 0.25, 0.0, "", "1"),
    }


def test_rates_poly_fast_decay():
    pred = predicted_rates(trigger_coupled_schedule(0.3, poly_threshold(1.0, 2.0)))
    assert pred.regret_case == "theta>1"
    assert term_set(pred.regret) == {
        (0.5, 0.0, 0.0, "", "1"),
        (0.5, 0.0, 0.0, "P_T", "1"),
    }
    assert term_set(pred.ccv) == {(max(1 - 0.15, 0.75), 0.0, 0.0, "", "1")}


def test_rates_geometric_match_fast_poly():
    kappa = 0.6
    geo = predicted_rates(trigger_coupled_schedule(kappa, geometric_threshold(2.0)))
    fast = predicted_rates(trigger_coupled_schedule(kappa, poly_threshold(1.0, 2.0)))
    assert geo.regret_case == "geometric"
    assert term_set(geo.regret) == term_set(fast.regret)
    assert term_set(geo.ccv) == term_set(fast.ccv)


def test_rates_coupled_general_budget_form():
    pred = predicted_rates(
        trigger_coupled_schedule(0.4, custom_threshold(lambda t: 1.0 / t))
    )
    assert pred.regret_case == "general"
    assert term_set(pred.regret) == {
        (0.4, 0.0, 0.0, "", "1"),
        (0.5, 0.0, 0.5, "", "1"),
        (0.5, 0.0, -0.5, "P_T", "1"),
    }
    assert term_set(pred.ccv) == {
        (0.8, 0.0, 0.0, "", "1"),
        (0.75, 0.0, 0.25, "", "1"),
    }


def test_rates_decoupled_middle_case():
    pred = predicted_rates(decoupled_schedule(1.0, 0.5, 0.4, 2.0, 1.0))
    assert pred.regret_case == "theta1<theta3<1+theta1"
    assert term_set(pred.regret) == {
        (0.5, 0.0, 0.0, "", "alpha0"),
        (0.4, 0.0, 0.0, "", "1"),
        (0.5, 0.0, 0.0, "", "tau0/alpha0"),
        (0.5, 0.0, 0.0, "1+P_T", "1/alpha0"),
    }
    assert pred.ccv_case == "theta3=1"
    assert term_set(pred.ccv) == {
        (0.75, 0.0, 0.0, "", "sqrt(alpha0)"),
        (0.8, 0.0, 0.0, "", "1"),
        (0.5, 0.5, 0.0, "", "sqrt(tau0)"),
    }


def test_rates_decoupled_log_and_flat_cases():
    pred = predicted_rates(decoupled_schedule(1.0, 0.5, 0.5, 2.0, 1.5))
    assert pred.regret_case == "theta3=1+theta1"
    assert (0.0, 1.0, 0.0, "", "tau0/alpha0") in term_set(pred.regret)
    assert pred.ccv_case == "theta3>1"
    assert (0.5, 0.0, 0.0, "", "sqrt(tau0)") in term_set(pred.ccv)

    pred = predicted_rates(decoupled_schedule(1.0, 0.5, 0.5, 2.0, 2.0))
    assert pred.regret_case == "theta3>1+theta1"
    assert (0.0, 0.0, 0.0, "", "tau0/alpha0") in term_set(pred.regret)

    pred = predicted_rates(decoupled_schedule(1.0, 0.5, 0.5, 2.0, 0.75))
    assert pred.regret_case == "theta1<theta3<1+theta1"
    assert pred.ccv_case == "theta1<theta3<1"
    assert (1 - 0.375, 0.0, 0.0, "", "sqrt(tau0)") in term_set(pred.ccv)


def test_rates_unsupported_cases():
    with pytest.raises(UnsupportedCaseError):
        predicted_rates(decoupled_schedule(1.0, 0.5, 0.5, 1.0, 0.5))
    with pytest.raises(UnsupportedCaseError):
        predicted_rates(decoupled_schedule(1.0, 0.5, 0.5, 1.0, 0.25))
    with pytest.raises(UnsupportedCaseError):
        predicted_rates(object())


def test_rate_term_is_structured():
    term = RateTerm(0.5, path_factor="P_T")
    assert term.t_power == 0.5 and term.scale == "1"

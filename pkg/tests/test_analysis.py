import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incremental_adaptive import analysis as an
from incremental_adaptive.config import default_scenario, integral_scenario, robust_scenario
from incremental_adaptive.errors import ContractViolation
from incremental_adaptive.simulate import simulate

from oracles import bump_energy, trapezoid


def test_lyapunov_V():
    assert an.lyapunov_V(3.0) == 4.5
    assert np.array_equal(an.lyapunov_V(np.array([-2.0, 0.0])), [2.0, 0.0])


def test_krasovskii_L_by_hand():
    # |theta_tilde|^2 = 2 over a window of 0.5: 1 + 2 / 8 * 1
    window = np.ones((6, 2))
    assert an.krasovskii_L(1.0, window, b=2.0, gamma=4.0, tau=0.5) == pytest.approx(1.25)
    assert an.krasovskii_L(1.0, window, b=-2.0, gamma=4.0, tau=0.5) == pytest.approx(1.25)


def test_krasovskii_L_rejects_nonfinite():
    with pytest.raises(ValueError):
        an.krasovskii_L(0.0, [[1.0], [math.nan]], 1.0, 1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 20), st.integers(0, 30))
def test_window_integral_is_exact_for_linear(a, c, m, extra):
    h = 0.05
    tau = m * h
    t = np.arange(m + extra + 1) * h
    end = t[-1]
    got = an.window_integral(a * t + c, tau, end, h)
    exact = a * (end ** 2 - (end - tau) ** 2) / 2 + c * tau
    assert got == pytest.approx(exact, rel=1e-9, abs=1e-9)


def test_window_integral_coverage_gap():
    v = np.ones(11)
    with pytest.raises(ValueError, match="not covered"):
        an.window_integral(v, 0.5, 0.3, 0.1)
    with pytest.raises(ValueError):
        an.window_integral(v, 0.25, 1.0, 0.1)  # tau off the grid


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40), st.integers(1, 5))
def test_sliding_trapezoid_matches_direct_sums(values, m):
    h = 0.1
    got = an.sliding_trapezoid(values, h, m)
    want = [trapezoid(values[i:i + m + 1], h) for i in range(len(values) - m)]
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_sliding_trapezoid_left_limits_integrate_a_step_exactly():
    h, m = 0.25, 8
    t = np.arange(9) * h
    values = (t >= 1.0).astype(float)
    left = values.copy()
    left[4] = 0.0  # approaching t = 1 from below
    assert an.sliding_trapezoid(values, h, m, left)[0] == pytest.approx(1.0, abs=1e-15)
    assert an.sliding_trapezoid(values, h, m)[0] == pytest.approx(1.125)


def test_partial_window_series_grows_then_slides():
    got = an.partial_window_series(np.ones(7), 0.5, 2)
    assert np.allclose(got, [0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0])


@pytest.mark.parametrize(
    "err, expected",
    [([1.0, 0.5, 0.0, 0.0], 2.0), ([0.0, 0.0], 0.0), ([0.0, 1.0], math.inf)],
)
def test_settling_time(err, expected):
    t = np.arange(len(err), dtype=float)
    assert an.settling_time(t, np.array(err), 0.1) == expected


def test_L_steps():
    L = np.array([5.0, 4.0, 3.0, 3.5, 1.0, 0.0])
    assert np.array_equal(an.L_steps(L, 2, 0), [-2.0, -2.0])
    assert np.array_equal(an.L_steps(L, 2, 1), [-0.5, -3.5])


@pytest.mark.parametrize(
    "passed, advisory, status",
    [(True, False, "PASS"), (False, False, "FAIL"), (False, True, "WARN"), (None, False, "SKIP")],
)
def test_verdict_status(passed, advisory, status):
    v = an.Verdict(passed, 1.0, 3.0, advisory=advisory)
    assert v.status == status and v.margin == 2.0


def test_advisory_failures_do_not_fail_a_run():
    m = an.RunMetrics(0, 0, 0, 0, 0, 0, 0, 0, 0)
    m.verdicts["a"] = an.Verdict(False, advisory=True)
    assert m.passed
    m.verdicts["b"] = an.Verdict(False)
    assert m.failures() == ["b"]


# windowed lemma monitor


def test_barbalat_zero_signal():
    lv = an.barbalat_monitor(np.zeros(3001), 1e-3, 1.0)
    assert lv.profile() == (True, True, True) and lv.consistent


def test_barbalat_rejects_negative_samples():
    with pytest.raises(ContractViolation):
        an.barbalat_monitor(np.array([0.0, -1e-3, 0.0]), 0.5, 0.5)


@pytest.mark.parametrize("family", an.LEMMA_FAMILIES)
def test_lemma_families_match_expected_profiles(family):
    g, h, tau = an.lemma_family(family)
    lv = an.barbalat_monitor(g, h, tau)
    assert lv.profile() == an.EXPECTED_PROFILES[family]
    assert lv.consistent


def test_exponential_window_integral():
    g, h, tau = an.lemma_family("exponential")
    lv = an.barbalat_monitor(g, h, tau)
    T = (len(g) - 1) * h
    assert lv.window_final == pytest.approx(math.exp(-(T - tau)) - math.exp(-T), rel=1e-6)


def test_bump_train_energy_against_closed_form():
    g, h, tau = an.lemma_family("bump_train")
    lv = an.barbalat_monitor(g, h, tau)
    # the worst window holds the narrowest bump and at most the next one
    assert bump_energy(2.0 ** -13) * 0.99 <= lv.gdot_energy_sup
    assert lv.gdot_energy_sup <= bump_energy(2.0 ** -13) + bump_energy(2.0 ** -12)
    # each bump integrates to w / 2, so windows never decay to zero
    assert lv.window_final == pytest.approx(2.0 ** -14, rel=1e-3)


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown lemma family"):
        an.lemma_family("nope")


def test_explicit_bound_decides_hypothesis():
    g, h, tau = an.lemma_family("exponential")
    assert an.barbalat_monitor(g, h, tau, M=1.0).hypothesis_bounded
    assert not an.barbalat_monitor(g, h, tau, M=1e-3).hypothesis_bounded


def test_derivative_bound_monitor():
    t = np.arange(2001) * 1e-2
    assert an.derivative_bound_monitor(np.exp(-t), 1e-2)[0]
    assert not an.derivative_bound_monitor(np.exp(0.2 * t), 1e-2)[0]


# run-level metrics


def test_compare_identical_runs(run):
    d = an.compare_runs(run("default"), run("default"))
    assert d.sup_state == d.l2_state == d.sup_theta == 0.0


def test_compare_rejects_grid_mismatch():
    a = simulate(default_scenario(integrator__t_final=1.0))
    b = simulate(default_scenario(integrator__t_final=2.0))
    with pytest.raises(ValueError, match="same grid"):
        an.compare_runs(a, b)


def test_metrics_on_exact_tracking_run():
    cfg = default_scenario(plant__constant_reference=True, reference__kind="constant",
                           plant__theta0=(0.0, 1.0), adaptation__theta_hat0=(0.0, 1.0),
                           integrator__t_final=5.0)
    traj = simulate(cfg)
    m = an.run_metrics(traj)
    assert m.sup_e == 0.0 and m.final_winV == 0.0 and m.settling_time == 0.0
    assert m.passed, m.failures()
    assert np.all(traj.monitor("L") == traj.monitor("L")[0])


def test_short_horizon_skips_monitors():
    m = an.run_metrics(simulate(default_scenario(integrator__t_final=0.5)))
    assert m.verdicts["horizon"].status == "SKIP"
    assert m.passed


def test_integral_law_dissipation_is_exact():
    # V' = -2 kappa |b| V and the parameter term cancels the cross term,
    # so the slack is pure finite-difference error, second order in h
    worst = []
    for h in (1e-3, 5e-4):
        slack, _ = an.dL_inequality(simulate(integral_scenario(integrator__h=h,
                                                                integrator__t_final=20.0)))
        worst.append(np.abs(slack[1:-1]).max())
    assert worst[0] < 1e-5
    assert worst[0] / worst[1] > 3.5


def test_dL_inequality_holds_on_finer_grid():
    traj = simulate(default_scenario(integrator__h=5e-4))
    slack, allowance = an.dL_inequality(traj)
    assert np.all(slack <= allowance)


def test_robust_L_steps_shrink_with_h():
    steps = [an.run_metrics(simulate(robust_scenario(integrator__t_final=30.0,
                                                     integrator__h=h))).L_step_max
             for h in (1e-3, 5e-4)]
    assert steps[1] < steps[0] / 1.5

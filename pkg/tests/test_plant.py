import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incremental_adaptive import plant
from incremental_adaptive.errors import ConfigurationError, ContractViolation


@pytest.mark.parametrize(
    "name, t, x, expected",
    [
        ("sincos", 0.0, 0.0, [0.0, 1.0]),
        ("sincos", 0.0, math.pi / 2, [1.0, math.cos(math.pi / 2)]),
        ("bounded_rational", 7.3, 3.0, [0.3, 1.0]),
    ],
)
def test_regressor_values(name, t, x, expected):
    assert np.allclose(plant.eval_regressor(name, t, x), expected, rtol=0, atol=1e-15)


def test_unknown_regressor():
    with pytest.raises(ConfigurationError):
        plant.get_regressor("no_such_regressor")


def test_regressor_rejects_nonfinite_state():
    with pytest.raises(ContractViolation):
        plant.eval_regressor("sincos", 0.0, float("nan"))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([n for n, r in plant.REGRESSORS.items() if r.bounded]),
       st.floats(-1e3, 1e3), st.floats(-1e6, 1e6))
def test_bounded_regressors_respect_declared_bound(name, t, x):
    reg = plant.get_regressor(name)
    phi = plant.eval_regressor(name, t, x)
    assert phi.shape == (reg.dim,)
    assert np.linalg.norm(phi) <= reg.bound + 1e-12


@pytest.mark.parametrize(
    "theta0, b, x, u, expected",
    [
        ([0.0, 0.0], 1.0, 0.7, 0.0, 0.0),
        ([1.0, 0.0], 2.0, math.pi / 2, 1.0, 3.0),
        ([2.0, -1.0], -1.0, 0.0, 0.5, -1.5),
    ],
)
def test_scalar_dynamics(theta0, b, x, u, expected):
    p = plant.ScalarPlantParams(theta0=theta0, b=b, regressor="sincos")
    oracle = np.dot(theta0, [math.sin(x), math.cos(x)]) + b * u
    assert plant.scalar_dynamics(p, 0.0, x, u) == pytest.approx(expected, abs=1e-15)
    assert plant.scalar_dynamics(p, 0.0, x, u) == pytest.approx(oracle, abs=1e-15)


@pytest.mark.parametrize("bad", [dict(b=0.0), dict(theta0=[1.0]), dict(b=float("inf"))])
def test_scalar_params_validation(bad):
    kwargs = dict(theta0=[1.0, 2.0], b=1.0, regressor="sincos") | bad
    with pytest.raises(ConfigurationError):
        plant.ScalarPlantParams(**kwargs)


@pytest.mark.parametrize(
    "a, names, b, x, u, w, expected",
    [
        ([0.0], ["sin_y"], 1.0, [1.0, 3.0], 0.0, 0.0, [3.0, 0.0]),
        ([1.0], ["sin_y"], 1.0, [math.pi / 2, 0.0], 1.0, 0.0, [0.0, 0.0]),
        ([1.0], ["sin_y"], -2.0, [0.0, 1.0], 0.5, 0.3, [1.0, -0.7]),
    ],
)
def test_siso_dynamics(a, names, b, x, u, w, expected):
    p = plant.SisoPlantParams(n=2, a=a, b=b, nonlinearities=names, wbar=0.5)
    got = plant.siso_dynamics(p, 0.0, x, u, w)
    assert np.allclose(got, expected, rtol=0, atol=1e-15)


def test_siso_disturbance_bound_is_a_contract():
    p = plant.SisoPlantParams(n=2, a=[1.0], b=1.0, nonlinearities=["sin_y"], wbar=0.3)
    with pytest.raises(ContractViolation):
        plant.siso_dynamics(p, 0.0, [0.0, 0.0], 0.0, 0.31)


def test_siso_state_length_is_checked():
    p = plant.SisoPlantParams(n=2, a=[1.0], b=1.0, nonlinearities=["sin_y"])
    with pytest.raises(ContractViolation):
        plant.siso_dynamics(p, 0.0, [0.0, 0.0, 0.0], 0.0)


@pytest.mark.parametrize(
    "e, lam, expected",
    [
        ([4.2], 9.0, 4.2),
        ([1.0, 3.0], 2.0, 5.0),
        ([1.0, 2.0, 1.0], 1.0, 6.0),
    ],
)
def test_filtered_error(e, lam, expected):
    assert plant.filtered_error(e, lam) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "e, lam, ydn, expected",
    [
        ([0.0, 0.0], 1.7, 0.0, 0.0),
        ([5.0, 2.0], 3.0, 1.0, 5.0),
        ([1.0, 1.0, 1.0], 2.0, 0.0, 8.0),
    ],
)
def test_nu_term(e, lam, ydn, expected):
    assert plant.nu_term(e, lam, ydn) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.floats(0.1, 5.0), st.lists(st.floats(-10, 10), min_size=5, max_size=5))
def test_filtered_error_matches_polynomial_expansion(n, lam, coeffs):
    # (s + lam)^(n-1) expanded by repeated polynomial multiplication
    poly = np.array([1.0])
    for _ in range(n - 1):
        poly = np.convolve(poly, [1.0, lam])
    e = np.array(coeffs[:n])
    # poly is highest power first; e[k] is the k-th derivative of e1
    oracle = float(np.dot(poly[::-1], e))
    assert plant.filtered_error(e, lam) == pytest.approx(oracle, rel=1e-12, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.floats(0.1, 3.0))
def test_filtered_error_derivative_identity(n, lam):
    # d/dt e_f = e_n' + nu + yd^(n) for a smooth test signal e1(t) = sin(2t)
    t = 0.37
    e = np.array([2.0 ** k * math.sin(2 * t + k * math.pi / 2) for k in range(n + 1)])
    lhs = plant.filtered_error(e[1:], lam)  # e_f of the shifted derivatives
    rhs = e[n] + plant.nu_term(e[:n], lam, 0.0)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_disturbance_none_and_sinusoid():
    none = plant.DisturbanceSpec()
    sine = plant.DisturbanceSpec(kind="sinusoid", amplitude=0.5, frequency=3.0)
    assert plant.disturbance_sample(none, 12.3) == 0.0
    assert plant.disturbance_sample(sine, 0.0) == 0.0
    assert plant.disturbance_sample(sine, 0.5) == pytest.approx(0.5 * math.sin(1.5))


def test_seeded_noise_is_bounded_and_reproducible():
    d = plant.DisturbanceSpec(kind="seeded_bounded_noise", amplitude=0.25, seed=7, hold=1e-3)
    t = np.arange(1_000_000) * 1e-3
    w = plant.disturbance_samples(d, t)
    assert np.all(np.abs(w) <= 0.25)
    assert w.std() > 0.1  # not degenerate
    again = plant.disturbance_samples(
        plant.DisturbanceSpec(kind="seeded_bounded_noise", amplitude=0.25, seed=7, hold=1e-3), t)
    assert np.array_equal(w, again)
    for k in (0, 4095, 4096, 123_457):
        assert plant.disturbance_sample(d, t[k]) == w[k]


def test_reference_derivatives_cycle():
    ref = plant.ReferenceTrajectory("sinusoid", amplitude=2.0, frequency=3.0)
    t = 0.4
    got = ref.derivatives(t, 4)
    oracle = [2.0 * 3.0 ** k * math.sin(3.0 * t + k * math.pi / 2) for k in range(5)]
    assert np.allclose(got, oracle, rtol=1e-13, atol=1e-13)

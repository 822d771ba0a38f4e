import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from morawetz.geometry import Schwarzschild, sample_potentials, warped
from morawetz.multiplier import (
    CustomMultiplier,
    MultiplierG,
    check_g_conditions,
    eval_g,
    linear_multiplier,
    rho_of_x,
    x_of_rho,
)
from morawetz.report import UsageError

G = MultiplierG(0.1)
GRID = np.linspace(-1000, 1000, 20001)


def test_values_at_origin():
    s = eval_g(G, 0.0)
    assert (s.g, s.g1, s.g2) == (0.0, 1.0, 0.0)
    assert s.g3 == pytest.approx(-0.2, abs=1e-15)


def test_far_field_decay_rates():
    s = eval_g(G, 1000.0)
    assert eval_g(G, 1e15).g == pytest.approx(math.pi / (2 * math.sqrt(0.1)), rel=1e-13)
    far = eval_g(G, 1e300)
    assert abs(far.g) <= G.bound
    assert all(math.isfinite(v) for v in (far.g1, far.g2, far.g3))
    assert s.g1 == pytest.approx(1 / (0.1 * 1000.0**2), rel=1e-4)
    assert s.g3 == pytest.approx(6 / (0.1 * 1000.0**4), rel=0.01)


def test_g_matches_its_defining_integral():
    for rho in (-7.0, 0.5, 3.0, 40.0):
        val, _ = quad(lambda t: 1 / (1 + 0.1 * t * t), 0, rho, epsabs=1e-13, epsrel=1e-13)
        assert eval_g(G, rho).g == pytest.approx(val, rel=1e-12)


def test_b_must_be_positive():
    with pytest.raises(UsageError):
        MultiplierG(0.0)


def test_parity_on_symmetric_grid():
    rho = np.linspace(-50, 50, 1001)
    g, g1, g2, g3 = G.derivatives(rho)
    assert np.max(np.abs(g + g[::-1])) <= 1e-14
    assert np.max(np.abs(g1 - g1[::-1])) <= 1e-14
    assert np.max(np.abs(g2 + g2[::-1])) <= 1e-14
    assert np.max(np.abs(g3 - g3[::-1])) <= 1e-14


@pytest.mark.parametrize("k", [0, 1, 2])
def test_derivatives_against_finite_differences(k):
    rho = np.linspace(-30, 30, 121)
    exact = G.derivatives(rho)[k + 1]

    def fd(h):
        return (G.derivatives(rho + h)[k] - G.derivatives(rho - h)[k]) / (2 * h)

    e1, e2 = np.max(np.abs(fd(0.02) - exact)), np.max(np.abs(fd(0.01) - exact))
    assert 3.5 <= e1 / e2 <= 4.5


def test_x_of_rho_examples():
    assert x_of_rho(G, 0.0) == 0.0
    assert x_of_rho(G, -3.0) == pytest.approx(-3.9, abs=1e-14)
    val, _ = quad(lambda t: 1 + 0.1 * t * t, 0, 1000.0)
    assert x_of_rho(G, 1000.0) == pytest.approx(val, rel=1e-13)
    assert x_of_rho(G, 1000.0) == pytest.approx(1000 + 1e8 / 3, rel=1e-15)


def test_rho_of_x_examples():
    assert rho_of_x(G, 0.0) == 0.0
    assert abs(rho_of_x(G, 3.9) - 3.0) <= 1e-12
    assert rho_of_x(G, x_of_rho(G, 1000.0)) == pytest.approx(1000.0, rel=1e-14)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-1e9, max_value=1e9, allow_nan=False), st.floats(min_value=1e-6, max_value=10))
def test_inverse_round_trip(x, b):
    m = MultiplierG(b)
    assert abs(x_of_rho(m, rho_of_x(m, x)) - x) <= 1e-12 * (1 + abs(x))


def test_x_only_for_arctan_family():
    with pytest.raises(UsageError):
        x_of_rho(linear_multiplier(), 1.0)


def test_conditions_pass_for_default_weight():
    rep = check_g_conditions(G, GRID)
    assert rep.passed, rep.failures()
    env = rep["g_inverse_polynomial"].detail["envelope"]
    for side in ("left", "right"):
        assert env[side]["g1"]["ratio"] < 1.01
        assert env[side]["g1"]["fitted_exponent"] == pytest.approx(-2, abs=0.01)
        assert env[side]["g3"]["fitted_exponent"] == pytest.approx(-4, abs=0.01)


def test_unbounded_weight_fails_boundedness():
    rep = check_g_conditions(linear_multiplier(), GRID)
    assert not rep["g_bounded"].passed
    assert rep["g_increasing"].passed and rep["g_centered"].passed


def test_tiny_b_flags_asymptotic_region():
    rep = check_g_conditions(MultiplierG(1e-8), GRID)
    res = rep["g_inverse_polynomial"]
    assert not res.passed
    assert res.detail["rho_asym_too_small"]


def test_decreasing_weight_witnessed():
    m = CustomMultiplier(lambda r: (-r, -1 + 0 * r, 0 * r, 0 * r), name="decreasing")
    rep = check_g_conditions(m, np.linspace(-10, 10, 101))
    assert not rep["g_increasing"].passed
    assert len(rep["g_increasing"].detail["witness_rho"]) > 0


def test_empty_grid():
    with pytest.raises(UsageError):
        check_g_conditions(G, [])


@pytest.mark.parametrize("model", [Schwarzschild(1.0), warped("quadratic")])
def test_term_III_sign_structure(model):
    # g dV_L <= 0 pointwise: both change sign at rho = 0
    rho = np.linspace(-500, 500, 100_001)
    g = G.derivatives(rho)[0]
    assert np.all(g * sample_potentials(model, rho).dV_L <= 0)

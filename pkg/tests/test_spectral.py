import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from morawetz.geometry import Schwarzschild, WarpedProduct, constant_profile, sample_potentials, warped
from morawetz.multiplier import MultiplierG, eval_g, linear_multiplier, x_of_rho
from morawetz.spectral import (
    ConfigurationError,
    PositivityError,
    SpectralProblem,
    assemble_operator,
    asymptotic_exponents,
    bump,
    discretized_min_eigenvalue,
    gaussian_in_x,
    ground_state_identity_check,
    ground_state_sides,
    matching_threshold,
    ode_rhs,
    potential_W,
    quadratic_form_value,
    shoot,
    verify_condition11,
)
from morawetz import spectral, tridiag

ALPHA2 = 0.5 - 1 / (2 * math.sqrt(3))


def flat_problem(rho0=5.0, eps1=1e-3):
    return SpectralProblem(WarpedProduct(constant_profile(1.0), name="constant"), linear_multiplier(),
                           eps1=eps1, rho0=rho0)


def deep_well_problem():
    # eps1 * chi1 = 10 exp(-rho^2) digs a well the positive terms cannot compensate
    return SpectralProblem(Schwarzschild(1.0), MultiplierG(0.1), eps1=0.5,
                           chi1=lambda r: 20.0 * np.exp(-np.asarray(r) ** 2), rho0=1000.0)


# Problem set-up ---------------------------------------------------------------------

@pytest.mark.parametrize("eps1", [0.0, 2.0, -0.1, 2.5])
def test_eps1_range(eps1):
    with pytest.raises(ConfigurationError):
        SpectralProblem(eps1=eps1)


def test_asymptotic_regime_check(ref_prob):
    ref_prob.check_asymptotic_regime()
    assert ref_prob.asym_eps == pytest.approx(2 / (1 + 0.1 * 1e6))
    with pytest.raises(ConfigurationError):
        SpectralProblem(rho0=10.0).check_asymptotic_regime()


def test_negative_chi1_rejected():
    prob = SpectralProblem(chi1=lambda r: -np.ones_like(np.asarray(r, dtype=float)))
    with pytest.raises(ConfigurationError):
        prob.potential(np.array([0.0]))


# ODE right-hand side -----------------------------------------------------------------

def test_rhs_vanishes_for_flat_linear_problem():
    prob = flat_problem()
    assert ode_rhs(prob, 0.3, 1.7, -2.0) == 0.0


def test_rhs_at_rho0_matches_coefficients(ref_prob):
    s = eval_g(ref_prob.mult, 1000.0)
    dV = float(sample_potentials(Schwarzschild(1.0), 1000.0).dV)
    expected = -(s.g3 / 2 + s.g * dV) / ((2 - 1e-3) * s.g1)
    assert ode_rhs(ref_prob, 1000.0, 1.0, 0.0) == pytest.approx(expected, rel=1e-14)
    assert s.g3 == pytest.approx(6e-11, rel=0.01)
    assert s.g1 == pytest.approx(1e-5, rel=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(-900, 900), st.floats(-5, 5))
def test_rhs_with_zero_psi(rho, c):
    prob = SpectralProblem()
    s = eval_g(prob.mult, rho)
    assert ode_rhs(prob, rho, 0.0, c) == pytest.approx(-(s.g2 / s.g1) * c, rel=1e-12, abs=1e-300)


def test_rhs_rejects_nonincreasing_weight():
    prob = SpectralProblem(model=WarpedProduct(constant_profile(1.0)), mult=linear_multiplier(-1.0))
    with pytest.raises(PositivityError):
        ode_rhs(prob, 0.0, 1.0, 0.0)


# Exponents -------------------------------------------------------------------------

def test_exponents_at_zero():
    a1, a2 = asymptotic_exponents(0.0)
    assert abs(a1 - (0.5 + 1 / (2 * math.sqrt(3)))) <= 1e-12
    assert abs(a2 - ALPHA2) <= 1e-12


def test_exponents_double_root():
    assert asymptotic_exponents(0.5) == (0.5, 0.5)


def test_exponents_reject_complex_case():
    with pytest.raises(ConfigurationError):
        asymptotic_exponents(0.6)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.5))
def test_vieta(eps_prime):
    a1, a2 = asymptotic_exponents(eps_prime)
    assert a1 >= a2
    assert abs(a1 + a2 - 1) <= 1e-12
    assert abs(a1 * a2 - (1 + eps_prime) / 6) <= 1e-12
    # each root solves -2 a (a - 1) - (1 + eps')/3 = 0
    for a in (a1, a2):
        assert abs(-2 * a * (a - 1) - (1 + eps_prime) / 3) <= 1e-12


# Shooting ------------------------------------------------------------------------

def test_reference_run(ref_traj, ref_cert):
    psi, dpsi = ref_traj.true_values()
    assert np.all(psi > 0)
    assert 1.1e5 <= ref_cert.psi_left <= 1.9e5
    assert -480 <= ref_cert.dpsi_left <= -280
    assert ref_cert.verified
    assert ref_cert.dpsi_left <= ref_cert.threshold_left


def test_trajectory_samples_are_monotone(ref_traj):
    assert np.all(np.diff(ref_traj.rho) > 0)
    samples = ref_traj.samples
    assert len(samples) == ref_traj.rho.size
    assert samples[0][0] == -1000.0 and samples[-1][0] == 1000.0


def test_initial_condition_saturates_right_matching(ref_traj):
    psi, dpsi = ref_traj.evaluate(1000.0)
    assert psi[0] == pytest.approx(1.0)
    assert dpsi[0] == pytest.approx(matching_threshold("right", 1.0, 1000.0, 0.0, 2.0), rel=1e-12)


def test_tolerance_halving(ref_prob, ref_traj):
    base = ref_traj.true_values()[0][0]
    tight = shoot(ref_prob, rtol=0.5e-10, n_samples=101).true_values()[0][0]
    assert abs(tight - base) / abs(base) <= 10 * 1e-10


def test_constant_solution_for_flat_toy():
    prob = flat_problem()
    traj = shoot(prob, initial=(1.0, 0.0), n_samples=101)
    psi, dpsi = traj.true_values()
    np.testing.assert_allclose(psi, 1.0, atol=1e-13)
    cert = verify_condition11(prob, margin=0.0, trajectory=traj)
    assert cert.verified


def test_smaller_margin_still_positive(ref_prob, ref_traj):
    # the solution decreases with the initial slope: margin 1.2 lies above margin 2
    low = shoot(ref_prob, margin=1.2)
    rho = np.linspace(-1000, 999, 2000)
    p_low, p_hi = low.evaluate(rho)[0], ref_traj.evaluate(rho)[0]
    assert np.all(p_low > 0)
    assert np.all(p_low > p_hi)


def test_renormalization_preserves_values(monkeypatch):
    # the r = 1 + rho^2 problem grows to ~1e52; a low threshold forces several rescalings
    prob = SpectralProblem(model=warped("quadratic"), rho0=1000.0)
    plain = shoot(prob, n_samples=2001)
    monkeypatch.setattr(spectral, "RENORM_THRESHOLD", 1e10)
    renorm = shoot(prob, n_samples=2001)
    assert len(plain.segments) == 1 and len(renorm.segments) > 3
    assert np.all(np.sign(renorm.psi) == np.sign(renorm.true_values()[0]))
    rho = np.linspace(-1000, 1000, 501)
    np.testing.assert_allclose(renorm.evaluate(rho)[0], plain.evaluate(rho)[0], rtol=1e-7)
    assert renorm.scale_log[0] > math.log(1e10)


def test_deep_well_detected_by_both_routes():
    prob = deep_well_problem()
    cert = verify_condition11(prob, margin=2.0)
    assert not cert.positive_everywhere
    assert cert.first_sign_change is not None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam = discretized_min_eigenvalue(prob, n=50_000)
    assert lam < -1e-3


def test_kinetic_collapse_recorded():
    # eps1 -> 2 weakens the kinetic term; the outcome is recorded, not asserted
    prob = SpectralProblem(eps1=1.99)
    cert = verify_condition11(prob, margin=2.0, n_samples=1001)
    assert isinstance(cert.verified, bool)


def test_small_rho0_reports_thresholds_outside_asymptotic_regime():
    prob = SpectralProblem(rho0=10.0)
    cert = verify_condition11(prob, margin=2.0)
    assert math.isfinite(cert.threshold_left) and math.isfinite(cert.threshold_right)
    assert cert.eps == pytest.approx(2 / 11)
    with pytest.raises(ConfigurationError):
        prob.check_asymptotic_regime()


# Matching ----------------------------------------------------------------------------

def test_left_threshold_example():
    thr = matching_threshold("left", 1.5e5, 1000.0, 2 / (1 + 1e5), 2.0)
    assert thr == pytest.approx(-2 * ALPHA2 * 1.5e5 * 3 / 1000 / (1 - 2 / (1 + 1e5)), rel=1e-14)
    assert -200 < thr < -180


def test_right_threshold_example():
    assert matching_threshold("right", 1.0, 1000.0, 0.0, 2.0) == pytest.approx(1.268e-3, rel=1e-3)


def test_left_threshold_small_rho0():
    assert matching_threshold("left", 1.0, 10.0, 0.0, 1.0) == pytest.approx(-ALPHA2 * 0.3, rel=1e-14)
    assert matching_threshold("left", 1.0, 10.0, 0.0, 1.0) == pytest.approx(-0.0634, abs=1e-4)


@pytest.mark.parametrize("kw", [dict(psi_end=0.0), dict(psi_end=-1.0), dict(eps=1.0), dict(side="up")])
def test_threshold_errors(kw):
    args = dict(side="left", psi_end=1.0, rho0=10.0, eps=0.0, margin=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        matching_threshold(**args)


def test_certificate_records_both_left_thresholds(ref_cert):
    assert ref_cert.threshold_left == pytest.approx(2 * ref_cert.threshold_left_margin1, rel=1e-12)
    d = ref_cert.to_dict()
    assert d["verified"] is True
    assert set(d) >= {"positive_everywhere", "min_psi", "psi_left", "dpsi_left", "threshold_left",
                      "matching_left_ok", "matching_right_ok", "oracle_min_eigenvalue"}


# Schroedinger form ------------------------------------------------------------------

def test_W_at_origin(ref_prob):
    assert potential_W(ref_prob, 0.0) == pytest.approx(0.1, rel=1e-14)
    chi_prob = SpectralProblem(chi1=bump(-1, 1), eps1=1e-3)
    assert potential_W(chi_prob, 0.0) == pytest.approx(0.1 - 1e-3, rel=1e-14)


def test_W_far_field(ref_prob):
    x = x_of_rho(ref_prob.mult, 1000.0)
    assert abs(potential_W(ref_prob, x)) <= 1e-12
    assert abs(potential_W(ref_prob, -x)) <= 1e-12
    s = eval_g(ref_prob.mult, 1000.0)
    # the g''' part of W against its asymptotic form -1/(3 x^2)
    assert -s.g1 * s.g3 / 2 == pytest.approx(-1 / (3 * x * x), rel=0.05)


def test_minus_g_dV_positive_far_out(ref_prob):
    rho = np.concatenate([np.linspace(-1000, -100, 9001), np.linspace(100, 1000, 9001)])
    g = ref_prob.mult.derivatives(rho)[0]
    assert np.all(-g * sample_potentials(ref_prob.model, rho).dV >= 0)


def test_chi1_is_local():
    base = SpectralProblem()
    loc = SpectralProblem(chi1=bump(1.0, 2.0))
    x = x_of_rho(base.mult, np.array([-3.0, 0.5, 1.5, 2.5, 10.0]))
    diff = potential_W(loc, x) - potential_W(base, x)
    assert diff[2] < 0
    np.testing.assert_array_equal(diff[[0, 1, 3, 4]], 0.0)


# Quadratic form --------------------------------------------------------------------

def test_quadratic_form_zero(ref_prob):
    assert quadratic_form_value(ref_prob, lambda r: 0 * np.asarray(r), (-10, 10)) == 0.0


def test_quadratic_form_gaussian_nonnegative_and_homogeneous(ref_prob):
    u = lambda r: np.exp(-(np.asarray(r) - 5) ** 2)
    v = quadratic_form_value(ref_prob, u, (-5, 15))
    v2 = quadratic_form_value(ref_prob, lambda r: 2 * u(r), (-5, 15))
    assert v >= 0
    assert v2 == pytest.approx(4 * v, rel=1e-10)


def test_quadratic_form_against_direct_quadrature(ref_prob):
    u = lambda r: np.exp(-(np.asarray(r) - 5) ** 2)
    du = lambda r: -2 * (np.asarray(r) - 5) * u(r)

    def integrand(r):
        g, g1, g2, g3 = ref_prob.mult.derivatives(r)
        dV = sample_potentials(ref_prob.model, r).dV
        return (2 - 1e-3) * g1 * du(r) ** 2 + (-g3 / 2 - g * dV) * u(r) ** 2

    ref, _ = quad(integrand, -5, 15, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert quadratic_form_value(ref_prob, u, (-5, 15)) == pytest.approx(ref, rel=1e-8)


def test_quadratic_form_warns_outside_truncation(ref_prob):
    with pytest.warns(UserWarning):
        quadratic_form_value(ref_prob, lambda r: np.exp(-np.asarray(r) ** 2), (-1500, 10))


# Ground-state identity --------------------------------------------------------------

def test_ground_state_identity_residual(ref_prob, ref_traj):
    u, du, d2u = gaussian_in_x(0.0, 3.0)
    assert ground_state_identity_check(ref_prob, ref_traj, u, (-20, 20), du, d2u) <= 1e-6


def test_ground_state_identity_converges(ref_prob, ref_traj):
    u, du, d2u = gaussian_in_x(0.0, 3.0)
    coarse = ground_state_identity_check(ref_prob, ref_traj, u, (-20, 20), du, d2u, n=41)
    fine = ground_state_identity_check(ref_prob, ref_traj, u, (-20, 20), du, d2u, n=81)
    assert coarse / fine >= 4.0


def test_ground_state_identity_homogeneous(ref_prob, ref_traj):
    u, du, d2u = gaussian_in_x(1.0, 2.0)
    l1, r1 = ground_state_sides(ref_prob, ref_traj, u, (-15, 17), du, d2u)
    l2, r2 = ground_state_sides(ref_prob, ref_traj, lambda x: 3 * u(x), (-15, 17),
                                lambda x: 3 * du(x), lambda x: 3 * d2u(x))
    assert l2 == pytest.approx(9 * l1, rel=1e-12)
    assert r2 == pytest.approx(9 * r1, rel=1e-12)


def test_ground_state_constant_interior_has_no_kinetic_part(ref_prob, ref_traj):
    # u = 1 on [-2, 2]; evaluated only there the right side vanishes
    one = lambda x: np.ones_like(np.asarray(x, dtype=float))
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    lhs, rhs = ground_state_sides(ref_prob, ref_traj, one, (-2, 2), zero, zero)
    assert rhs == 0.0
    assert abs(lhs) <= 1e-8 * max(1.0, abs(lhs))  # phi0 solves A phi0 = 0


def test_ground_state_requires_positive_phi0():
    prob = deep_well_problem()
    traj = shoot(prob, margin=2.0)
    u, du, d2u = gaussian_in_x(0.0, 1.0)
    with pytest.raises(PositivityError):
        ground_state_identity_check(prob, traj, u, (-200, 200), du, d2u)


# Eigenvalue oracle -------------------------------------------------------------------

def test_dirichlet_laplacian_benchmark():
    prob = SpectralProblem(WarpedProduct(constant_profile(1.0)), linear_multiplier(), eps1=1.0, rho0=4.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam = discretized_min_eigenvalue(prob, n=10_000, domain=(0.0, math.pi))
    assert lam == pytest.approx(1.0, rel=1e-3)
    lam2 = discretized_min_eigenvalue(prob, n=10_000, domain=(0.0, 2.0))
    assert lam2 == pytest.approx(math.pi**2 / 4, rel=1e-3)


def test_oracle_uniform_shift():
    prob = SpectralProblem()
    d, e, _ = assemble_operator(prob, 20_000)
    a = tridiag.smallest_eigenvalue(d, e)
    b = tridiag.smallest_eigenvalue(d - 1.0, e)
    assert b == pytest.approx(a - 1.0, abs=1e-12)


def test_oracle_routes_agree(ref_prob):
    a = discretized_min_eigenvalue(ref_prob, n=20_000, method="lapack")
    b = discretized_min_eigenvalue(ref_prob, n=20_000, method="sturm")
    assert abs(a - b) <= 1e-12


def test_oracle_symmetric_matrix(ref_prob):
    d, e, nodes = assemble_operator(ref_prob, 1000)
    assert d.size == nodes.size == 999 and e.size == 998
    assert np.all(e < 0)


def test_oracle_arguments(ref_prob):
    with pytest.raises(ValueError):
        discretized_min_eigenvalue(ref_prob, n=50)
    with pytest.raises(ValueError):
        discretized_min_eigenvalue(ref_prob, n=1000, domain=(-2000, 0))
    with pytest.warns(UserWarning):
        discretized_min_eigenvalue(ref_prob, n=1000)

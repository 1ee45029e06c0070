import math

import numpy as np
import pytest

from bubblelab.core import NumericalError, ValidationError
from bubblelab.equilibrium import (aggregate_I, derived_constants, equilibrium_density,
                                   inverse_map, poly_coeffs, scaled_poly, solve_radius)
from _instances import generic_params


def residuals(eq):
    """Both equilibrium identities, evaluated from scratch."""
    p = eq.params
    mass = 4 * math.pi / 3 * eq.rho_star * eq.R_star ** 3
    Rbar = (eq.R_star ** 3 + 3 * eq.V / (4 * math.pi)) ** (1 / 3)
    lap = 2 / (p.R_spec * p.T_inf) * (p.sigma / eq.R_star + p.sigma_bar / Rbar)
    return abs(mass - eq.M) / eq.M, abs(lap - eq.rho_star) / eq.rho_star


def test_generic_instance_satisfies_both_identities(eq):
    r1, r2 = residuals(eq)
    assert r1 <= 1e-12 and r2 <= 1e-12
    assert eq.R_star == pytest.approx(0.388464800066, rel=1e-10)
    assert eq.bracket[0] < eq.R_star < eq.bracket[1]


def test_poly_coefficients_degenerate_case():
    # beta = V_bar = 0 gives x^3 (x^2 - I)^3
    c = poly_coeffs(1.0, 0.0, 0.0)
    expect = np.zeros(10)
    expect[[9, 7, 5, 3]] = [1, -3, 3, -1]
    assert np.array_equal(c, expect)


def test_poly_matches_factored_form():
    rng = np.random.default_rng(3)
    for _ in range(20):
        I, beta, Vb = rng.uniform(0.1, 3), rng.uniform(0, 3), rng.uniform(0, 5)
        R = rng.uniform(0.1, 2)
        P = np.polynomial.polynomial.polyval(R, poly_coeffs(I, beta, Vb))
        w = R / math.sqrt(I)
        assert P == pytest.approx(I ** 4.5 * scaled_poly(w, beta, Vb / I ** 1.5),
                                  rel=1e-9, abs=1e-12 * I ** 4.5)


def test_poly_has_single_positive_root():
    c = poly_coeffs(1.3, 0.7, 0.4)
    r = np.roots(c[::-1])
    pos = [z.real for z in r if abs(z.imag) < 1e-9 and z.real > 0]
    assert len(pos) == 1
    eq = solve_radius(*_mv_for(1.3, 0.7, 0.4))
    assert eq.R_star == pytest.approx(pos[0], rel=1e-9)


def _mv_for(I, beta, Vb):
    p = generic_params(sigma_bar=beta)
    M = I * 8 * math.pi * p.sigma / (3 * p.KT)
    return M, 4 * math.pi * Vb / 3, p


def test_beta_zero_closed_form():
    p = generic_params(sigma_bar=0.0)
    eq = solve_radius(2.0, 1.0, p)
    assert eq.R_star == pytest.approx(math.sqrt(3 * p.KT * 2.0 / (8 * math.pi * p.sigma)),
                                      rel=1e-14)


def test_large_volume_limit():
    p = generic_params()
    I = aggregate_I(1.0, p)
    # near w = 1 the polynomial gives 1 - w ~ beta / (2 v^(1/3))
    for v in (1e6, 1e9, 1e12):
        eq = solve_radius(1.0, 4 * math.pi / 3 * v * I ** 1.5, p)
        dev = 1 - eq.R_star / math.sqrt(I)
        assert dev == pytest.approx(p.beta / (2 * v ** (1 / 3)), rel=0.02)
    assert dev < 1e-3
    inf = solve_radius(1.0, math.inf, p)
    assert inf.R_star == pytest.approx(math.sqrt(I), rel=1e-15)
    assert inf.R_tilde == inf.R_star


def test_round_trip(eq):
    mv = inverse_map(eq.rho_star, eq.R_star, eq.params)
    assert mv.M == pytest.approx(eq.M, rel=1e-12)
    assert mv.V == pytest.approx(eq.V, rel=1e-10)


def test_inverse_map_rejects_off_manifold_states():
    p0 = generic_params(sigma_bar=0.0)
    eq = solve_radius(1.0, 1.0, p0)
    with pytest.raises(ValidationError, match="not on equilibrium manifold"):
        inverse_map(eq.rho_star, eq.R_star, p0)
    p = generic_params()
    with pytest.raises(ValidationError, match="not on equilibrium manifold"):
        inverse_map(0.1, 0.1, p)


def test_density_mismatch_detected(eq):
    with pytest.raises(NumericalError):
        equilibrium_density(eq.R_star * 1.01, eq.params, eq.M, eq.V)
    assert equilibrium_density(eq.R_star, eq.params, eq.M, eq.V) == \
        pytest.approx(eq.rho_star, rel=1e-13)


def test_derived_constants_bounds(eq):
    c = derived_constants(eq)
    p = eq.params
    for v in (c.A, c.B, c.C, c.K, c.kappa_bar, c.R_tilde):
        assert v > 0
    s = p.KT * eq.rho_star / eq.R_star
    assert 2 * s < c.K * c.C + c.A < 3 * s
    assert c.kappa_bar == pytest.approx(
        p.kappa / (eq.R_star ** 2 * eq.rho_star * p.gamma * p.c_g), rel=1e-15)


def test_gap_R_has_full_accuracy():
    eq = solve_radius(1.0, 1e-12, generic_params())
    direct = (eq.R_star ** 3 + eq.V_bar) ** (1 / 3) - eq.R_star
    assert eq.gap_R == pytest.approx(eq.V_bar / (3 * eq.R_star ** 2), rel=1e-6)
    assert abs(direct - eq.gap_R) < 1e-15

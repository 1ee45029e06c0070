import math

import numpy as np
import pytest

from bubblelab.core import (MassVolumePair, PhysicalParams, ValidationError,
                            gauss_quadrature, params_from_dict)
from _instances import UNIT, generic_params


def test_gamma_is_derived_from_gas_constants():
    assert generic_params().gamma == pytest.approx(1 + 2 / 3, rel=1e-15)


@pytest.mark.parametrize("name", ["sigma", "mu_l", "rho_l", "kappa", "c_g", "R_spec", "T_inf"])
def test_nonpositive_parameter_names_field(name):
    with pytest.raises(ValidationError) as exc:
        generic_params(**{name: 0.0})
    assert exc.value.field == name


def test_sigma_bar_may_vanish_but_not_be_negative():
    assert generic_params(sigma_bar=0.0).beta == 0.0
    with pytest.raises(ValidationError) as exc:
        generic_params(sigma_bar=-1e-3)
    assert exc.value.field == "sigma_bar"


def test_inconsistent_gamma_rejected():
    with pytest.raises(ValidationError) as exc:
        PhysicalParams(**UNIT, gamma=1.4)
    assert exc.value.field == "gamma"
    PhysicalParams(**UNIT, gamma=5 / 3)


def test_non_numeric_parameter():
    with pytest.raises(ValidationError) as exc:
        generic_params(kappa="abc")
    assert exc.value.field == "kappa"


def test_mass_volume_pair():
    assert MassVolumePair(1, math.inf).infinite
    assert MassVolumePair(1, 4 * math.pi / 3).V_bar == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        MassVolumePair(-1, 1)
    with pytest.raises(ValidationError):
        MassVolumePair(1, 0)


def test_params_from_dict_keys():
    d = dict(UNIT, M=1, V="inf")
    p, mv = params_from_dict(d)
    assert mv.infinite and p.gamma == pytest.approx(5 / 3)
    with pytest.raises(ValidationError) as exc:
        params_from_dict(dict(d, foo=1))
    assert exc.value.field == "foo"
    bad = dict(d)
    del bad["T_inf"]
    with pytest.raises(ValidationError) as exc:
        params_from_dict(bad)
    assert exc.value.field == "T_inf"


def test_gauss_rule_exact_for_polynomials():
    q = gauss_quadrature(8)
    for k in range(16):
        assert q.integrate(q.nodes ** k) == pytest.approx(1 / (k + 1), rel=1e-14)
    # ball volume and the second moment over the ball
    assert q.ball(np.ones(8)) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert q.ball(q.nodes ** 2) == pytest.approx(4 * math.pi / 5, rel=1e-14)


def test_quadrature_order_validated():
    with pytest.raises(ValidationError):
        gauss_quadrature(1)

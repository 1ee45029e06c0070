"""Shared problem instances for the test suite."""

import math

from bubblelab.core import PhysicalParams
from bubblelab.equilibrium import small_volume_equilibrium, solve_radius

UNIT = dict(sigma=1.0, sigma_bar=1.0, mu_l=1.0, rho_l=1.0, kappa=1.0, c_g=3.0,
            R_spec=2.0, T_inf=1.0)


def generic_params(**kw):
    d = dict(UNIT)
    d.update(kw)
    return PhysicalParams(**d)


def generic_eq(M=1.0, V=1.0, **kw):
    return solve_radius(M, V, generic_params(**kw))


def small_v_eq(M=1.0, ratio=1e-3, **kw):
    return small_volume_equilibrium(M, generic_params(**kw), ratio)


def unit(eq):
    return math.pi ** 2 * eq.kappa_bar

"""Energy functional, dissipation rate and the local-minimizer quadratic bound.

States are modal vectors z = (rho2, delta_R, dR, theta_1..theta_N) or any
object exposing ``vector``. Differences from the equilibrium value are
assembled term by term so that the gap E - E* keeps full relative accuracy
for small perturbations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError, ValidityError

DELTA0 = 0.05


@dataclass(frozen=True)
class EnergyReport:
    E: float
    E1: float
    E2: float
    D: float
    D_gas: float
    D_visc: float
    gap: float
    quad_form: float | None = None


def as_vector(state):
    return np.asarray(getattr(state, "vector", state), dtype=float)


@dataclass(frozen=True)
class Fields:
    rho: np.ndarray      # density at the quadrature nodes
    drho: np.ndarray     # d rho / dy at the nodes
    rho_b: float         # interface density
    R: float
    dR: float
    mass: float


def fields(z, eq, basis):
    z = as_vector(z)
    theta = z[3:]
    rho_b = eq.rho_star + z[0]
    rho = rho_b + theta @ basis.Xi
    drho = theta @ basis.dXi
    R = eq.R_star + z[1]
    if R <= 0 or rho_b <= 0 or np.any(rho <= 0):
        raise ValidityError("nonpositive density or radius")
    mass = R ** 3 * float(basis.W @ rho)
    return Fields(rho, drho, rho_b, R, z[2], mass)


def _rbar(R, V_bar):
    return (R ** 3 + V_bar) ** (1.0 / 3.0)


def equilibrium_energy(eq):
    """E at the equilibrium (finite liquid volume only)."""
    p = eq.params
    cT = p.c_g * p.T_inf
    R, rho, M = eq.R_star, eq.rho_star, eq.M
    E1 = (4 * math.pi * cT / 3) * rho * R ** 3 - cT * M * math.log(p.KT * rho) \
        + p.gamma * cT * M * math.log(rho)
    E2 = 4 * math.pi * (p.sigma * R ** 2 + p.sigma_bar * eq.Rbar_star ** 2)
    return E1, E2


def _gaps(f: Fields, eq, basis):
    """(gas part, kinetic+surface part) of E - E*."""
    p = eq.params
    if eq.infinite:
        raise ValidationError("energy is defined for finite liquid volume only", "V")
    cT = p.c_g * p.T_inf
    Rs, rs, M = eq.R_star, eq.rho_star, eq.M
    Vb = eq.V_bar
    dR = f.R - Rs
    dR3 = dR * (f.R ** 2 + f.R * Rs + Rs ** 2)
    rho2 = f.rho_b - rs
    dM = f.mass - M
    u = f.rho / rs - 1.0
    g_lin = (4 * math.pi * cT / 3) * (rho2 * f.R ** 3 + rs * dR3)
    g_log = cT * dM * (p.gamma * math.log(rs) - math.log(p.KT * rs)) \
        - cT * f.mass * math.log1p(rho2 / rs) \
        + p.gamma * cT * f.R ** 3 * float(basis.W @ (f.rho * np.log1p(u)))
    Rb = _rbar(f.R, Vb)
    Rbs = eq.Rbar_star
    dRb = dR3 / (Rb * Rb + Rb * Rbs + Rbs * Rbs)
    g_surf = 4 * math.pi * (p.sigma * dR * (f.R + Rs) + p.sigma_bar * dRb * (Rb + Rbs))
    one_minus = (Vb / (Rb * Rb + Rb * f.R + f.R * f.R)) / Rb
    g_kin = 2 * math.pi * p.rho_l * f.R ** 3 * f.dR ** 2 * one_minus
    return g_lin + g_log, g_kin + g_surf


def total_energy(state, eq, basis) -> EnergyReport:
    f = fields(state, eq, basis)
    g1, g2 = _gaps(f, eq, basis)
    E1s, E2s = equilibrium_energy(eq)
    Dg, Dv = _dissipation(f, eq, basis)
    return EnergyReport(E1s + E2s + g1 + g2, E1s + g1, E2s + g2, Dg + Dv, Dg, Dv, g1 + g2)


def energy_gap(state, eq, basis):
    g1, g2 = _gaps(fields(state, eq, basis), eq, basis)
    return g1 + g2


def _dissipation(f: Fields, eq, basis):
    p = eq.params
    y = basis.quadrature.nodes
    w = basis.quadrature.weights
    Dg = p.kappa * p.T_inf * 4 * math.pi * f.R * float(w @ ((f.drho / f.rho) ** 2 * y * y))
    Vb = eq.V_bar
    Dv = 16 * math.pi * p.mu_l * Vb * f.R * f.dR ** 2 / (f.R ** 3 + Vb)
    return Dg, Dv


def dissipation_rate(state, eq, basis):
    """Returns (D, D_gas, D_visc)."""
    Dg, Dv = _dissipation(fields(state, eq, basis), eq, basis)
    return Dg + Dv, Dg, Dv


def certification_measure(state, eq, basis):
    """||(rho - rho*)/rho*||_inf (1 + |log rho*|) over nodes and interface."""
    f = fields(state, eq, basis)
    dev = max(float(np.max(np.abs(f.rho / eq.rho_star - 1.0))),
              abs(f.rho_b / eq.rho_star - 1.0))
    return dev * (1.0 + abs(math.log(eq.rho_star)))


def quadratic_form(state, eq, basis, rho_dot_integral=0.0):
    """One quarter of the quadratic lower bound for E - E*."""
    p = eq.params
    f = fields(state, eq, basis)
    Rs, rs, M = eq.R_star, eq.rho_star, eq.M
    Rbs = eq.Rbar_star
    d = f.rho - rs
    int_d = float(basis.W @ d)
    int_d2 = float(basis.W @ (d * d))
    t1 = M * p.c_g * p.T_inf * ((f.rho_b - rs) / rs - 3.0 / (4 * math.pi * rs) * int_d) ** 2
    t2 = p.rho_l * Rs ** 5 / (4 * math.pi * rs ** 2) * (eq.gap_R / Rbs) * rho_dot_integral ** 2
    t3 = p.KT * Rs ** 3 / (3 * rs) * int_d2
    t4 = Rs ** 3 / (math.pi * rs ** 2) * (
        p.sigma / (2 * Rs) + p.sigma_bar / Rbs * (1 - Rs ** 3 / (2 * Rbs ** 3))) * int_d ** 2
    return 0.25 * (t1 + t2 + t3 + t4)


def minimizer_gap(state, eq, basis, rho_dot_integral=0.0, delta0=DELTA0, check=True):
    """Return (E - E*, quarter quadratic form); refuses outside the certified radius."""
    m = certification_measure(state, eq, basis)
    if m > delta0:
        raise ValidationError(
            f"outside certified region: condition value {m:.4g} > {delta0}")
    lhs = energy_gap(state, eq, basis)
    rhs = quadratic_form(state, eq, basis, rho_dot_integral)
    if check and lhs < rhs:
        raise AssertionError(f"minimizer inequality violated: {lhs!r} < {rhs!r}")
    return lhs, rhs


def random_static_perturbation(rng, eq, basis, radius=DELTA0, nmodes=8):
    """Random mass-projected static state with certification measure <= radius."""
    N = basis.N
    k = min(nmodes, N)
    th = np.zeros(N)
    th[:k] = rng.normal(size=k) / np.arange(1, k + 1) ** 2
    rho2 = rng.normal()
    prof = rho2 + th @ basis.Xi
    amp = np.max(np.abs(prof)) + abs(rho2)
    target = radius * rng.uniform(0.05, 0.95) / (1 + abs(math.log(eq.rho_star)))
    scale = target * eq.rho_star / amp
    th, rho2 = th * scale, rho2 * scale
    m = (4 * math.pi / 3) * (eq.rho_star + rho2) + basis.b @ th
    R = (eq.M / m) ** (1.0 / 3.0)
    return np.concatenate([[rho2, R - eq.R_star, 0.0], th])


def fd_derivative(t, E):
    """dE/dt with 4th-order differences (one-sided 4th order at the ends)."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    n = len(t)
    if n < 5:
        return np.gradient(E, t)
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        return np.gradient(E, t, edge_order=2)
    h = h[0]
    d = np.empty(n)
    d[2:-2] = (E[:-4] - 8 * E[1:-3] + 8 * E[3:-1] - E[4:]) / (12 * h)
    a = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    b = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    d[0] = a @ E[:5]
    d[1] = b @ E[:5]
    d[-1] = -a @ E[-1:-6:-1]
    d[-2] = -b @ E[-1:-6:-1]
    return d

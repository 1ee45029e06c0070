"""Spherically symmetric equilibria (rho*, R*) for a given mass and liquid volume.

Radius root finding works in the scaled variable w = R/sqrt(I), where the
ninth-degree polynomial becomes

    q(w) = beta^3 w^9 - (1 - w^2)^3 (w^3 + v),     v = V_bar / I^(3/2),

i.e. P(w sqrt(I)) = I^(9/2) q(w). The factored form is used for evaluation
since it has no cancellation near w = 1 (large liquid volume).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (MassVolumePair, NumericalError, PhysicalParams,
                   ValidationError)

RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class EquilibriumState:
    params: PhysicalParams
    M: float
    V: float
    R_star: float
    rho_star: float
    Rbar_star: float
    I: float
    beta: float
    kappa_bar: float
    R_tilde: float
    residual: float
    bracket: tuple

    @property
    def V_bar(self):
        return 3.0 * self.V / (4.0 * math.pi)

    @property
    def infinite(self):
        return math.isinf(self.V)

    @property
    def gap_R(self):
        """Rbar* - R*, evaluated without cancellation."""
        return _rbar_minus_r(self.R_star, self.V_bar)


@dataclass(frozen=True)
class DerivedConstants:
    kappa_bar: float
    R_tilde: float
    A: float
    B: float
    C: float
    K: float


def aggregate_I(M, p: PhysicalParams):
    return 3.0 * p.KT * M / (8.0 * math.pi * p.sigma)


def poly_coeffs(I, beta, V_bar):
    """Coefficients of P(x), ascending by degree (length 10)."""
    if not (I > 0):
        raise ValidationError("I must be positive", "I")
    if not (beta >= 0):
        raise ValidationError("beta must be nonnegative", "beta")
    if not (V_bar >= 0) or math.isinf(V_bar):
        raise ValidationError("V_bar must be finite and nonnegative", "V_bar")
    c = np.zeros(10)
    c[9] = beta ** 3 + 1.0
    c[7] = -3.0 * I
    c[6] = V_bar
    c[5] = 3.0 * I ** 2
    c[4] = -3.0 * I * V_bar
    c[3] = -I ** 3
    c[2] = 3.0 * I ** 2 * V_bar
    c[0] = -I ** 3 * V_bar
    return c


def scaled_poly(w, beta, v):
    """q(w) = P(w sqrt(I)) / I^(9/2) in factored form."""
    w = np.asarray(w, dtype=float)
    return beta ** 3 * w ** 9 - (1.0 - w * w) ** 3 * (w ** 3 + v)


def _scaled_poly_dw(w, beta, v):
    s = 1.0 - w * w
    return 9.0 * beta ** 3 * w ** 8 + 6.0 * w * s * s * (w ** 3 + v) - 3.0 * w * w * s ** 3


def _rbar_minus_r(R, V_bar):
    if math.isinf(V_bar):
        return math.inf
    Rbar = (R ** 3 + V_bar) ** (1.0 / 3.0)
    return V_bar / (Rbar * Rbar + Rbar * R + R * R)


def _solve_w(beta, v, bisect_width=1e-6, maxit=100):
    """Root of q on (1/sqrt(1+beta), 1). Bisection, then safeguarded Newton."""
    lo, hi = 1.0 / math.sqrt(1.0 + beta), 1.0
    qlo, qhi = scaled_poly(lo, beta, v), scaled_poly(hi, beta, v)
    if not (qlo < 0 < qhi):
        raise NumericalError(
            "internal inconsistency: no sign change of the equilibrium polynomial "
            f"in its bracket (q(lo)={qlo:.3e}, q(hi)={qhi:.3e})")
    while hi - lo > bisect_width:
        mid = 0.5 * (lo + hi)
        if scaled_poly(mid, beta, v) < 0:
            lo = mid
        else:
            hi = mid
    scale = beta ** 3 + 1.0 + v
    w = 0.5 * (lo + hi)
    for _ in range(maxit):
        q = float(scaled_poly(w, beta, v))
        if q == 0.0:
            break
        if q < 0:
            lo = w
        else:
            hi = w
        dq = _scaled_poly_dw(w, beta, v)
        wn = w - q / dq if dq != 0 else 0.5 * (lo + hi)
        if not (lo < wn < hi):
            wn = 0.5 * (lo + hi)
        step = abs(wn - w)
        w = wn
        if abs(q) / scale <= 1e-14 and step <= 4 * np.finfo(float).eps * w:
            break
        if hi - lo <= 2 * np.finfo(float).eps * hi:
            break
    return w


def _laplace_density(R, p, V_bar):
    t = p.sigma / R
    if not math.isinf(V_bar):
        t += p.sigma_bar / (R ** 3 + V_bar) ** (1.0 / 3.0)
    return 2.0 * t / p.KT


def _density_pair(R, p, M, V_bar):
    return 3.0 * M / (4.0 * math.pi * R ** 3), _laplace_density(R, p, V_bar)


def equilibrium_density(R_star, p: PhysicalParams, M, V, tol=1e-10):
    """Mean of the mass-based and Laplace-based equilibrium densities."""
    V_bar = 3.0 * V / (4.0 * math.pi)
    a, b = _density_pair(R_star, p, M, V_bar)
    rho = 0.5 * (a + b)
    if abs(a - b) > tol * rho:
        raise NumericalError(
            f"equilibrium density mismatch {abs(a - b) / rho:.3e} (bad root)")
    return rho


def solve_radius(M, V, p: PhysicalParams) -> EquilibriumState:
    mv = MassVolumePair(M, V)
    I = aggregate_I(mv.M, p)
    beta = p.beta
    V_bar = mv.V_bar
    sI = math.sqrt(I)
    bracket = (sI / math.sqrt(1.0 + beta), sI)
    if beta == 0.0 or mv.infinite:
        R = sI
    else:
        R = sI * _solve_w(beta, V_bar / I ** 1.5)
    a, b = _density_pair(R, p, mv.M, V_bar)
    rho = 0.5 * (a + b)
    residual = max(abs(a - rho), abs(b - rho)) / rho
    if residual > RESIDUAL_TOL:
        raise NumericalError(f"equilibrium residual {residual:.3e} exceeds tolerance")
    Rbar = math.inf if mv.infinite else (R ** 3 + V_bar) ** (1.0 / 3.0)
    R_tilde = R if mv.infinite else R * _rbar_minus_r(R, V_bar) / Rbar
    kappa_bar = p.kappa / (R * R * rho * p.gamma * p.c_g)
    return EquilibriumState(p, mv.M, mv.V, R, rho, Rbar, I, beta, kappa_bar,
                            R_tilde, residual, bracket)


def inverse_map(rho_star, R_star, p: PhysicalParams) -> MassVolumePair:
    """(rho*, R*) -> (M, V) on the equilibrium manifold."""
    M = 4.0 * math.pi * rho_star * R_star ** 3 / 3.0
    d = p.KT * rho_star * R_star - 2.0 * p.sigma
    if p.sigma_bar == 0.0 or d <= 1e-12 * 2.0 * p.sigma:
        raise ValidationError("state not on equilibrium manifold "
                              f"(R_spec*T_inf*rho*R - 2 sigma = {d:.3e})")
    ratio = 2.0 * p.sigma_bar / d
    if ratio <= 1.0:
        raise ValidationError("state not on equilibrium manifold "
                              "(implied liquid volume is not positive)")
    V = 4.0 * math.pi * R_star ** 3 / 3.0 * (ratio ** 3 - 1.0)
    return MassVolumePair(M, V)


def derived_constants(eq: EquilibriumState) -> DerivedConstants:
    p = eq.params
    R, rho = eq.R_star, eq.rho_star
    if eq.infinite:
        A = 2.0 * p.sigma / R ** 2
        B = 4.0 * p.mu_l / R
        K = 2.0 * p.KT * rho / (p.rho_l * R ** 2)
    else:
        Rb, Vb = eq.Rbar_star, eq.V_bar
        A = 2.0 * p.sigma / R ** 2 + 2.0 * p.sigma_bar * R ** 2 / Rb ** 4
        B = 4.0 * p.mu_l * Vb / (R * (R ** 3 + Vb))
        with np.errstate(over="ignore", divide="ignore"):
            K = 2.0 * p.KT * rho * Rb / (p.rho_l * R ** 2 * eq.gap_R)
    C = p.rho_l * eq.R_tilde
    return DerivedConstants(eq.kappa_bar, eq.R_tilde, A, B, C, float(K))


def small_volume_equilibrium(M, p: PhysicalParams, ratio=1e-3, iters=60):
    """Equilibrium whose modified liquid volume is ratio * R*^3 (fixed point)."""
    R = math.sqrt(aggregate_I(M, p))
    for _ in range(iters):
        V = 4.0 * math.pi / 3.0 * ratio * R ** 3
        eq = solve_radius(M, V, p)
        if abs(eq.R_star - R) <= 1e-15 * R:
            break
        R = eq.R_star
    return eq

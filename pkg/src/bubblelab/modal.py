"""Radial Dirichlet eigenfunctions of the unit ball and the modal coefficients.

Xi_j(y) = sin(j pi y) / (sqrt(2 pi) y), normalized in L2 of the unit ball,
with -Laplace Xi_j = (j pi)^2 Xi_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from .core import QuadratureRule, ValidationError, gauss_quadrature

SQ2PI = math.sqrt(2.0 * math.pi)
SQPI2 = math.sqrt(0.5 * math.pi)
SERIES_CUT = 0.1  # |x| below which (x cos x - sin x)/x^3 uses its Taylor series


def eigenfunction(j, y):
    """Xi_j(y); the removable singularity at y=0 is handled through sinc."""
    y = np.asarray(y, dtype=float)
    return j * math.pi * np.sinc(j * y) / SQ2PI


def _g(x):
    # (x cos x - sin x) / x^3
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < SERIES_CUT
    xs = x[small] ** 2
    acc = np.zeros_like(xs)
    for n in range(6, 0, -1):
        acc = acc * xs + (-1) ** n * 2 * n / math.factorial(2 * n + 1)
    out[small] = acc
    xl = x[~small]
    out[~small] = (xl * np.cos(xl) - np.sin(xl)) / xl ** 3
    return out


def eigenfunction_dy(j, y):
    """d Xi_j / dy."""
    y = np.asarray(y, dtype=float)
    a = j * math.pi
    return a ** 3 * y * _g(a * y) / SQ2PI


def ball_integral_coeffs(N):
    """b_k = integral of Xi_k over the unit ball, k=1..N."""
    k = np.arange(1, N + 1)
    return 2.0 ** 1.5 * (-1.0) ** (k - 1) / (math.sqrt(math.pi) * k)


def tail_inverse_squares(N):
    """sum_{k>N} k^-2 via the Hurwitz zeta function."""
    return float(scipy.special.zeta(2.0, N + 1.0))


def ball_integral_tail(N):
    """sum_{k>N} b_k^2 = (8/pi) sum_{k>N} k^-2."""
    return 8.0 / math.pi * tail_inverse_squares(N)


@dataclass(frozen=True)
class ModalBasis:
    N: int
    lam: np.ndarray       # (j pi)^2
    c: np.ndarray         # c_k
    omega: np.ndarray     # omega_j
    b: np.ndarray         # integral of Xi_k over the ball
    quadrature: QuadratureRule
    Xi: np.ndarray        # (N, Q) values at the nodes
    dXi: np.ndarray       # (N, Q) radial derivatives at the nodes
    gamma: float

    @classmethod
    def build(cls, N, eq, Q=None):
        N = int(N)
        if N < 1:
            raise ValidationError("N must be >= 1", "N")
        Q = 4 * N if Q is None else int(Q)
        if Q < 2 * N:
            raise ValidationError(
                f"quadrature order {Q} < 2N = {2 * N} would alias", "Q")
        quad = gauss_quadrature(Q)
        j = np.arange(1, N + 1)
        gam = eq.params.gamma
        b = ball_integral_coeffs(N)
        c = (gam - 1.0) / gam * b
        omega = -(eq.R_star * eq.kappa_bar / eq.rho_star) * SQPI2 * (-1.0) ** j * j
        y = quad.nodes
        Xi = np.array([eigenfunction(k, y) for k in j])
        dXi = np.array([eigenfunction_dy(k, y) for k in j])
        for a in (j, b, c, omega, Xi, dXi):
            a.setflags(write=False)
        lam = (j * math.pi) ** 2.0
        lam.setflags(write=False)
        return cls(N, lam, c, omega, b, quad, Xi, dXi, gam)

    @property
    def W(self):
        """Ball quadrature weights 4 pi w_q y_q^2."""
        return self.quadrature.ball_weights

    @property
    def flux_weights(self):
        """d Xi_j/dy at y=1."""
        j = np.arange(1, self.N + 1)
        return SQPI2 * (-1.0) ** j * j

    def project(self, f):
        """theta_j = integral over the ball of f Xi_j. f is callable or node samples."""
        y = self.quadrature.nodes
        vals = f(y) if callable(f) else np.asarray(f, dtype=float)
        return self.Xi @ (self.W * vals)

    def reconstruct(self, theta, y=None):
        theta = np.asarray(theta, dtype=float)
        if y is None:
            return theta @ self.Xi
        j = np.arange(1, self.N + 1)
        return sum(t * eigenfunction(k, y) for k, t in zip(j, theta))

    def boundary_flux(self, theta, damping=False):
        return boundary_flux(theta, damping)

    def gram(self):
        return (self.Xi * self.W) @ self.Xi.T


def boundary_flux(theta, damping=False):
    """d/dy of sum theta_j Xi_j at y=1. damping=True applies Cesaro weights."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    j = np.arange(1, n + 1)
    w = SQPI2 * (-1.0) ** j * j
    if damping:
        w = w * (1.0 - j / (n + 1.0))
    return theta @ w


def c_squared_sum_limit(gamma):
    return 4.0 * (gamma - 1.0) ** 2 * math.pi / (3.0 * gamma ** 2)


def c_squared_tail(gamma, N):
    return 8.0 * (gamma - 1.0) ** 2 / (math.pi * gamma ** 2) * tail_inverse_squares(N)

"""Galerkin dynamics z' = L z + N1(z) z' + N0(z), a finite-difference oracle,
and initial-condition builders.

State layout: z = (rho2, delta_R, dR, theta_1..theta_N) where rho2 is the
interface density perturbation, delta_R = R - R*, dR = R' and theta are the
coefficients of the interior density rho~1 = rho - rho(1) in the Dirichlet
basis.

Two closures of the first row (the interface density equation) are offered:

* ``"none"``: the truncated matrix and nonlinear terms as written, with the
  kinematic boundary relation for rho2'.
* ``"mass"`` (default): rho2' is fixed by exact conservation of the
  discrete gas mass. Its linearization equals the printed matrix with
  3 gamma rho*/R* replaced by (3 gamma rho*/R*) / (1 + 3 (gamma-1) T_N / (4 pi)),
  T_N = sum_{k>N} b_k^2, which is the quasi-static correction for the
  omitted modes. As N grows the two closures coincide.

The interior equation carries the moving-frame term (R'/R) y d rho/dy that
follows from rho(y, t) = rho_phys(R(t) y, t).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import energy as _energy
from .core import NumericalError, ValidationError, ValidityError, solve_dense
from .equilibrium import EquilibriumState, derived_constants, solve_radius
from .modal import ModalBasis, ball_integral_tail

log = logging.getLogger(__name__)

VALID_RHO = 0.1
VALID_R = 0.1


@dataclass(frozen=True)
class ModalState:
    rho2: float
    delta_R: float
    dR: float
    theta: np.ndarray

    @property
    def vector(self):
        return np.concatenate([[self.rho2, self.delta_R, self.dR], self.theta])

    @classmethod
    def from_vector(cls, z):
        z = np.asarray(z, dtype=float)
        return cls(float(z[0]), float(z[1]), float(z[2]), z[3:].copy())

    @property
    def N(self):
        return len(self.theta)


@dataclass
class Trajectory:
    times: np.ndarray
    Z: np.ndarray                 # (n_samples, N+3)
    mass: np.ndarray
    mass_drift: np.ndarray        # relative to the target mass
    energy: np.ndarray
    gap: np.ndarray               # E - E*
    dissipation: np.ndarray
    znorm: np.ndarray
    dznorm: np.ndarray
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def states(self):
        return [ModalState.from_vector(z) for z in self.Z]

    @property
    def rho_b(self):
        return self.Z[:, 0]


@dataclass
class SimOptions:
    rtol: float = 1e-9
    atol: float = 1e-13          # scaled by the natural size of each component
    output_dt: float | None = None
    method: str = "Radau"
    closure: str = "mass"
    jac: str = "linear"           # "linear" uses the constant L_N, "fd" lets the solver estimate
    max_step: float = math.inf
    energies: bool = True


def _rbar_minus_r(R, Vb):
    Rb = (R ** 3 + Vb) ** (1.0 / 3.0)
    return Rb, Vb / (Rb * Rb + Rb * R + R * R)


class GalerkinSystem:
    """Truncated modal system for one equilibrium and basis."""

    def __init__(self, eq: EquilibriumState, basis: ModalBasis, closure="mass"):
        if eq.infinite:
            raise ValidationError("dynamics requires a finite liquid volume", "V")
        if closure not in ("mass", "none"):
            raise ValidationError(f"unknown closure '{closure}'", "closure")
        self.eq, self.basis, self.closure = eq, basis, closure
        p = eq.params
        self.p = p
        self.const = derived_constants(eq)
        gam = p.gamma
        self.D = p.kappa / (gam * p.c_g)       # kappa/(gamma c_g)
        self.s0 = 3.0 * gam * eq.rho_star / eq.R_star
        self.T_N = ball_integral_tail(basis.N)
        self.a0 = 4.0 * math.pi / (3.0 * gam) + self.T_N * (gam - 1.0) / gam
        if closure == "mass":
            self.s = 4.0 * math.pi * eq.rho_star / eq.R_star / self.a0
        else:
            self.s = self.s0
        self.L = assemble_linear(eq, basis, closure)
        y = basis.quadrature.nodes
        self._y = y
        self._yXi = y * basis.dXi         # y dXi/dy, used for y d rho/dy
        self._lamXi = basis.lam[:, None] * basis.Xi
        self._XiW = basis.Xi * basis.W    # rows give inner products <Xi_k, .>
        self.n = basis.N + 3

    # -- helpers ---------------------------------------------------------
    def check_valid(self, z):
        eq = self.eq
        R = eq.R_star + z[1]
        rho_b = eq.rho_star + z[0]
        rho = rho_b + z[3:] @ self.basis.Xi
        if not np.all(np.isfinite(z)):
            raise ValidityError("state is not finite")
        if R < VALID_R * eq.R_star:
            raise ValidityError(f"state left validity region: R = {R:.4g}")
        rmin = min(float(rho.min()), rho_b)
        if rmin < VALID_RHO * eq.rho_star:
            raise ValidityError(f"state left validity region: min density {rmin:.4g}")
        return R, rho_b, rho

    def split(self, z):
        """Return (N1, N0); N1 is the full (n, n) matrix acting on z'."""
        z = np.asarray(z, dtype=float)
        eq, p, b = self.eq, self.p, self.basis
        R, rho_b, rho = self.check_valid(z)
        Rs, rs = eq.R_star, eq.rho_star
        rho2, dRad, dR = z[0], z[1], z[2]
        theta = z[3:]
        n = self.n
        N1 = np.zeros((n, n))
        N0 = np.zeros(n)

        # interior terms
        drho = theta @ b.dXi
        ydrho = theta @ self._yXi
        lap = -(theta @ self._lamXi)
        rho1 = rho - rho_b
        pi1_y = (ydrho / 3.0 + rho1) / (p.gamma * rho_b)
        pi0_y = self.D * (1.0 / (R * R * rho) - 1.0 / (Rs * Rs * rs)) * lap \
            - self.D * drho ** 2 / (R * R * rho * rho) + (dR / R) * ydrho
        Pi1 = self._XiW @ pi1_y
        Pi0 = self._XiW @ pi0_y

        # interface density row
        flux = b.flux_weights @ theta
        if self.closure == "none":
            phi1 = -dRad / (3.0 * p.gamma * rho_b) + Rs * rho2 / (3.0 * p.gamma * rs * rho_b)
            phi0 = -self.D * (1.0 / (R * rho_b ** 2) - 1.0 / (Rs * rs ** 2)) * flux
            r1 = self.s * phi1
            r0 = self.s * phi0
        else:
            m = (4.0 * math.pi / 3.0) * rho_b + b.b @ theta
            h = -3.0 * dR * m / R - b.b @ (-eq.kappa_bar * b.lam * theta + Pi0)
            r1 = -(b.b @ Pi1) / self.a0
            r0 = h / self.a0 - self.L[0] @ z
        N1[0, 0] = r1
        N0[0] = r0

        # radius acceleration row
        Vb = eq.V_bar
        Rb, gapR = _rbar_minus_r(R, Vb)
        C = self.const.C
        inertia = R * gapR / Rb                       # R - R^2/Rbar
        N1[2, 2] = 1.0 - p.rho_l * inertia / C
        q = 1.0 - R / Rb
        qq = q * q * ((R / Rb) ** 2 + 2.0 * R / Rb + 3.0) / 2.0   # 3/2 - 2x + x^4/2
        Rbs = eq.Rbar_star
        dRb = (dRad * (R * R + R * Rs + Rs * Rs)) / (Rb * Rb + Rb * Rbs + Rbs * Rbs)
        visc = 4.0 * p.mu_l * Vb * (1.0 / (R * (R ** 3 + Vb)) - 1.0 / (Rs * (Rs ** 3 + Vb))) * dR
        surf = 2.0 * p.sigma * dRad ** 2 / (Rs * Rs * R)
        surf_b = 2.0 * p.sigma_bar * (Rs * Rs * dRad / Rbs ** 4 - dRb / (Rb * Rbs))
        KTpsi0 = visc + surf + surf_b + p.rho_l * qq * dR * dR
        N0[2] = -KTpsi0 / C

        # modal rows
        N1[3:, 0] = Pi1 - b.c * r1
        N0[3:] = Pi0 - b.c * r0
        return N1, N0

    def nonlinear_terms(self, z):
        return self.split(z)

    def rhs(self, z):
        z = np.asarray(z, dtype=float)
        N1, N0 = self.split(z)
        f = self.L @ z + N0
        # N1 is nonzero only in columns 0 and 2: solve the 2x2 block first
        A = np.array([[1.0 - N1[0, 0], -N1[0, 2]], [-N1[2, 0], 1.0 - N1[2, 2]]])
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if not math.isfinite(det) or abs(det) < 1e-14 * max(1.0, np.abs(A).max()) ** 2:
            M = np.eye(self.n) - N1
            return solve_dense(M, f, "mass matrix (I - N1)")
        w0 = (A[1, 1] * f[0] - A[0, 1] * f[2]) / det
        w2 = (A[0, 0] * f[2] - A[1, 0] * f[0]) / det
        zd = f + N1[:, 0] * w0 + N1[:, 2] * w2
        zd[0], zd[2] = w0, w2
        return zd

    def rhs_dense(self, z):
        """Reference path: dense LU of (I - N1)."""
        N1, N0 = self.split(z)
        return solve_dense(np.eye(self.n) - N1, self.L @ z + N0, "mass matrix (I - N1)")

    def mass(self, z):
        z = np.asarray(z, dtype=float)
        R = self.eq.R_star + z[1]
        m = (4.0 * math.pi / 3.0) * (self.eq.rho_star + z[0]) + self.basis.b @ z[3:]
        return R ** 3 * m

    def scales(self):
        eq = self.eq
        v = eq.R_star * math.pi ** 2 * eq.kappa_bar
        sc = np.full(self.n, eq.rho_star)
        sc[1] = eq.R_star
        sc[2] = v
        return sc


def assemble_linear(eq: EquilibriumState, basis: ModalBasis, closure="none"):
    """Dense L_N in the order (rho2, delta_R, dR, theta_1..theta_N)."""
    p = eq.params
    c = derived_constants(eq)
    N = basis.N
    n = N + 3
    s = 3.0 * p.gamma * eq.rho_star / eq.R_star
    if closure == "mass":
        s = s / (1.0 + 3.0 * (p.gamma - 1.0) * ball_integral_tail(N) / (4.0 * math.pi))
    elif closure != "none":
        raise ValidationError(f"unknown closure '{closure}'", "closure")
    L = np.zeros((n, n))
    L[0, 2] = -s
    L[0, 3:] = s * basis.omega
    L[1, 2] = 1.0
    L[2, 0] = p.KT / c.C
    L[2, 1] = c.A / c.C
    L[2, 2] = -c.B / c.C
    L[3:, 2] = basis.c * s
    L[3:, 3:] = -s * np.outer(basis.c, basis.omega) - np.diag(eq.kappa_bar * basis.lam)
    return L


def kernel_vector(eq, N):
    c = derived_constants(eq)
    U = np.zeros(N + 3)
    U[0] = -c.A / eq.params.KT
    U[1] = 1.0
    return U


def left_vector(eq, basis):
    g = eq.params.gamma
    U = np.zeros(basis.N + 3)
    U[0] = 4.0 * math.pi / 3.0
    U[1] = 4.0 * math.pi * eq.rho_star / eq.R_star
    U[3:] = g * basis.c / (g - 1.0)
    return U


def nonlinear_terms(z, eq, basis, closure="mass"):
    return GalerkinSystem(eq, basis, closure).split(_energy.as_vector(z))


def rhs(z, eq, basis, closure="mass"):
    return GalerkinSystem(eq, basis, closure).rhs(_energy.as_vector(z))


# ---------------------------------------------------------------------------
# initial data

def shape_function(shape):
    """'parabolic' -> 1 - y^2; 'mode-k' -> sin(k pi y)/(k pi y); callables pass through."""
    if callable(shape):
        return shape
    if shape == "parabolic":
        return lambda y: 1.0 - np.asarray(y) ** 2
    if isinstance(shape, str) and shape.startswith("mode-"):
        try:
            k = int(shape[5:])
        except ValueError:
            k = 0
        if k >= 1:
            return lambda y: np.sinc(k * np.asarray(y, dtype=float))
    raise ValidationError(f"unknown shape '{shape}'", "shape")


def make_initial(profile, eq, basis) -> ModalState:
    """Mass-projected initial state.

    rho0(R0 y) = c rho* (1 + eps shape(y)), R0 = R*(1+delta), R0' = dR0, with the
    constant c chosen so that the (modal) gas mass equals M.
    """
    eps = float(profile.get("eps", 0.0))
    delta = float(profile.get("delta", 0.0))
    dR0 = float(profile.get("dR0", 0.0))
    f = shape_function(profile.get("shape", "parabolic"))
    s1 = float(f(np.array([1.0]))[0])
    if abs(s1) > 1e-12:
        raise ValidationError("shape must vanish at y = 1", "shape")
    th = basis.project(f)
    rs = eq.rho_star
    R0 = eq.R_star * (1.0 + delta)
    if R0 <= 0:
        raise ValidationError("delta gives a nonpositive radius", "delta")
    m_unit = rs * (4.0 * math.pi / 3.0 + eps * (basis.b @ th))
    c = eq.M / (R0 ** 3 * m_unit)
    z = np.concatenate([[c * rs - rs, R0 - eq.R_star, dR0], c * rs * eps * th])
    # the interface perturbation c*rs - rs loses digits when c ~ 1
    z[0] = rs * math.expm1(math.log(eq.M) - 3.0 * math.log1p(delta) - 3.0 * math.log(eq.R_star)
                           - math.log(m_unit))
    z[1] = eq.R_star * delta
    st = ModalState.from_vector(z)
    rho = rs + z[0] + z[3:] @ basis.Xi
    if np.any(rho <= 0) or rs + z[0] <= 0:
        raise ValidationError("initial density is not positive", "eps")
    return st


def scaled_initial(norm, profile, eq, basis, iters=4):
    """make_initial with eps, delta, dR0 scaled jointly so that ||z0|| = norm."""
    prof = dict(profile)
    base = {k: float(prof.get(k, 0.0)) for k in ("eps", "delta", "dR0")}
    if all(v == 0 for v in base.values()):
        raise ValidationError("profile has no perturbation to scale")
    t = 1.0
    for _ in range(iters):
        prof.update({k: t * v for k, v in base.items()})
        z = make_initial(prof, eq, basis).vector
        t *= norm / np.linalg.norm(z)
    prof.update({k: t * v for k, v in base.items()})
    return make_initial(prof, eq, basis)


def neighbor_equilibrium_state(M_new, eq, basis):
    """Modal state of the equilibrium with mass M_new and the same V."""
    e2 = solve_radius(M_new, eq.V, eq.params)
    z = np.zeros(basis.N + 3)
    z[0] = e2.rho_star - eq.rho_star
    z[1] = e2.R_star - eq.R_star
    return ModalState.from_vector(z)


# ---------------------------------------------------------------------------
# time integration

def _output_times(t_end, output_dt):
    if output_dt is None:
        output_dt = t_end / 200.0
    n = max(int(round(t_end / output_dt)), 1)
    return np.linspace(0.0, t_end, n + 1)


def _integrate(fun, y0, t_end, t_eval, opts, atol_vec, jac=None, jac_sparsity=None):
    kw = dict(method=opts.method, t_eval=t_eval, rtol=opts.rtol, atol=atol_vec,
              max_step=opts.max_step)
    if opts.method in ("Radau", "BDF", "LSODA"):
        if jac is not None:
            kw["jac"] = jac
        elif jac_sparsity is not None:
            kw["jac_sparsity"] = jac_sparsity
    status = "ok"
    box = {}

    def f(t, y):
        try:
            return fun(y)
        except ValidityError as exc:
            box["err"] = exc
            return np.full_like(y, np.nan)

    sol = solve_ivp(f, (0.0, t_end), y0, **kw)
    if "err" in box:
        status = f"halted: {box['err']}"
    elif not sol.success:
        status = f"failed: {sol.message}"
    return sol, status


def _finish(times, Z, masses, target_mass, eq, basis, zdots, opts, status, meta):
    n = len(times)
    E = np.full(n, np.nan)
    gap = np.full(n, np.nan)
    D = np.full(n, np.nan)
    if opts.energies:
        E0 = sum(_energy.equilibrium_energy(eq))
        for i in range(n):
            try:
                gap[i] = _energy.energy_gap(Z[i], eq, basis)
                D[i] = _energy.dissipation_rate(Z[i], eq, basis)[0]
                E[i] = E0 + gap[i]
            except ValidityError:
                pass
    return Trajectory(np.asarray(times), np.asarray(Z), np.asarray(masses),
                      (np.asarray(masses) - target_mass) / target_mass, E, gap, D,
                      np.linalg.norm(Z, axis=1), np.linalg.norm(zdots, axis=1),
                      status, meta)


def simulate(ic, t_end, opts: SimOptions | None = None, eq=None, basis=None,
             system: GalerkinSystem | None = None) -> Trajectory:
    """Integrate the Galerkin system from ic up to t_end."""
    opts = opts or SimOptions()
    if system is None:
        if eq is None or basis is None:
            raise ValidationError("simulate needs eq and basis (or a system)")
        system = GalerkinSystem(eq, basis, opts.closure)
    eq, basis = system.eq, system.basis
    z0 = _energy.as_vector(ic)
    if len(z0) != system.n:
        raise ValidationError("initial state size does not match the basis", "N")
    system.check_valid(z0)
    if not t_end > 0:
        raise ValidationError("t_end must be positive", "t_end")
    t_eval = _output_times(t_end, opts.output_dt)
    atol = opts.atol * system.scales()
    jac = system.L if opts.jac == "linear" else None
    sol, status = _integrate(system.rhs, z0, t_end, t_eval, opts, atol, jac=jac)
    if sol.t.size == 0:
        raise NumericalError(f"integration produced no output ({status})")
    Z = sol.y.T
    good = np.all(np.isfinite(Z), axis=1)
    Z, times = Z[good], sol.t[good]
    masses = np.array([system.mass(z) for z in Z])
    zd = np.array([system.rhs(z) for z in Z])
    log.info("simulate: %d samples, status %s, nfev %d", len(times), status, sol.nfev)
    return _finish(times, Z, masses, eq.M, eq, basis, zd, opts, status,
                   {"nfev": int(sol.nfev), "solver": "galerkin", "closure": system.closure})


# ---------------------------------------------------------------------------
# finite-difference oracle

class FDSystem:
    """Method of lines on a uniform y-grid for the fixed-domain problem.

    Unknowns: rho at y_i = i/n (i = 0..n, the last being the interface
    density), R and R'. The interface density follows the kinematic boundary
    relation; R'' follows from the algebraic interface-pressure relation.
    """

    def __init__(self, eq, n=512):
        if n < 64:
            raise ValidationError("grid size must be >= 64", "grid")
        if eq.infinite:
            raise ValidationError("dynamics requires a finite liquid volume", "V")
        self.eq, self.n = eq, n
        self.p = eq.params
        self.h = 1.0 / n
        self.y = np.linspace(0.0, 1.0, n + 1)
        self.D = self.p.kappa / (self.p.gamma * self.p.c_g)
        # trapezoid-with-endpoint-correction weights for integral of f y^2 over ball
        w = np.full(n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        self._mw = 4.0 * math.pi * w * self.y ** 2

    def unpack(self, u):
        return u[: self.n + 1], u[self.n + 1], u[self.n + 2]

    def rhs(self, u):
        eq, p, n, h, y = self.eq, self.p, self.n, self.h, self.y
        rho, R, dR = self.unpack(u)
        if not np.all(np.isfinite(u)):
            raise ValidityError("state is not finite")
        if R < VALID_R * eq.R_star or rho.min() < VALID_RHO * eq.rho_star:
            raise ValidityError("state left validity region")
        rb = rho[n]
        lg = np.log(rho)
        # interface flux, second-order one-sided
        flux = (3.0 * rho[n] - 4.0 * rho[n - 1] + rho[n - 2]) / (2.0 * h)
        rb_dot = -(3.0 * p.gamma * rb / R) * (dR + self.D / R * flux / rb ** 2)
        pdot = rb_dot / rb
        out = np.empty_like(u)
        # interior: Laplacian of log rho (conservative form) and transport terms
        lap = np.empty(n)
        ym = y[1:n] - 0.5 * h
        yp = y[1:n] + 0.5 * h
        lap[1:] = (yp ** 2 * (lg[2:] - lg[1:n]) - ym ** 2 * (lg[1:n] - lg[:n - 1])) / (y[1:n] ** 2 * h * h)
        lap[0] = 6.0 * (lg[1] - lg[0]) / (h * h)
        ydr = np.zeros(n)
        ydr[1:] = y[1:n] * (rho[2:] - rho[:n - 1]) / (2.0 * h)
        out[:n] = self.D / (R * R) * lap + (dR / R) * ydr \
            + (pdot / p.gamma) * (ydr / 3.0 + rho[:n])
        out[n] = rb_dot
        Vb = eq.V_bar
        Rb, gapR = _rbar_minus_r(R, Vb)
        q = 1.0 - R / Rb
        qq = q * q * ((R / Rb) ** 2 + 2.0 * R / Rb + 3.0) / 2.0
        rhs_p = p.KT * rb - (4.0 * p.mu_l * Vb * dR / (R * (R ** 3 + Vb))
                             + 2.0 * p.sigma / R + 2.0 * p.sigma_bar / Rb
                             + p.rho_l * qq * dR * dR)
        out[n + 1] = dR
        out[n + 2] = rhs_p / (p.rho_l * R * gapR / Rb)
        return out

    def mass(self, u):
        rho, R, _ = self.unpack(u)
        return R ** 3 * float(self._mw @ rho)

    def sparsity(self):
        n = self.n
        m = n + 3
        S = scipy.sparse.lil_matrix((m, m), dtype=bool)
        for i in range(n):
            for j in (i - 1, i, i + 1):
                if 0 <= j <= n:
                    S[i, j] = True
        S[:n + 1, n - 2:n + 3] = True
        S[n + 1, n + 2] = True
        S[n + 2, n] = True
        S[n + 2, n + 1] = True
        S[n + 2, n + 2] = True
        return S.tocsr()

    def from_modal(self, z, basis):
        z = _energy.as_vector(z)
        eq = self.eq
        rho = eq.rho_star + z[0] + basis.reconstruct(z[3:], self.y)
        rho[-1] = eq.rho_star + z[0]
        return np.concatenate([rho, [eq.R_star + z[1], z[2]]])

    def to_modal(self, u, basis):
        """Project a grid state onto (rho2, delta_R, dR, theta)."""
        rho, R, dR = self.unpack(u)
        eq = self.eq
        spl = CubicSpline(self.y, rho - rho[-1])
        theta = basis.project(spl)
        return np.concatenate([[rho[-1] - eq.rho_star, R - eq.R_star, dR], theta])


def fd_oracle(ic, t_end, opts: SimOptions | None = None, eq=None, basis=None,
              grid=512) -> Trajectory:
    """Independent method-of-lines solution; samples are projected on the basis."""
    opts = opts or SimOptions(method="BDF")
    if eq is None or basis is None:
        raise ValidationError("fd_oracle needs eq and basis")
    fd = FDSystem(eq, grid)
    if isinstance(ic, np.ndarray) and ic.shape == (grid + 3,):
        u0 = ic.astype(float)
    else:
        u0 = fd.from_modal(ic, basis)
    t_eval = _output_times(t_end, opts.output_dt)
    sc = np.full(grid + 3, eq.rho_star)
    sc[grid + 1] = eq.R_star
    sc[grid + 2] = eq.R_star * math.pi ** 2 * eq.kappa_bar
    o = SimOptions(**{**opts.__dict__})
    if o.method == "Radau" and opts.jac == "linear":
        o.method = "BDF"
    sol, status = _integrate(fd.rhs, u0, t_end, t_eval, o, opts.atol * sc,
                             jac_sparsity=fd.sparsity())
    if sol.t.size == 0:
        raise NumericalError(f"integration produced no output ({status})")
    U = sol.y.T
    good = np.all(np.isfinite(U), axis=1)
    U, times = U[good], sol.t[good]
    Z = np.array([fd.to_modal(u, basis) for u in U])
    masses = np.array([fd.mass(u) for u in U])
    zd = np.zeros_like(Z)
    traj = _finish(times, Z, masses, eq.M, eq, basis, zd, opts, status,
                   {"nfev": int(sol.nfev), "solver": "fd", "grid": grid})
    traj.meta["grid_states"] = U
    return traj


def fit_decay_rate(times, znorm, window=(0.4, 1.0)):
    """Least-squares slope of log ||z|| over the given fraction of the run."""
    t = np.asarray(times)
    zn = np.asarray(znorm)
    t0, t1 = t[0] + window[0] * (t[-1] - t[0]), t[0] + window[1] * (t[-1] - t[0])
    sel = (t >= t0) & (t <= t1) & (zn > 0)
    if sel.sum() < 3:
        raise NumericalError("not enough samples to fit a decay rate")
    slope, _ = np.polyfit(t[sel], np.log(zn[sel]), 1)
    return -slope

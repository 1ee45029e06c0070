"""Characteristic function M(lambda), its zeros, decay-bound constants and the
comparison with the truncated matrix.

Internally the spectral variable is scaled, mu = lambda / (pi^2 kappa_bar), so
that the poles sit at mu = -k^2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special
from scipy.optimize import brentq

from .core import NumericalError, ValidationError
from .equilibrium import EquilibriumState, derived_constants
from .modal import ModalBasis

log = logging.getLogger(__name__)

POLE_GUARD = 1e-8
_ZETA = scipy.special.zeta(2.0 * np.arange(1, 12) + 0.0, 1.0)  # zeta(2), zeta(4), ...


def _S_taylor(mu, nterms=6):
    # sum_n (-mu)^n zeta(2n+2)
    acc = np.zeros_like(mu)
    for n in range(nterms - 1, -1, -1):
        acc = acc * (-mu) + _ZETA[n]
    return acc


def _dS_taylor(mu, nterms=8):
    # sum_{n>=1} n (-1)^n mu^(n-1) zeta(2n+2)
    acc = np.zeros_like(mu)
    for n in range(nterms, 0, -1):
        acc = acc * mu + n * (-1) ** n * _ZETA[n]
    return acc


def _coth(x):
    # Re x >= 0 on the principal branch
    e = np.exp(-2.0 * x)
    return (1.0 + e) / (1.0 - e)


def series_S(mu, derivative=False):
    """S(mu) = sum_{k>=1} 1/(k^2 + mu) in closed form (and optionally S')."""
    mu = np.asarray(mu, dtype=complex)
    scalar = mu.ndim == 0
    mu = np.atleast_1d(mu)
    k = np.rint(np.sqrt(np.maximum(-mu.real, 0.0)))
    near = (k >= 1) & (np.abs(mu + k * k) < POLE_GUARD)
    if np.any(near):
        raise ValidationError(
            f"lambda too close to a pole of M (mu = {mu[near][0]:.6g})", "lambda")
    S = np.empty_like(mu)
    dS = np.empty_like(mu)
    small = np.abs(mu) < 1e-3
    S[small] = _S_taylor(mu[small])
    big = ~small
    if np.any(big):
        m = mu[big]
        x = np.pi * np.sqrt(m)
        ct = _coth(x)
        S[big] = (x * ct - 1.0) / (2.0 * m)
    if derivative:
        small2 = np.abs(mu) < 1e-2
        dS[small2] = _dS_taylor(mu[small2])
        b2 = ~small2
        if np.any(b2):
            m = mu[b2]
            x = np.pi * np.sqrt(m)
            ct = _coth(x)
            dxct = ct - x * (ct * ct - 1.0)
            dS[b2] = dxct * np.pi ** 2 / (2.0 * x) / (2.0 * m) - (x * ct - 1.0) / (2.0 * m * m)
        if scalar:
            return S[0], dS[0]
        return S, dS
    return S[0] if scalar else S


@dataclass(frozen=True)
class CharacteristicFunction:
    """M(lambda) for one equilibrium; call with lambda (complex)."""

    eq: EquilibriumState

    def __post_init__(self):
        eq = self.eq
        p = eq.params
        c = derived_constants(eq)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "unit", math.pi ** 2 * eq.kappa_bar)
        object.__setattr__(self, "pref", math.pi / (p.KT * p.gamma))
        object.__setattr__(self, "coef", 8.0 * (p.gamma - 1.0) / math.pi ** 2)
        object.__setattr__(self, "const", 4.0 * math.pi * eq.rho_star / eq.R_star)

    def _parts(self, lam):
        c = self.c
        lam = np.asarray(lam, dtype=complex)
        mu = lam / self.unit
        S, dS = series_S(mu, derivative=True)
        bracket = 4.0 / 3.0 + self.coef * S
        quad = c.C * lam * lam + c.B * lam - c.A
        return lam, bracket, quad, dS

    def __call__(self, lam):
        lam, bracket, quad, _ = self._parts(lam)
        return self.pref * bracket * quad + self.const

    def derivative(self, lam):
        lam, bracket, quad, dS = self._parts(lam)
        c = self.c
        return self.pref * (self.coef * dS / self.unit * quad + bracket * (2.0 * c.C * lam + c.B))

    def scale(self, lam):
        lam, bracket, quad, _ = self._parts(lam)
        return np.abs(self.pref * bracket * quad) + abs(self.const)

    def poles(self, kmax):
        k = np.arange(1, kmax + 1)
        return -self.unit * k * k


def eval_M(lam, eq):
    return CharacteristicFunction(eq)(lam)


# ---------------------------------------------------------------------------
# root finding

@dataclass
class Window:
    re_lo: float
    re_hi: float
    im_hi: float

    @classmethod
    def default(cls, eq, re_lo=-12.0, re_hi=None, im_hi=10.0):
        """Bounds in units of pi^2 kappa_bar (re_hi defaults to -1e-12 absolute)."""
        unit = math.pi ** 2 * eq.kappa_bar
        if re_hi is None:
            re_hi = -1e-12 / unit
        return cls(re_lo, re_hi, im_hi)


def _nudge(x, dist=1e-6):
    """Move a real coordinate (in mu units) away from the poles -k^2."""
    if x >= 0:
        return x
    k = round(math.sqrt(-x))
    if k >= 1 and abs(x + k * k) < dist * max(1, k * k):
        return x + 2 * dist * max(1, k * k)
    return x


def _segment_winding(F, a, b, max_points=200000):
    """Total change of arg F along the straight segment a -> b, in radians."""
    t = np.linspace(0.0, 1.0, 65)
    vals = F(a + (b - a) * t)
    for _ in range(60):
        d = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(d) > math.pi / 6
        if not np.any(bad) or len(t) > max_points:
            break
        mids = 0.5 * (t[:-1] + t[1:])[bad]
        t_new = np.concatenate([t, mids])
        order = np.argsort(t_new)
        v_new = np.concatenate([vals, F(a + (b - a) * mids)])
        t, vals = t_new[order], v_new[order]
    d = np.angle(vals[1:] / vals[:-1])
    if np.any(np.abs(d) > math.pi / 2):
        raise NumericalError("argument principle: contour resolution failed")
    return float(np.sum(d)), float(np.min(np.abs(vals)))


def _winding(F, x0, x1, y0, y1):
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total, vmin = 0.0, math.inf
    for i in range(4):
        w, m = _segment_winding(F, corners[i], corners[(i + 1) % 4])
        total += w
        vmin = min(vmin, m)
    n = total / (2 * math.pi)
    if abs(n - round(n)) > 0.05:
        raise NumericalError(f"argument principle: non-integer winding {n:.4f}")
    return int(round(n)), vmin


def _newton(F, dF, z0, tol, box=None, maxit=60):
    z = complex(z0)
    fz = F(z)
    for _ in range(maxit):
        d = dF(z)
        if d == 0 or not np.isfinite(d):
            break
        step = fz / d
        lam = 1.0
        while lam > 1e-6:
            zn = z - lam * step
            inside = box is None or (box[0] <= zn.real <= box[1] and box[2] <= zn.imag <= box[3])
            if inside:
                try:
                    fn = F(zn)
                except ValidationError:
                    fn = np.inf
                if abs(fn) < abs(fz) or abs(fn) <= tol:
                    break
            lam *= 0.5
        else:
            break
        z, fz = zn, fn
        if abs(lam * step) <= 1e-15 * max(1.0, abs(z)) or abs(fz) <= tol * 1e-3:
            break
    return z, fz


def _secant(F, z0, z1, maxit=60):
    f0, f1 = F(z0), F(z1)
    for _ in range(maxit):
        if f1 == f0:
            break
        z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
        z0, f0, z1, f1 = z1, f1, z2, F(z2)
        if abs(z1 - z0) <= 1e-15 * max(1.0, abs(z1)):
            break
    return z1, f1


@dataclass
class RootSearch:
    roots: list
    residuals: list
    unresolved: list = field(default_factory=list)
    count_check: tuple | None = None


def find_roots(eq, window: Window | None = None, max_subdiv=40, rtol=1e-10):
    """Zeros of M in the window (bounds in units of pi^2 kappa_bar).

    Real zeros: bracketed between consecutive poles and refined by Brent's
    method. Non-real zeros: argument principle on the upper half of the
    window with recursive bisection, Newton polish, conjugates added. A final
    argument-principle count over the whole window (zeros minus the known
    poles) checks that nothing was missed.
    """
    Mf = CharacteristicFunction(eq)
    unit = Mf.unit
    w = window or Window.default(eq)
    x0, x1 = _nudge(w.re_lo), _nudge(w.re_hi)
    y1 = w.im_hi

    def F(mu):
        return Mf(np.asarray(mu) * unit)

    def dF(mu):
        return Mf.derivative(np.asarray(mu) * unit) * unit

    def resid(mu):
        lam = mu * unit
        return float(abs(Mf(lam)) / Mf.scale(lam))

    # real axis
    kmax = int(math.floor(math.sqrt(max(-x0, 0.0)))) + 1
    cuts = [x0] + sorted([-k * k for k in range(1, kmax + 1) if x0 < -k * k < x1]) + [x1]
    real_roots = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        ea = a + (POLE_GUARD * 10 * max(1.0, abs(a)) if a in (-k * k for k in range(1, kmax + 1)) else 0)
        eb = b - (POLE_GUARD * 10 * max(1.0, abs(b)) if b in (-k * k for k in range(1, kmax + 1)) else 0)
        s = np.linspace(0, 1, 4001)
        xs = ea + (eb - ea) * (0.5 - 0.5 * np.cos(np.pi * s))   # clustered at the ends
        fv = np.real(F(xs))
        sign = np.sign(fv)
        for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
            r = brentq(lambda x: float(np.real(F(x))), xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
            # skip sign changes across a pole (none inside by construction)
            real_roots.append(r)

    # upper half plane
    cplx, unresolved = [], []
    eps_im = 1e-7
    stack = [(x0, x1, eps_im, y1, 0)]
    while stack:
        a, b, c, d, depth = stack.pop()
        try:
            n, _ = _winding(F, a, b, c, d)
        except NumericalError:
            n = -1
        if n == 0:
            continue
        size = max(b - a, d - c)
        if n == 1:
            box = (a, b, c, d)
            z, fz = _newton(F, dF, complex(0.5 * (a + b), 0.5 * (c + d)), 0.0, box)
            if not (box[0] <= z.real <= box[1] and box[2] <= z.imag <= box[3]) or not np.isfinite(fz):
                z, fz = _secant(F, complex(0.5 * (a + b), 0.5 * (c + d)),
                                complex(0.5 * (a + b) + 0.01 * size, 0.5 * (c + d)))
            if (box[0] <= z.real <= box[1] and box[2] <= z.imag <= box[3]
                    and resid(z) <= rtol):
                cplx.append(z)
                continue
        if depth >= max_subdiv:
            unresolved.append((a, b, c, d, n))
            continue
        if b - a >= d - c:
            m = _nudge(0.5 * (a + b) + 1e-9 * (b - a))
            stack += [(a, m, c, d, depth + 1), (m, b, c, d, depth + 1)]
        else:
            m = 0.5 * (c + d) + 1e-9 * (d - c)
            stack += [(a, b, c, m, depth + 1), (a, b, m, d, depth + 1)]

    mus = [complex(r, 0.0) for r in real_roots]
    for z in cplx:
        mus += [z, z.conjugate()]
    mus.sort(key=lambda z: (-z.real, z.imag))

    # global consistency: zeros - poles inside the full window
    check = None
    try:
        n, _ = _winding(F, x0, x1, -y1, y1)
        poles = sum(1 for k in range(1, kmax + 1) if x0 < -k * k < x1)
        check = (n + poles, len(mus))
        if n + poles != len(mus):
            log.warning("root count mismatch: argument principle %d, found %d",
                        n + poles, len(mus))
            unresolved.append(("count", n + poles, len(mus)))
    except NumericalError as exc:
        unresolved.append(("count", str(exc)))
    lams = [z * unit for z in mus]
    return RootSearch(lams, [resid(z) for z in mus], unresolved, check)


# ---------------------------------------------------------------------------
# bounds and reports

@dataclass(frozen=True)
class DecayBounds:
    Theta1: float
    Theta2: float
    varpi: float
    case: str
    r: float


def decay_bounds(eq) -> DecayBounds:
    c = derived_constants(eq)
    p = eq.params
    KT, rho, R = p.KT, eq.rho_star, eq.R_star
    denom = 3.0 * KT * rho * p.gamma / (R * (c.K * c.C + c.A)) - 1.0
    r = (p.gamma - 1.0) / denom
    if not (0.0 < r < 1.0):
        raise NumericalError(f"internal inconsistency: bound ratio {r!r} not in (0,1)")
    T2 = 1.0 - r
    T1 = 1.0 - math.sqrt(r)
    unit = math.pi ** 2 * eq.kappa_bar
    disc = c.B ** 2 - 4.0 * c.K * c.C ** 2
    if disc <= 0:
        varpi = 0.5 * min(T2 * unit, max(c.B / (2 * c.C), min(T1 * unit, math.sqrt(c.K / 2))))
        case = "B2<=4KC2"
    else:
        varpi = 0.5 * min(T2 * unit, (c.B - math.sqrt(disc)) / (2 * c.C))
        case = "B2>4KC2"
    return DecayBounds(T1, T2, varpi, case, r)


@dataclass
class SpectrumReport:
    roots: list
    residuals: list
    abscissa: float
    matrix_eigs: np.ndarray
    constants: dict
    gap: dict
    predicted_rate: float
    unit: float
    unresolved: list = field(default_factory=list)
    count_check: tuple | None = None

    def to_json(self, window_eigs=None):
        return {
            "roots": [{"re": float(z.real), "im": float(z.imag), "residual": float(r)}
                      for z, r in zip(self.roots, self.residuals)],
            "abscissa": self.abscissa,
            "constants": self.constants,
            "gap": self.gap,
            "matrix_eigs_window": [{"re": float(z.real), "im": float(z.imag)}
                                   for z in (window_eigs if window_eigs is not None
                                             else self.matrix_eigs)],
            "predicted_rate": self.predicted_rate,
            "unit_pi2_kappa_bar": self.unit,
            "unresolved": [list(map(str, u)) for u in self.unresolved],
        }


def matrix_eigenvalues(eq, N=128, closure="mass"):
    from .dynamics import assemble_linear
    basis = ModalBasis.build(N, eq)
    return np.linalg.eigvals(assemble_linear(eq, basis, closure))


def eigs_in_window(eigs, eq, window: Window, zero_tol=1e-8):
    unit = math.pi ** 2 * eq.kappa_bar
    mu = np.asarray(eigs) / unit
    sel = (mu.real >= window.re_lo) & (mu.real <= window.re_hi) & \
        (np.abs(mu.imag) <= window.im_hi) & (np.abs(mu) > zero_tol)
    out = np.asarray(eigs)[sel]
    return out[np.lexsort((out.imag, -out.real))]


def spectrum_report(eq, window: Window | None = None, N=128, closure="mass",
                    max_subdiv=40) -> SpectrumReport:
    w = window or Window.default(eq)
    rs = find_roots(eq, w, max_subdiv=max_subdiv)
    unit = math.pi ** 2 * eq.kappa_bar
    if not rs.roots:
        raise NumericalError("no roots of M found in the search window")
    abscissa = max(z.real for z in rs.roots)
    c = derived_constants(eq)
    db = decay_bounds(eq)
    Mf = CharacteristicFunction(eq)
    real_first = [z.real for z in rs.roots if abs(z.imag) == 0 and -unit < z.real < 0]
    theta0 = -abscissa / unit
    certified = bool(real_first) and all(z.real <= -theta0 * unit * (1 - 1e-12) for z in rs.roots) \
        and 0 < theta0 < 1 and float(np.real(Mf(0.0))) > 0
    gap = {"lo": -unit, "hi": -theta0 * unit, "Theta0": theta0, "certified": certified,
           "real_root_in_first_interval": real_first[0] if real_first else None}
    eigs = matrix_eigenvalues(eq, N, closure)
    const = {"A": c.A, "B": c.B, "C": c.C, "K": c.K, "Theta1": db.Theta1,
             "Theta2": db.Theta2, "varpi": db.varpi, "case": db.case,
             "Theta0_interval": [db.Theta1, db.Theta2], "Theta0_bound": 2 * db.varpi / unit,
             "pi2_kappa_bar": unit}
    return SpectrumReport(rs.roots, rs.residuals, abscissa, eigs, const, gap, -abscissa,
                          unit, rs.unresolved, rs.count_check)


def rate_scaling(eqs, window: Window | None = None):
    """Rows (M, T_inf, pi^2 kappa_bar, abscissa) for a family of equilibria."""
    rows = []
    for eq in eqs:
        rs = find_roots(eq, window)
        rows.append({"M": eq.M, "T_inf": eq.params.T_inf,
                     "pi2_kappa_bar": math.pi ** 2 * eq.kappa_bar,
                     "abscissa": max(z.real for z in rs.roots)})
    return rows

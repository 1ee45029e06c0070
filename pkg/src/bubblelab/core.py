"""Parameter records, validation and shared numeric helpers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.linalg


class ValidationError(ValueError):
    """Invalid user input. Carries the offending field name."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(RuntimeError):
    """Raised when a computation fails for numerical reasons."""


class ValidityError(NumericalError):
    """State has left the region where the reduced model is trusted."""


GAMMA_RTOL = 1e-12

PARAM_KEYS = ("sigma", "sigma_bar", "mu_l", "rho_l", "kappa", "c_g",
              "R_spec", "T_inf", "gamma")
PROBLEM_KEYS = ("M", "V")


@dataclass(frozen=True)
class PhysicalParams:
    """Material and thermodynamic constants.

    gamma may be omitted, in which case it is derived as 1 + R_spec/c_g.
    """

    sigma: float
    sigma_bar: float
    mu_l: float
    rho_l: float
    kappa: float
    c_g: float
    R_spec: float
    T_inf: float
    gamma: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            try:
                object.__setattr__(self, f.name, float(v))
            except (TypeError, ValueError):
                raise ValidationError(f"{f.name} must be a real number", f.name)
        if self.gamma is None and _finite_pos(self.R_spec) and _finite_pos(self.c_g):
            object.__setattr__(self, "gamma", 1.0 + self.R_spec / self.c_g)
        validate_params(self)

    @property
    def KT(self):
        """Product R_spec * T_inf, which appears everywhere."""
        return self.R_spec * self.T_inf

    @property
    def beta(self):
        return self.sigma_bar / self.sigma

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _finite_pos(x):
    return x is not None and math.isfinite(x) and x > 0


def validate_params(p: PhysicalParams) -> PhysicalParams:
    """Return p unchanged, or raise ValidationError naming the first bad field."""
    for name in ("sigma", "mu_l", "rho_l", "kappa", "c_g", "R_spec", "T_inf"):
        v = getattr(p, name)
        if not _finite_pos(v):
            raise ValidationError(f"{name} must be positive", name)
    if not (math.isfinite(p.sigma_bar) and p.sigma_bar >= 0):
        raise ValidationError("sigma_bar must be nonnegative", "sigma_bar")
    g = 1.0 + p.R_spec / p.c_g
    if p.gamma is None or not math.isfinite(p.gamma):
        raise ValidationError("gamma must be a real number", "gamma")
    if abs(p.gamma - g) > GAMMA_RTOL * g:
        raise ValidationError(
            f"gamma must equal 1 + R_spec/c_g = {g!r}, got {p.gamma!r}", "gamma")
    return p


@dataclass(frozen=True)
class MassVolumePair:
    """Gas mass and liquid volume. V may be math.inf (unbounded liquid)."""

    M: float
    V: float

    def __post_init__(self):
        object.__setattr__(self, "M", float(self.M))
        object.__setattr__(self, "V", float(self.V))
        if not _finite_pos(self.M):
            raise ValidationError("M must be positive", "M")
        if not (self.V > 0) or math.isnan(self.V):
            raise ValidationError("V must be positive (or inf)", "V")

    @property
    def infinite(self):
        return math.isinf(self.V)

    @property
    def V_bar(self):
        return 3.0 * self.V / (4.0 * math.pi)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule mapped to (0, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "order", len(self.nodes))
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values):
        """Integrate samples over (0,1); last axis runs over the nodes."""
        return np.asarray(values) @ self.weights

    def ball(self, values):
        """Integral over the unit ball of a radial function sampled at the nodes."""
        return np.asarray(values) @ self.ball_weights

    @property
    def ball_weights(self):
        return 4.0 * math.pi * self.weights * self.nodes ** 2


def gauss_quadrature(Q: int) -> QuadratureRule:
    if int(Q) != Q or Q < 2:
        raise ValidationError("quadrature order Q must be an integer >= 2", "Q")
    x, w = np.polynomial.legendre.leggauss(int(Q))
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


def solve_dense(A, b, what="linear system"):
    """LU solve that reports the condition number on (near) singularity."""
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    if np.min(np.abs(np.diag(lu))) == 0.0:
        raise NumericalError(f"{what} is singular")
    x = scipy.linalg.lu_solve((lu, piv), b)
    if not np.all(np.isfinite(x)):
        cond = np.linalg.cond(A)
        raise NumericalError(f"{what} is singular (condition number {cond:.3e})")
    return x


def params_from_dict(d) -> tuple[PhysicalParams, MassVolumePair]:
    """Parse the flat JSON parameter block (keys sigma..gamma, M, V)."""
    if not isinstance(d, dict):
        raise ValidationError("parameter block must be a JSON object")
    allowed = set(PARAM_KEYS) | set(PROBLEM_KEYS)
    for k in d:
        if k not in allowed:
            raise ValidationError(f"unknown parameter key '{k}'", k)
    for k in PARAM_KEYS[:-1] + PROBLEM_KEYS:
        if k not in d:
            raise ValidationError(f"missing parameter key '{k}'", k)
    kw = {k: d[k] for k in PARAM_KEYS if k in d}
    V = d["V"]
    if isinstance(V, str) and V.lower() in ("inf", "infinity"):
        V = math.inf
    return PhysicalParams(**kw), MassVolumePair(d["M"], V)


def load_params(path):
    with open(path) as fh:
        return params_from_dict(json.load(fh))

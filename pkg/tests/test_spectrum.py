import math

import numpy as np
import pytest

from bubblelab.core import ValidationError
from bubblelab.spectrum import (CharacteristicFunction, Window, decay_bounds,
                                eigs_in_window, find_roots, matrix_eigenvalues,
                                series_S, spectrum_report)
from _instances import unit


def direct_S(mu, K=200000):
    k = np.arange(1, K + 1, dtype=float)
    # tail sum_{k>K} 1/(k^2+mu) ~ 1/K - 1/(2K^2) + (1/6 - mu)/(3 K^3)
    tail = 1 / K - 1 / (2 * K ** 2) + (1 / 6 - mu) / (3 * K ** 3)
    return np.sum(1 / (k * k + mu)) + tail


@pytest.mark.parametrize("mu", [0.0, 5e-4, -5e-4j, 2e-3 + 1e-3j, 0.7, -0.5, -3.3 + 2j,
                                -11.2 + 0.4j, 40 - 7j, -20.5])
def test_series_closed_form(mu):
    assert complex(series_S(mu)) == pytest.approx(direct_S(mu), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("mu", [1e-4, 5e-3 - 2e-3j, 0.3 + 0.2j, -2.5, -8 + 1j])
def test_series_derivative(mu):
    h = 1e-5
    fd = (series_S(mu + h) - series_S(mu - h)) / (2 * h)
    assert complex(series_S(mu, derivative=True)[1]) == pytest.approx(fd, rel=1e-7, abs=1e-9)


def test_series_continuous_at_switch():
    a, b = series_S(0.999e-3), series_S(1.001e-3)
    assert abs(a - b) < 1e-3 * 1.1   # slope is about -zeta(4)
    a, b = series_S(0.999e-2, True)[1], series_S(1.001e-2, True)[1]
    assert abs(a - b) < 1e-4


def test_pole_guard():
    with pytest.raises(ValidationError):
        series_S(-4.0 + 1e-10)


def test_M_derivative(eq):
    Mf = CharacteristicFunction(eq)
    lam, h = complex(-1.3, 0.8), 1e-6
    fd = (Mf(lam + h) - Mf(lam - h)) / (2 * h)
    assert complex(Mf.derivative(lam)) == pytest.approx(complex(fd), rel=1e-7)


def test_generic_roots(eq):
    rs = find_roots(eq)
    mu = sorted((z / unit(eq) for z in rs.roots), key=lambda z: (-z.real, z.imag))
    assert rs.count_check[0] == rs.count_check[1] and not rs.unresolved
    assert mu[0].real == pytest.approx(-0.77088, abs=1e-5) and mu[0].imag == 0
    assert mu[1].real == pytest.approx(-2.90345, abs=1e-5)
    assert mu[2].real == pytest.approx(-5.70525, abs=1e-5)
    assert mu[3] == pytest.approx(complex(-11.0673, -1.4259), abs=1e-4)
    assert mu[4] == pytest.approx(mu[3].conjugate(), abs=1e-12)
    assert max(rs.residuals) < 1e-10


def test_roots_are_matrix_eigenvalues(eq):
    """Generic instance: at N=128 the complex pair is off by about 6e-6 units."""
    rs = find_roots(eq)
    ev = matrix_eigenvalues(eq, 128)
    for z in rs.roots:
        assert np.min(np.abs(ev - z)) / unit(eq) < 1e-5


def test_matrix_truncation_converges(eq):
    rs = find_roots(eq)
    errs = []
    for N in (32, 64, 128):
        ev = matrix_eigenvalues(eq, N)
        errs.append(max(np.min(np.abs(ev - z)) for z in rs.roots))
    assert errs[0] > errs[1] > errs[2]


def test_decay_bounds(eq, eq_small):
    for e in (eq, eq_small):
        db = decay_bounds(e)
        assert 0 < db.Theta1 <= db.Theta2 < 1
        assert db.Theta1 == pytest.approx(1 - math.sqrt(db.r))
        assert db.varpi > 0
    assert decay_bounds(eq).case == "B2>4KC2"
    assert decay_bounds(eq_small).case == "B2<=4KC2"


def test_window_filter(eq):
    w = Window.default(eq)
    ev = eigs_in_window(matrix_eigenvalues(eq, 32), eq, w)
    mu = ev / unit(eq)
    assert np.all(mu.real <= 0) and np.all(mu.real >= w.re_lo)
    assert np.all(np.diff(-mu.real) >= -1e-12)


def test_spectrum_report_json(eq):
    rep = spectrum_report(eq, N=32)
    js = rep.to_json()
    assert js["abscissa"] == pytest.approx(-0.77088 * unit(eq), rel=1e-5)
    assert js["gap"]["certified"]
    c = js["constants"]
    assert c["Theta1"] <= c["Theta0_bound"] <= c["Theta2"] + 1e-15

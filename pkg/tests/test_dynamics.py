import math

import numpy as np
import pytest

from bubblelab.core import ValidationError, ValidityError
from bubblelab.dynamics import (FDSystem, GalerkinSystem, ModalState, SimOptions,
                                assemble_linear, fd_oracle, fit_decay_rate,
                                kernel_vector, left_vector, make_initial,
                                neighbor_equilibrium_state, scaled_initial, simulate)
from bubblelab.equilibrium import derived_constants
from bubblelab.modal import ModalBasis, ball_integral_tail
from bubblelab.spectrum import find_roots
from _instances import generic_eq, unit


@pytest.fixture(scope="module")
def sys16(eq):
    return GalerkinSystem(eq, ModalBasis.build(16, eq), "mass")


def random_state(rng, sysm, amp=1e-3):
    eq, b = sysm.eq, sysm.basis
    z = np.zeros(sysm.n)
    z[0] = amp * eq.rho_star * rng.normal()
    z[1] = amp * eq.R_star * rng.normal()
    z[2] = amp * eq.R_star * unit(eq) * rng.normal()
    z[3:] = amp * eq.rho_star * rng.normal(size=b.N) / np.arange(1, b.N + 1) ** 2
    return z


def test_literal_matrix_entries(eq):
    b = ModalBasis.build(8, eq)
    L = assemble_linear(eq, b, "none")
    c = derived_constants(eq)
    p = eq.params
    s = 3 * p.gamma * eq.rho_star / eq.R_star
    assert L[0, 2] == pytest.approx(-s)
    assert np.allclose(L[0, 3:], s * b.omega)
    assert L[1].tolist() == [0, 0, 1] + [0] * 8
    assert L[2, :3] == pytest.approx([p.KT / c.C, c.A / c.C, -c.B / c.C])
    expect = -s * np.outer(b.c, b.omega) - np.diag(eq.kappa_bar * (np.arange(1, 9) * math.pi) ** 2)
    assert np.allclose(L[3:, 3:], expect, rtol=1e-14)


def test_mass_closure_differs_by_tail_only(eq):
    for N in (8, 64):
        b = ModalBasis.build(N, eq)
        Lm, Ln = assemble_linear(eq, b, "mass"), assemble_linear(eq, b, "none")
        ratio = Lm[0, 2] / Ln[0, 2]
        p = eq.params
        assert ratio == pytest.approx(
            1 / (1 + 3 * (p.gamma - 1) * ball_integral_tail(N) / (4 * math.pi)), rel=1e-14)


def test_kernel_and_left_vectors(eq):
    for cl in ("mass", "none"):
        b = ModalBasis.build(32, eq)
        L = assemble_linear(eq, b, cl)
        assert np.max(np.abs(L @ kernel_vector(eq, 32))) <= 1e-13
    L = assemble_linear(eq, b, "mass")
    assert np.max(np.abs(left_vector(eq, b) @ L)) <= 1e-12


def test_zero_is_stationary(sys16):
    for cl in ("mass", "none"):
        s = GalerkinSystem(sys16.eq, sys16.basis, cl)
        assert np.max(np.abs(s.rhs(np.zeros(s.n)))) == 0.0


def test_neighbor_equilibrium_is_stationary(sys16):
    z = neighbor_equilibrium_state(sys16.eq.M * 1.01, sys16.eq, sys16.basis).vector
    zd = sys16.rhs(z)
    assert np.max(np.abs(zd / sys16.scales())) < 1e-12
    assert sys16.mass(z) == pytest.approx(sys16.eq.M * 1.01, rel=1e-14)


def test_jacobian_at_zero(sys16):
    sc = sys16.scales()
    J = np.empty((sys16.n, sys16.n))
    for j in range(sys16.n):
        e = np.zeros(sys16.n)
        e[j] = 1e-5 * sc[j]
        J[:, j] = (sys16.rhs(e) - sys16.rhs(-e)) / (2 * e[j])
    nz = sys16.L != 0
    assert np.max(np.abs(J - sys16.L)[nz] / np.abs(sys16.L[nz])) < 1e-6
    assert np.max(np.abs(J[~nz])) < 1e-9 * np.abs(sys16.L).max()


def test_block_solve_matches_dense(sys16):
    rng = np.random.default_rng(0)
    for _ in range(5):
        z = random_state(rng, sys16, 1e-2)
        assert np.allclose(sys16.rhs(z), sys16.rhs_dense(z), rtol=1e-11,
                           atol=1e-13 * np.abs(sys16.rhs(z)).max())


def test_mass_closure_conserves_mass_along_rhs(sys16):
    rng = np.random.default_rng(1)
    z = random_state(rng, sys16, 1e-2)
    zd = sys16.rhs(z)
    h = 1e-4 / np.linalg.norm(zd / sys16.scales())
    dm = (sys16.mass(z + h * zd) - sys16.mass(z - h * zd)) / (2 * h)
    assert abs(dm) < 1e-10 * sys16.eq.M * unit(sys16.eq)


def test_make_initial_has_exact_mass(eq):
    b = ModalBasis.build(32, eq)
    s = GalerkinSystem(eq, b)
    for prof in ({"eps": 0.1, "delta": 0.02}, {"eps": -0.05, "shape": "mode-2"}):
        z = make_initial(prof, eq, b)
        assert s.mass(z.vector) == pytest.approx(eq.M, rel=1e-14)
    with pytest.raises(ValidationError):
        make_initial({"eps": 0.1, "shape": lambda y: 1 + 0 * y}, eq, b)
    with pytest.raises(ValidationError):
        make_initial({"eps": 0.1, "shape": "wobble"}, eq, b)


def test_scaled_initial_norm(eq):
    b = ModalBasis.build(16, eq)
    z = scaled_initial(1e-3, {"eps": 1, "delta": 0.5}, eq, b)
    assert np.linalg.norm(z.vector) == pytest.approx(1e-3, rel=1e-9)
    assert isinstance(z, ModalState) and z.N == 16


def test_validity_region(sys16):
    z = np.zeros(sys16.n)
    z[1] = -0.95 * sys16.eq.R_star
    with pytest.raises(ValidityError):
        sys16.rhs(z)


def test_infinite_volume_rejected():
    eq = generic_eq(V=math.inf)
    with pytest.raises(ValidationError):
        GalerkinSystem(eq, ModalBasis.build(4, generic_eq()))


def test_short_run_decays_and_conserves_mass(eq):
    b = ModalBasis.build(24, eq)
    z0 = scaled_initial(1e-3, {"eps": 1, "delta": 0.5}, eq, b)
    tr = simulate(z0, 2 / unit(eq), SimOptions(output_dt=0.02 / unit(eq)), eq=eq, basis=b)
    assert tr.status == "ok"
    assert np.max(np.abs(tr.mass_drift)) < 1e-12
    assert tr.znorm[-1] < 0.5 * tr.znorm[0]
    assert np.all(np.diff(tr.gap) <= 1e-9 * abs(tr.energy[0]))


def test_halt_reported_as_status(eq):
    b = ModalBasis.build(8, eq)
    z0 = np.zeros(11)
    z0[2] = -20 * eq.R_star * unit(eq)       # fast collapse towards R = 0
    tr = simulate(z0, 1.0, SimOptions(), eq=eq, basis=b)
    assert tr.status.startswith("halted")
    assert np.all(tr.Z[:, 1] + eq.R_star >= 0.1 * eq.R_star)


def test_fd_oracle_tracks_galerkin(eq):
    b = ModalBasis.build(32, eq)
    z0 = scaled_initial(1e-4, {"eps": 1, "delta": 0.5}, eq, b)
    T = 2 / unit(eq)
    o = SimOptions(output_dt=T / 20)
    g = simulate(z0, T, o, eq=eq, basis=b)
    f = fd_oracle(z0, T, o, eq=eq, basis=b, grid=256)
    assert f.status == "ok"
    err = np.linalg.norm(f.Z[-1] - g.Z[-1]) / np.linalg.norm(g.Z[-1])
    assert err < 3e-3
    assert abs(f.Z[-1, 0] - g.Z[-1, 0]) < 1e-3 * abs(g.Z[-1, 0]) + 1e-10 * eq.rho_star


def test_fd_grid_state_round_trip(eq):
    b = ModalBasis.build(16, eq)
    fd = FDSystem(eq, 256)
    z = make_initial({"eps": 0.01, "delta": 0.01}, eq, b).vector
    z2 = fd.to_modal(fd.from_modal(z, b), b)
    assert np.allclose(z2, z, atol=1e-9 * eq.rho_star)
    assert fd.mass(fd.from_modal(z, b)) == pytest.approx(eq.M, rel=1e-4)


def test_fit_decay_rate_synthetic():
    t = np.linspace(0, 3, 300)
    assert fit_decay_rate(t, 2 * np.exp(-1.7 * t)) == pytest.approx(1.7, rel=1e-12)


def test_linear_rate_matches_leading_root(eq):
    b = ModalBasis.build(64, eq)
    ev = np.linalg.eigvals(assemble_linear(eq, b, "mass"))
    ev = ev[np.abs(ev) > 1e-8 * unit(eq)]
    lead = max(ev.real)
    root = max(z.real for z in find_roots(eq).roots)
    assert lead == pytest.approx(root, rel=1e-6)

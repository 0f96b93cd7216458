import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darksoliton.errors import DomainError, GuardError
from darksoliton.grid import Grid, Pair
from darksoliton.lab.verify import random_smooth_pairs
from darksoliton.linear_ops import (
    DENSE_MAX_N, Gc_form, SolitonOperators, apply_J, apply_S, coercivity_Lambda, energy_gradient,
    essential_edge_Hc, remainder_R, rigidity_functionals, spectrum_Hc, spectrum_Tc, symbol_Hc,
    symbol_min_eigenvalue, symbol_Tinf, tau_c, u_star,
)
from darksoliton.soliton import SolitonParams, d_dc_profile, eval_hydro


@pytest.fixture(scope="module")
def ops1():
    return SolitonOperators(1.0, Grid(40.0, 512))


@pytest.fixture(scope="module")
def small():
    return Grid(40.0, 256)


def gaussian_pair(g, scale=1.0, x0=0.5):
    return Pair(scale * np.exp(-(g.x - x0) ** 2), scale * np.sin(g.x) * np.exp(-g.x ** 2))


# ----------------------------------------------------------------------
# kernel facts


@pytest.mark.parametrize("c,L,N", [(0.5, 30.0, 1024), (1.0, 60.0, 1024), (1.3, 60.0, 1024)])
def test_H_annihilates_translation_mode(c, L, N):
    # slow solitons are steep: c = 0.5 needs the finer spacing
    g = Grid(L, N)
    ops = SolitonOperators(c, g)
    assert g.norm_X(ops.H(ops.kernel_vector())) < 1e-6


@pytest.mark.parametrize("c", [0.7, 1.0, 1.3])
def test_H_maps_speed_derivative_to_momentum_gradient(c, g60):
    ops = SolitonOperators(c, g60)
    assert g60.norm_X(ops.H(ops.d_c()) - ops.P_prime()) < 1e-6


@pytest.mark.parametrize("c", [0.5, 1.0, 1.3])
def test_angle_identity(c, g60):
    p = eval_hydro(SolitonParams(c), g60)
    d = d_dc_profile(SolitonParams(c), g60)
    val = g60.inner_l2(p.pair(), apply_S(d))
    assert val == pytest.approx(-2.0 * math.sqrt(2.0 - c * c), abs=1e-8)


# ----------------------------------------------------------------------
# far-field symbol and essential edges


def test_edge_value_c1():
    assert essential_edge_Hc(1.0) == pytest.approx(1.0 / (3.0 + math.sqrt(5.0)), abs=1e-15)
    assert essential_edge_Hc(1.0) == pytest.approx(0.190983, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.05, 1.4))
def test_symbol_minimum_is_the_edge(c):
    ks = np.linspace(0.0, 3.0, 3001)
    lam = symbol_min_eigenvalue(c, ks)
    assert float(lam.min()) == pytest.approx(essential_edge_Hc(c), abs=1e-12)
    assert int(np.argmin(lam)) == 0  # attained at k = 0


def test_symbol_closed_form_matches_eigvalsh():
    ks = np.linspace(0, 4, 50)
    np.testing.assert_allclose(np.linalg.eigvalsh(symbol_Hc(0.8, ks))[:, 0], symbol_min_eigenvalue(0.8, ks),
                               atol=1e-14)


def test_tau_printed_arithmetic():
    # 46/16 - sqrt(529/16 - 27)/2 at c = 1
    assert tau_c(1.0) == pytest.approx(46 / 16 - 0.5 * math.sqrt(529 / 16 - 27), abs=1e-15)
    assert tau_c(1.0) == pytest.approx(1.643892774775487, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.05, 1.4))
def test_tau_is_symbol_bottom_and_positive(c):
    tau = tau_c(c)
    assert tau > 0
    assert float(np.linalg.eigvalsh(symbol_Tinf(c, 0.0))[0]) == pytest.approx(tau, abs=1e-12)
    # the symbol grows with the frequency
    assert float(np.linalg.eigvalsh(symbol_Tinf(c, 0.5))[0]) > tau


# ----------------------------------------------------------------------
# S and J


def test_S_is_an_involution(small):
    u = gaussian_pair(small)
    np.testing.assert_array_equal(apply_S(apply_S(u)).stack(), u.stack())


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_J_is_skew(seed, small):
    u, w = random_smooth_pairs(small, 2, seed=seed)
    assert abs(small.inner_l2(apply_J(u, small), w) + small.inner_l2(u, apply_J(w, small))) < 1e-12


def test_J_of_profile_vanishes_at_center():
    g = Grid(20.0, 256)
    p = eval_hydro(SolitonParams(1.0), g)
    j = int(np.argmin(np.abs(g.x)))
    Jq = apply_J(p.pair(), g)
    assert abs(Jq.first[j]) < 1e-12 and abs(Jq.second[j]) < 1e-12


# ----------------------------------------------------------------------
# remainder


def test_remainder_of_zero(ops1):
    z = np.zeros(ops1.grid.N)
    r = ops1.remainder(Pair(z, z))
    assert np.max(np.abs(r.stack())) == 0


def test_remainder_second_component(ops1):
    e = gaussian_pair(ops1.grid, 0.05)
    np.testing.assert_allclose(ops1.remainder(e).second, -e.first * e.second, atol=1e-17)


def test_remainder_is_quadratic(ops1):
    g = ops1.grid
    e = gaussian_pair(g)
    ratios = []
    for t in (1e-2, 1e-3):
        r = ops1.remainder(e * t)
        ratios.append(math.sqrt(g.inner_l2(r, r)) / t ** 2)
    assert ratios[0] == pytest.approx(ratios[1], rel=0.1)


def test_remainder_is_the_taylor_remainder_of_the_gradient(ops1):
    g = ops1.grid
    c = ops1.c
    p = ops1.prof
    e = gaussian_pair(g, 0.01)

    def grad(eta, v):
        E = energy_gradient(g, eta, v)
        return Pair(E.first - 0.5 * c * v, E.second - 0.5 * c * eta)

    # the soliton is a critical point of E - cP
    assert np.max(np.abs(grad(p.eta, p.vee).stack())) < 1e-11
    lhs = grad(p.eta + e.first, p.vee + e.second) - grad(p.eta, p.vee) - ops1.H(e)
    assert np.max(np.abs((lhs - ops1.remainder(e)).stack())) < 1e-11


def test_remainder_guard(ops1):
    g = ops1.grid
    e = Pair(0.6 * np.exp(-g.x ** 2), np.zeros(g.N))
    with pytest.raises(GuardError):
        ops1.remainder(e)


def test_functional_wrappers_agree(small):
    e = gaussian_pair(small, 0.01)
    ops = SolitonOperators(1.0, small)
    np.testing.assert_allclose(remainder_R(1.0, e, small).stack(), ops.remainder(e).stack())
    np.testing.assert_allclose(u_star(1.0, e, small).stack(), ops.u_star(e).stack())


# ----------------------------------------------------------------------
# u* = S H_c(eps)


def test_u_star_of_translation_mode(g60):
    ops = SolitonOperators(1.0, g60)
    assert g60.norm_X(ops.u_star(ops.kernel_vector())) < 1e-6


def _constrained(ops, u):
    """L2 projection of u onto the complement of d_xQ and P'(Q)."""
    g = ops.grid
    basis = [ops.kernel_vector(), ops.P_prime()]
    G = np.array([[g.inner_l2(a, b) for b in basis] for a in basis])
    rhs = np.array([g.inner_l2(u, a) for a in basis])
    coef = np.linalg.solve(G, rhs)
    return u - basis[0] * coef[0] - basis[1] * coef[1]


@pytest.mark.parametrize("seed", [4, 5])
def test_u_star_orthogonal_to_S_dcQ(seed, ops1):
    g = ops1.grid
    (u,) = random_smooth_pairs(g, 1, seed=seed)
    eps = _constrained(ops1, u)
    assert abs(g.inner_l2(eps, ops1.P_prime())) < 1e-13
    ustar = ops1.u_star(eps)
    assert abs(g.inner_l2(ustar, apply_S(ops1.d_c()))) < 1e-8


def test_inverse_bound(ops1):
    A = ops1.inverse_bound_constant()
    assert 1.0 < A < 100.0
    g = ops1.grid
    for u in random_smooth_pairs(g, 5, seed=9):
        eps = _constrained(ops1, u)
        assert g.norm_X(eps) <= A * g.norm_X(ops1.u_star(eps)) * (1 + 1e-8)


# ----------------------------------------------------------------------
# self-adjointness and dense assembly


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.sampled_from([0.7, 1.0, 1.3]))
def test_H_is_self_adjoint(seed, c):
    g = Grid(40.0, 256)
    ops = SolitonOperators(c, g)
    u, w = random_smooth_pairs(g, 2, seed=seed)
    gap = abs(g.inner_l2(ops.H(u), w) - g.inner_l2(u, ops.H(w)))
    assert gap <= 1e-10 * math.sqrt(g.inner_l2(u, u) * g.inner_l2(w, w))


def test_dense_matrices_symmetric_and_consistent(small):
    ops = SolitonOperators(1.0, small)
    H = ops.H_matrix()
    T = ops.T_matrix()
    assert np.max(np.abs(H - H.T)) <= 1e-12
    assert np.max(np.abs(T - T.T)) <= 1e-12
    (u,) = random_smooth_pairs(small, 1, seed=3)
    # matrix and matrix-free forms agree on well-resolved fields
    np.testing.assert_allclose(H @ u.stack(), ops.H(u).stack(), atol=1e-8)


def test_dense_assembly_size_cap():
    ops = SolitonOperators(1.0, Grid(100.0, 2 * DENSE_MAX_N))
    with pytest.raises(DomainError):
        ops.H_matrix()


# ----------------------------------------------------------------------
# spectrum and coercivity


def test_spectrum_c1(ops1):
    rep = ops1.spectrum_H()
    assert rep.count_negative == 1
    assert rep.kernel_residual < 1e-4
    assert rep.essential_edge == pytest.approx(0.190983, abs=1e-6)
    assert rep.extras["negative_eigenvalue"] == pytest.approx(-0.2603, abs=1e-4)
    d = rep.to_dict(5)
    assert len(d["lowest_eigenvalues"]) == 5


def test_sub_edge_count_stable_under_refinement():
    counts = []
    for N in (256, 512):
        rep = spectrum_Hc(1.0, Grid(40.0, N))
        w = rep.eigenvalues
        counts.append(int(np.sum(w < rep.essential_edge - 1e-3)))
        # box continuum sits at or above the edge
        above_bound = w[4:]
        assert np.all(above_bound >= rep.essential_edge - 1e-3)
    assert counts == [4, 4]


@pytest.mark.parametrize("c", [0.7, 1.0, 1.3])
def test_constrained_coercivity_positive(c):
    g = Grid(40.0, 256) if c < 1.3 else Grid(60.0, 384)
    assert coercivity_Lambda(c, g) > 0


def test_unconstrained_form_is_indefinite(ops1):
    lam, _ = ops1.coercivity(constrained=False)
    assert lam < 0


def test_coercivity_continuity(small):
    l0 = SolitonOperators(1.0, small).coercivity()[0]
    l1 = SolitonOperators(1.01, small).coercivity()[0]
    assert abs(l1 - l0) < 0.1 * l0


def test_spectrum_wrapper_reports_coercivity(small):
    rep = spectrum_Hc(1.0, small, with_coercivity=True)
    assert rep.coercivity is not None and rep.coercivity > 0


# ----------------------------------------------------------------------
# G_c and T_c


@pytest.mark.parametrize("c", [0.7, 1.0])
def test_G_forms_agree(c, g60):
    ops = SolitonOperators(c, g60)
    for u in random_smooth_pairs(g60, 5, seed=11):
        gb, ge = ops.G_bilinear(u), ops.G_explicit(u)
        assert ge >= 0
        assert abs(gb - ge) <= 1e-10 * (1 + abs(ge))


def test_G_kernel_is_the_profile(g60):
    ops = SolitonOperators(1.0, g60)
    gb, ge = Gc_form(1.0, ops.prof.pair(), g60)
    assert abs(gb) <= 1e-8 and abs(ge) <= 1e-8


def test_T_quadratic_form_reproduces_G(g60):
    ops = SolitonOperators(1.0, g60)
    (u,) = random_smooth_pairs(g60, 1, seed=21)
    w = ops.w_of_u(u)
    assert g60.inner_l2(ops.T(w), w) == pytest.approx(ops.G_explicit(u), rel=1e-8)


def test_T_spectrum_c1():
    rep = spectrum_Tc(1.0, Grid(40.0, 512))
    assert rep.kernel_residual < 1e-5
    assert rep.count_negative == 0
    assert rep.extras["zero_mode_isolation"] > 100.0
    assert rep.essential_edge == pytest.approx(tau_c(1.0))


# ----------------------------------------------------------------------
# rigidity functionals


def test_rigidity_of_zero(small):
    z = np.zeros(small.N)
    assert rigidity_functionals(1.0, Pair(z, z), small) == (0.0, 0.0, 0.0)


def test_rigidity_I_vanishes_on_even_pairs(small):
    env = np.exp(-small.x ** 2)
    I, _, _ = rigidity_functionals(1.0, Pair(env, env * np.cos(small.x)), small)
    assert abs(I) < 1e-15


def test_rigidity_stable_under_refinement():
    vals = []
    for N in (256, 512):
        g = Grid(40.0, N)
        ops = SolitonOperators(1.0, g)
        eps = _constrained(ops, gaussian_pair(g, 0.01, x0=0.7))
        vals.append(np.array(ops.rigidity_functionals(ops.u_star(eps), kappa=1.0)))
    assert np.all(np.isfinite(vals[0]))
    np.testing.assert_allclose(vals[1], vals[0], rtol=1e-6)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from darksoliton.errors import DomainError
from darksoliton.grid import Grid
from darksoliton.hydro import energy, momentum
from darksoliton.soliton import (
    SQRT2, SolitonParams, conserved_closed, d_dc_profile, default_half_length, energy_closed,
    eval_hydro, eval_wave, eval_wave_dx, momentum_closed, profile_at, profile_residual,
)

speeds = st.floats(min_value=0.05, max_value=1.4).map(lambda c: c)
signed_speeds = st.one_of(speeds, speeds.map(lambda c: -c))


@pytest.mark.parametrize("c", [0.0, SQRT2, -SQRT2, 1.5, float("nan"), float("inf")])
def test_rejects_inadmissible_speed(c):
    with pytest.raises(DomainError):
        SolitonParams(c)


def test_rejects_nonfinite_center():
    with pytest.raises(DomainError):
        SolitonParams(1.0, float("inf"))


def test_frozen_values_at_c1():
    p = profile_at(1.0, np.array([0.0, 2.0]))
    # at c = 1 the peak is eta = 1/2 and v = 1/2
    assert p.eta[0] == pytest.approx(0.5, abs=1e-15)
    assert p.vee[0] == pytest.approx(0.5, abs=1e-15)
    # eta(2) = 1/(2 cosh^2 1), v(2) = eta/(2(1 - eta))
    assert p.eta[1] == pytest.approx(0.5 / math.cosh(1.0) ** 2, rel=1e-14)
    assert p.eta[1] == pytest.approx(0.20998717, abs=1e-8)
    assert p.vee[1] == pytest.approx(0.13290111, abs=1e-8)


def test_wave_form_values():
    p = SolitonParams(1.0)
    assert eval_wave(p, 0.0) == pytest.approx(1j / SQRT2, abs=1e-15)
    # the x -> +inf limit of U_1 is (1 + i)/sqrt 2
    assert eval_wave(p, 60.0) == pytest.approx((1 + 1j) / SQRT2, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(c=signed_speeds, x=st.floats(-30, 30))
def test_modulus_matches_eta(c, x):
    p = SolitonParams(c)
    u = eval_wave(p, x)
    eta = profile_at(c, np.array([x])).eta[0]
    assert abs(abs(u) ** 2 + eta - 1.0) < 1e-13


def test_speed_of_sound_limit_is_vacuum():
    p = profile_at(SQRT2 - 1e-9, np.linspace(-5, 5, 11))
    assert np.max(p.eta) < 1e-8
    assert np.max(np.abs(p.vee)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(c=signed_speeds)
def test_parity(c):
    y = np.linspace(-8, 8, 161)
    p = profile_at(c, y)
    np.testing.assert_allclose(p.eta, p.eta[::-1], atol=1e-15)
    np.testing.assert_allclose(p.vee, p.vee[::-1], atol=1e-15)
    np.testing.assert_allclose(p.d_eta, -p.d_eta[::-1], atol=1e-15)
    assert np.all(p.eta > 0) and np.all(p.eta < 1)


@settings(max_examples=30, deadline=None)
@given(c=signed_speeds)
def test_pointwise_invariants(c):
    y = np.linspace(-15, 15, 301)
    p = profile_at(c, y)
    s = 2.0 - c * c
    # first integral and the second-order profile equation
    assert np.max(np.abs(p.d_eta ** 2 - s * p.eta ** 2 + 2 * p.eta ** 3)) < 1e-14
    assert np.max(np.abs(p.d2_eta - s * p.eta + 3 * p.eta ** 2)) < 1e-14
    assert np.max(np.abs(p.mu - p.eta * (3 - c * c - 3 * p.eta))) < 1e-15
    assert np.max(p.eta) == pytest.approx(s / 2.0, rel=1e-12)


def test_peak_curvature_c1():
    p = profile_at(1.0, np.array([0.0]))
    assert p.d2_eta[0] == pytest.approx(0.5 - 0.75, abs=1e-15)


@pytest.mark.parametrize("c", [0.3, 1.0, 1.3])
def test_exponential_decay(c):
    kap = math.sqrt(2 - c * c) / 2
    y = np.array([40.0, 45.0])
    p = profile_at(c, y)
    rate = math.log(p.eta[0] / p.eta[1]) / 5.0
    assert rate == pytest.approx(2 * kap, rel=1e-6)


def test_wave_derivative_matches_finite_difference():
    p = SolitonParams(0.8, 1.5)
    x = np.linspace(-4, 6, 21)
    h = 1e-5
    fd = (eval_wave(p, x + h) - eval_wave(p, x - h)) / (2 * h)
    np.testing.assert_allclose(eval_wave_dx(p, x), fd, atol=1e-9)


@pytest.mark.parametrize("c", [0.5, 1.0, 1.3])
def test_d_dc_matches_finite_difference(c):
    g = Grid(30.0, 512)
    h = 1e-4
    fd_eta = (eval_hydro(SolitonParams(c + h), g).eta - eval_hydro(SolitonParams(c - h), g).eta) / (2 * h)
    fd_v = (eval_hydro(SolitonParams(c + h), g).vee - eval_hydro(SolitonParams(c - h), g).vee) / (2 * h)
    d = d_dc_profile(SolitonParams(c), g)
    # central differences with h = 1e-4 are good to about h^2 relative to the field size
    assert np.max(np.abs(d.first - fd_eta)) < 1e-7 * max(1.0, np.max(np.abs(d.first)))
    assert np.max(np.abs(d.second - fd_v)) < 1e-7 * max(1.0, np.max(np.abs(d.second)))


def test_d_dc_at_center_c1():
    g = Grid(10.0, 64)
    d = d_dc_profile(SolitonParams(1.0), g)
    j = int(np.argmin(np.abs(g.x)))
    assert d.first[j] == pytest.approx(-1.0, abs=1e-14)


def test_closed_forms_c1():
    E, P, dP = conserved_closed(1.0)
    assert E == pytest.approx(1.0 / 3.0, abs=1e-16)
    assert P == pytest.approx(0.2853981633974483, abs=1e-15)
    assert dP == -1.0


@pytest.mark.parametrize("c", [0.3, 0.7, 1.0, 1.3])
def test_momentum_closed_form_against_quadrature(c):
    val, _ = quad(lambda s: math.sqrt(2 - s * s), c, SQRT2, epsabs=1e-14)
    assert momentum_closed(c) == pytest.approx(val, abs=1e-12)
    assert momentum_closed(-c) == pytest.approx(-val, abs=1e-12)


@pytest.mark.parametrize("c", [0.5, 1.0, 1.3])
def test_conserved_quantities_by_quadrature(c, g60):
    p = eval_hydro(SolitonParams(c), g60)
    assert energy(g60, p.eta, p.vee) == pytest.approx(energy_closed(c), abs=1e-10)
    assert momentum(g60, p.eta, p.vee) == pytest.approx(momentum_closed(c), abs=1e-10)


@pytest.mark.parametrize("c", [0.4, 1.0, 1.2])
def test_momentum_slope_by_quadrature(c, g60):
    h = 1e-4
    Pp = momentum(g60, *eval_hydro(SolitonParams(c + h), g60).pair())
    Pm = momentum(g60, *eval_hydro(SolitonParams(c - h), g60).pair())
    assert (Pp - Pm) / (2 * h) == pytest.approx(-math.sqrt(2 - c * c), abs=1e-6)


@pytest.mark.parametrize("c", [0.5, 1.0, 1.3])
def test_profile_residuals(c, g60):
    r = profile_residual(SolitonParams(c), g60)
    assert r.max() < 1e-8
    assert r.boundary_value < 1e-12


def test_slow_soliton_needs_the_default_box():
    c = 0.3
    L = default_half_length(c)
    assert L == 60.0
    assert default_half_length(1.4) == pytest.approx(60 / math.sqrt(2 - 1.96))
    r = profile_residual(SolitonParams(c), Grid(120.0, 4096))
    assert r.max() < 1e-8


def test_residual_flags_coarse_grid():
    r = profile_residual(SolitonParams(1.0), Grid(60.0, 64))
    assert r.under_resolved


def test_centered_profile_wraps():
    g = Grid(20.0, 256)
    p = eval_hydro(SolitonParams(1.0, 19.0), g)
    j = int(np.argmax(p.eta))
    assert g.x[j] == pytest.approx(19.0, abs=g.dx)
    # the tail crosses the seam instead of being cut off
    assert p.eta[0] > p.eta[g.N // 2]

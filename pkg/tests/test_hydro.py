import math

import numpy as np
import pytest

from darksoliton.errors import DomainError, GuardError, LiftingError
from darksoliton.grid import Grid, Pair
from darksoliton.hydro import (
    HydroState, WaveState, conserved, default_dt, gp_integrate, hgp_rhs, hgp_rhs_fields, integrate,
    linear_frequency, madelung_to_wave, periodic_wave, phase_mismatch, soliton_state, sponge_profile,
    wave_to_madelung,
)
from darksoliton.soliton import SolitonParams, eval_hydro, eval_wave


@pytest.fixture(scope="module")
def g30():
    return Grid(30.0, 256)


@pytest.mark.parametrize("c", [1.0, -1.2, 1.3])
def test_rhs_of_travelling_wave_is_pure_transport(c, g60):
    s = soliton_state(c, 1.0, g60)
    de, dv = hgp_rhs(s)
    # d_t Q(x - c t) = -c d_x Q
    assert np.max(np.abs(de + c * g60.derivative(s.eta, 1))) < 1e-9
    assert np.max(np.abs(dv + c * g60.derivative(s.vee, 1))) < 1e-9


def test_slow_soliton_rhs_converges_under_refinement():
    # 1/(1 - eta) has complex poles close to the real axis at c = 0.5
    errs = []
    for N in (1024, 2048, 4096):
        g = Grid(60.0, N)
        s = soliton_state(0.5, 1.0, g)
        de, dv = hgp_rhs(s)
        errs.append(max(np.max(np.abs(de + 0.5 * g.derivative(s.eta, 1))),
                        np.max(np.abs(dv + 0.5 * g.derivative(s.vee, 1)))))
    assert errs[0] > 1e3 * errs[1] > 1e6 * errs[2]
    assert errs[2] < 1e-9


def test_rhs_vanishes_on_vacuum(g30):
    z = np.zeros(g30.N)
    de, dv = hgp_rhs_fields(g30, z, z)
    assert np.all(de == 0) and np.all(dv == 0)


def test_rhs_in_moving_frame_cancels_soliton_speed(g60):
    s = soliton_state(1.0, 0.0, g60)
    de, dv = hgp_rhs_fields(g60, s.eta, s.vee, frame_speed=1.0)
    assert max(np.max(np.abs(de)), np.max(np.abs(dv))) < 1e-9


def test_linear_frequency_values():
    assert linear_frequency(0.0) == 0.0
    assert linear_frequency(1.0) == pytest.approx(math.sqrt(3.0))
    k = np.linspace(0, 5, 11)
    np.testing.assert_allclose(linear_frequency(k) ** 2, 2 * k ** 2 + k ** 4)


@pytest.mark.parametrize("mode", [1, 3, 8])
def test_small_waves_follow_the_dispersion_relation(mode, g30):
    k = mode * math.pi / g30.L
    delta = 1e-8
    s0 = HydroState(g30, delta * np.cos(k * g30.x), np.zeros(g30.N))
    T = 1.0
    traj = integrate(s0, T, cadence=T)
    expected = delta * np.cos(k * g30.x) * math.cos(linear_frequency(k) * T)
    assert np.max(np.abs(traj.eta[-1] - expected)) < 1e-6 * delta


def test_zero_horizon_returns_initial_state(g30):
    s0 = soliton_state(1.0, 0.0, g30)
    traj = integrate(s0, 0.0)
    assert len(traj) == 1 and traj.times[0] == 0.0
    np.testing.assert_array_equal(traj.eta[0], s0.eta)


def test_output_times_include_the_horizon(g30):
    traj = integrate(soliton_state(1.0, 0.0, g30), 0.25, cadence=0.1)
    np.testing.assert_allclose(traj.times, [0.0, 0.1, 0.2, 0.25], atol=1e-14)


@pytest.mark.parametrize("bad", [dict(T=-1.0), dict(T=1.0, cadence=0.0), dict(T=1.0, dt=-0.1)])
def test_integrate_rejects_bad_arguments(bad, g30):
    with pytest.raises(DomainError):
        integrate(soliton_state(1.0, 0.0, g30), **bad)


def test_default_dt_inside_rk4_stability(g60):
    assert default_dt(g60) * float(linear_frequency(g60.k_max)) <= 2.8


@pytest.mark.parametrize("c,a", [(1.0, 2.0), (1.2, -3.0)])
def test_short_exact_transport(c, a, g60):
    T = 2.0
    traj = integrate(soliton_state(c, a, g60), T)
    ref = eval_hydro(SolitonParams(c, a + c * T), g60)
    assert g60.norm_X(Pair(traj.eta[-1] - ref.eta, traj.vee[-1] - ref.vee)) < 1e-8


def test_integrating_factor_stepper_agrees(g60):
    s0 = soliton_state(1.0, 0.0, g60)
    a = integrate(s0, 1.0, cadence=1.0)
    b = integrate(s0, 1.0, cadence=1.0, integrating_factor=True)
    assert np.max(np.abs(a.eta[-1] - b.eta[-1])) < 1e-8


def _perturbed(g, amp=0.02):
    s = soliton_state(1.0, 0.0, g)
    bump = np.exp(-((g.x - 1.0) / 2.0) ** 2)
    return HydroState(g, s.eta + amp * bump, s.vee - 0.5 * amp * bump)


def test_time_reversal(g60):
    s0 = _perturbed(g60)
    fwd = integrate(s0, 2.0, cadence=2.0)
    back = integrate(HydroState(g60, fwd.eta[-1], -fwd.vee[-1]), 2.0, cadence=2.0)
    assert np.max(np.abs(back.eta[-1] - s0.eta)) < 1e-7
    assert np.max(np.abs(-back.vee[-1] - s0.vee)) < 1e-7


def test_conservation_on_perturbed_run(g60):
    traj = integrate(_perturbed(g60), 3.0)
    assert traj.ok
    assert traj.drift_E.max() < 1e-9
    assert traj.drift_P.max() < 1e-9
    summ = traj.summary()
    assert summ["guard_events"] == []


def test_conserved_rejects_guard_violation(g30):
    s = HydroState(g30, np.full(g30.N, 0.9995), np.zeros(g30.N))
    with pytest.raises(GuardError):
        conserved(s)


def test_guard_stops_run_and_keeps_samples(g30):
    x = g30.x
    bump = np.exp(-x ** 2)
    # converging flow piles up density deficit at the origin
    s0 = HydroState(g30, 0.9 * bump, -6.0 * x * bump)
    traj = integrate(s0, 5.0, cadence=0.01, sigma_guard=1e-2)
    assert not traj.ok
    assert traj.error["kind"] == "guard"
    assert traj.error["max_eta"] >= 0.99
    assert len(traj) >= 1 and traj.times[-1] < 5.0


def test_head_truncates_every_series(g30):
    traj = integrate(soliton_state(1.0, 0.0, g30), 0.5)
    h = traj.head(3)
    assert len(h) == 3 and h.E.shape == (3,) and h.eta.shape == (3, g30.N)


def test_sponge_profile_shape(g60):
    sp = sponge_profile(g60, start=0.8, strength=2.0)
    assert np.all(sp[np.abs(g60.x) < 0.8 * g60.L] == 0)
    assert sp.max() == pytest.approx(2.0, rel=1e-3)
    assert np.all(sp >= 0)


# ----------------------------------------------------------------------
# Madelung maps


def test_phase_mismatch():
    assert phase_mismatch(2 * math.pi) == pytest.approx(0.0, abs=1e-15)
    assert phase_mismatch(1.0) == pytest.approx(1.0)
    assert phase_mismatch(-2 * math.pi - 0.5) == pytest.approx(0.5)


def test_constant_wave_is_vacuum(g30):
    h = wave_to_madelung(WaveState(g30, np.ones(g30.N, dtype=complex)))
    assert np.max(np.abs(h.eta)) == 0 and np.max(np.abs(h.vee)) < 1e-15


@pytest.mark.parametrize("c", [0.6, 1.0, 1.3])
def test_madelung_round_trip(c, g60):
    s = soliton_state(c, 2.0, g60)
    w = madelung_to_wave(s, phase0=0.3)
    back = wave_to_madelung(w)
    assert np.max(np.abs(back.eta - s.eta)) < 1e-13
    # the phase antiderivative drops the Nyquist mode of v, so compare without it
    vh = np.fft.rfft(s.vee)
    vh[-1] = 0.0
    assert np.max(np.abs(back.vee - np.fft.irfft(vh, n=g60.N))) < 1e-12


def test_madelung_wave_matches_closed_form(g60):
    s = soliton_state(1.0, 0.0, g60)
    p = SolitonParams(1.0)
    u = eval_wave(p, g60.x)
    w = madelung_to_wave(s, phase0=float(np.angle(u[0])))
    inner = np.abs(g60.x) < 30
    assert np.max(np.abs(w.psi[inner] - u[inner])) < 1e-10


def test_lifting_errors(g30):
    with pytest.raises(LiftingError):
        madelung_to_wave(HydroState(g30, np.ones(g30.N), np.zeros(g30.N)))
    psi = np.ones(g30.N, dtype=complex)
    psi[10] = 0.0
    with pytest.raises(LiftingError):
        wave_to_madelung(WaveState(g30, psi))


def test_periodic_wave_closes_the_phase(g60):
    w = periodic_wave(soliton_state(1.0, 0.0, g60))
    assert w.meta["wrap_mismatch"] < 1e-10
    assert w.meta["image_speed"] is not None
    back = wave_to_madelung(w)
    inner = np.abs(g60.x) < 0.5 * g60.L
    s = soliton_state(1.0, 0.0, g60)
    assert np.max(np.abs(back.eta - s.eta)[inner]) < 1e-12


# ----------------------------------------------------------------------
# wave-form solver


def _aligned_error(g, psi, c, a):
    u = eval_wave(SolitonParams(c, a), g.x)
    inner = np.abs(g.x) <= 0.5 * g.L
    z = np.vdot(u[inner], psi[inner])
    return float(np.max(np.abs(psi[inner] * np.exp(-1j * np.angle(z)) - u[inner])))


def test_gp_solver_carries_the_exact_soliton(g60):
    c, T = 1.0, 5.0
    w0 = periodic_wave(soliton_state(c, 0.0, g60))
    wt = gp_integrate(w0, T, cadence=T)
    assert _aligned_error(g60, wt.psi[-1], c, c * T) < 1e-5
    assert wt.energy_drift < 1e-8
    assert wt.warnings == []


def test_gp_solver_second_order_in_dt():
    g = Grid(30.0, 256)
    w0 = periodic_wave(soliton_state(0.8, 0.0, g))
    runs = {dt: gp_integrate(w0, 1.0, dt=dt, cadence=1.0).psi[-1] for dt in (4e-3, 2e-3, 2.5e-4)}
    e1 = np.max(np.abs(runs[4e-3] - runs[2.5e-4]))
    e2 = np.max(np.abs(runs[2e-3] - runs[2.5e-4]))
    assert 3.5 < e1 / e2 < 5.0


def test_gp_rejects_bad_arguments(g30):
    w0 = periodic_wave(soliton_state(1.0, 0.0, g30))
    with pytest.raises(DomainError):
        gp_integrate(w0, -1.0)
    with pytest.raises(DomainError):
        gp_integrate(w0, 1.0, dt=0.0)

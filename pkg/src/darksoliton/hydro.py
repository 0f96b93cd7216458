"""Time integration in hydrodynamical variables and in wave form.

The hydrodynamical system for (eta, v) = (1 - |psi|^2, -d_x arg psi) reads

    eta_t = d_x(2 eta v - 2 v)
    v_t   = d_x(v^2 - eta + d_x(eta_x / (2(1 - eta))) - eta_x^2 / (4(1 - eta)^2))

and is solved with a Fourier pseudospectral discretization and classical RK4.
The wave-form solver (Strang splitting for i psi_t + psi_xx + psi(1 - |psi|^2) = 0)
exists to cross-validate it.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, GuardError, IntegrationError, LiftingError
from .grid import Grid
from .soliton import SQRT2, SolitonParams, eval_hydro

log = logging.getLogger(__name__)

SIGMA_GUARD = 1e-3
DEFAULT_CADENCE = 0.1


@dataclass
class HydroState:
    grid: Grid
    eta: np.ndarray
    vee: np.ndarray
    t: float = 0.0

    def copy(self) -> HydroState:
        return HydroState(self.grid, self.eta.copy(), self.vee.copy(), self.t)


@dataclass
class WaveState:
    grid: Grid
    psi: np.ndarray
    t: float = 0.0
    meta: dict = field(default_factory=dict)


@dataclass
class Conserved:
    E: float
    P: float


def soliton_state(c: float, a: float, g: Grid) -> HydroState:
    prof = eval_hydro(SolitonParams(c, a), g)
    return HydroState(g, prof.eta.copy(), prof.vee.copy(), 0.0)


def check_guard(eta: np.ndarray, sigma_guard: float = SIGMA_GUARD, t=None) -> None:
    m = float(np.max(eta))
    if not np.isfinite(m):
        raise IntegrationError("non-finite values in eta", t=t)
    if m >= 1.0 - sigma_guard:
        raise GuardError(f"max eta = {m:.6g} reached 1 - sigma_guard", max_eta=m, t=t)


# ----------------------------------------------------------------------
# right-hand side


def hgp_rhs_fields(g: Grid, eta, vee, dealias: bool = True, frame_speed: float = 0.0,
                   damping=None):
    """Spectral right-hand side of the hydrodynamical system.

    ``frame_speed`` V evaluates the system in the frame x - V t and
    ``damping`` (a non-negative field) adds -damping * (eta, v).
    """
    ik = g._multiplier(1)
    mask = g.dealias_mask if dealias else 1.0
    n = g.N
    eh = sfft.rfft(eta)
    vh = sfft.rfft(vee)
    d_eta = sfft.irfft(ik * eh, n=n)
    q = 1.0 / (1.0 - eta)
    flux_eta = 2.0 * mask * sfft.rfft(eta * vee) - 2.0 * vh
    pot = mask * (sfft.rfft(vee * vee) - 0.25 * sfft.rfft((d_eta * q) ** 2)) - eh
    cap = mask * sfft.rfft(0.5 * d_eta * q)
    rhs_eh = ik * flux_eta
    rhs_vh = ik * pot + g._multiplier(2) * cap
    if frame_speed:
        rhs_eh = rhs_eh + frame_speed * ik * eh
        rhs_vh = rhs_vh + frame_speed * ik * vh
    r_eta = sfft.irfft(rhs_eh, n=n)
    r_v = sfft.irfft(rhs_vh, n=n)
    if damping is not None:
        r_eta -= damping * eta
        r_v -= damping * vee
    return r_eta, r_v


def hgp_rhs(s: HydroState, sigma_guard: float = SIGMA_GUARD, dealias: bool = True):
    """(d_t eta, d_t v) for the state, after checking the eta < 1 guard."""
    check_guard(s.eta, sigma_guard, s.t)
    return hgp_rhs_fields(s.grid, s.eta, s.vee, dealias=dealias)


def linear_frequency(k) -> np.ndarray:
    """omega(k) = sqrt(2 k^2 + k^4) of small waves around the constant state."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(2.0 * k ** 2 + k ** 4)


def default_dt(g: Grid) -> float:
    """0.5 * 2.8 / omega_max, inside the RK4 stability interval on the imaginary axis."""
    return 0.5 * 2.8 / float(linear_frequency(g.k_max))


# ----------------------------------------------------------------------
# conserved quantities


def energy(g: Grid, eta, vee) -> float:
    d_eta = g.derivative(eta, 1)
    dens = d_eta ** 2 / (8.0 * (1.0 - eta)) + 0.5 * (1.0 - eta) * vee ** 2 + 0.25 * eta ** 2
    return g.integrate(dens)


def momentum(g: Grid, eta, vee) -> float:
    return 0.5 * g.integrate(eta * vee)


def conserved(s: HydroState, sigma_guard: float = SIGMA_GUARD) -> Conserved:
    check_guard(s.eta, sigma_guard, s.t)
    return Conserved(energy(s.grid, s.eta, s.vee), momentum(s.grid, s.eta, s.vee))


# ----------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Output samples of a hydrodynamical run.

    States are stored in the computational frame; with ``frame_speed`` V a
    lab position x corresponds to the frame position x - V t.
    """

    grid: Grid
    times: np.ndarray
    eta: np.ndarray
    vee: np.ndarray
    E: np.ndarray
    P: np.ndarray
    dt: float
    frame_speed: float = 0.0
    error: dict | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> HydroState:
        return HydroState(self.grid, self.eta[i], self.vee[i], float(self.times[i]))

    @property
    def states(self) -> list[HydroState]:
        return [self.state(i) for i in range(len(self))]

    @property
    def drift_E(self) -> np.ndarray:
        return np.abs(self.E - self.E[0]) / max(abs(self.E[0]), 1e-300)

    @property
    def drift_P(self) -> np.ndarray:
        return np.abs(self.P - self.P[0]) / max(abs(self.P[0]), 1e-300)

    @property
    def ok(self) -> bool:
        return self.error is None

    def head(self, n: int) -> Trajectory:
        """The first ``n`` samples."""
        return dataclasses.replace(self, times=self.times[:n], eta=self.eta[:n], vee=self.vee[:n],
                                   E=self.E[:n], P=self.P[:n])

    def summary(self) -> dict:
        return {
            "E0": float(self.E[0]),
            "P0": float(self.P[0]),
            "max_drift_E": float(self.drift_E.max()),
            "max_drift_P": float(self.drift_P.max()),
            "guard_events": [] if self.error is None else [self.error],
        }


def sponge_profile(g: Grid, start: float = 0.8, strength: float = 1.0) -> np.ndarray:
    """Smooth damping rate vanishing for |x| < start*L and rising to ``strength`` at the edge."""
    s = np.clip((np.abs(g.x) - start * g.L) / ((1.0 - start) * g.L), 0.0, 1.0)
    return strength * np.sin(0.5 * np.pi * s) ** 2


def _output_times(T: float, cadence: float) -> np.ndarray:
    n = int(math.floor(T / cadence + 1e-9))
    ts = cadence * np.arange(n + 1)
    if T - ts[-1] > 1e-9 * max(1.0, T):
        ts = np.append(ts, T)
    return ts


def integrate(s0: HydroState, T: float, dt: float | None = None, cadence: float = DEFAULT_CADENCE,
              sigma_guard: float = SIGMA_GUARD, dealias: bool = True,
              integrating_factor: bool = False, frame_speed: float = 0.0,
              sponge: np.ndarray | None = None) -> Trajectory:
    """Evolve ``s0`` up to time ``T`` with RK4, sampling every ``cadence``.

    Each output interval is split into equal steps no larger than ``dt``
    (the dispersion-limited default when omitted).  A guard violation or a
    non-finite value ends the run early: the samples produced so far are
    returned with ``error`` filled in.
    """
    if T < 0:
        raise DomainError("horizon must be non-negative")
    if cadence <= 0:
        raise DomainError("output cadence must be positive")
    g = s0.grid
    check_guard(s0.eta, sigma_guard, s0.t)
    dt_max = default_dt(g) if dt is None else float(dt)
    if dt_max <= 0:
        raise DomainError("time step must be positive")

    eta = np.array(s0.eta, dtype=float)
    vee = np.array(s0.vee, dtype=float)
    out_t = _output_times(T, cadence) if T > 0 else np.array([0.0])
    etas, vees, Es, Ps, ts = [eta.copy()], [vee.copy()], [energy(g, eta, vee)], [momentum(g, eta, vee)], [s0.t]

    def rhs(e, v):
        return hgp_rhs_fields(g, e, v, dealias=dealias, frame_speed=frame_speed, damping=sponge)

    stepper = _if_rk4_step if integrating_factor else _rk4_step
    error = None
    step = 0
    dt_used = dt_max
    for i in range(1, len(out_t)):
        span = out_t[i] - out_t[i - 1]
        nsub = max(1, int(math.ceil(span / dt_max - 1e-12)))
        h = span / nsub
        dt_used = min(dt_used, h) if i > 1 else h
        try:
            for _ in range(nsub):
                eta, vee = stepper(g, rhs, eta, vee, h, frame_speed)
                step += 1
                if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(vee))):
                    raise IntegrationError("non-finite value", step=step, t=s0.t + out_t[i - 1])
                check_guard(eta, sigma_guard, t=s0.t + out_t[i - 1])
        except GuardError as exc:
            error = {"kind": "guard", "message": str(exc), "step": step, "t": exc.t, "max_eta": exc.max_eta}
        except IntegrationError as exc:
            error = {"kind": "nan", "message": str(exc), "step": step, "t": exc.t}
        if error is not None:
            log.warning("integration stopped: %s", error["message"])
            break
        etas.append(eta.copy())
        vees.append(vee.copy())
        Es.append(energy(g, eta, vee))
        Ps.append(momentum(g, eta, vee))
        ts.append(s0.t + out_t[i])

    return Trajectory(
        grid=g, times=np.array(ts), eta=np.array(etas), vee=np.array(vees),
        E=np.array(Es), P=np.array(Ps), dt=dt_used, frame_speed=frame_speed, error=error,
        meta={"steps": step, "integrating_factor": integrating_factor, "dealias": dealias,
              "sponge": sponge is not None},
    )


def _rk4_step(g, rhs, eta, vee, h, frame_speed):
    k1e, k1v = rhs(eta, vee)
    k2e, k2v = rhs(eta + 0.5 * h * k1e, vee + 0.5 * h * k1v)
    k3e, k3v = rhs(eta + 0.5 * h * k2e, vee + 0.5 * h * k2v)
    k4e, k4v = rhs(eta + h * k3e, vee + h * k3v)
    return (eta + (h / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e),
            vee + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))


def _linear_propagator(g: Grid, tau: float, frame_speed: float):
    """Fourier blocks of exp(tau A) for eta_t = -2 v_x, v_t = -eta_x + eta_xxx/2 (+ frame drift)."""
    key = ("prop", tau, frame_speed)
    if key not in g._cache:
        k = g.k.copy()
        k[-1] = 0.0  # odd derivatives vanish on the Nyquist mode
        w = linear_frequency(k)
        cw = np.cos(w * tau)
        sw = np.where(w > 0, np.sin(w * tau) / np.where(w > 0, w, 1.0), tau)
        a12 = -2j * k
        a21 = -1j * k * (1.0 + 0.5 * k ** 2)
        drift = np.exp(1j * k * frame_speed * tau)
        g._cache[key] = (drift * cw, drift * sw * a12, drift * sw * a21)
    return g._cache[key]


def _if_rk4_step(g, rhs, eta, vee, h, frame_speed):
    """Lawson RK4: linear dispersion integrated exactly in Fourier space."""
    n = g.N
    k = g.k.copy()
    k[-1] = 0.0
    a12 = -2j * k
    a21 = -1j * k * (1.0 + 0.5 * k ** 2)
    drift = 1j * k * frame_speed

    def nonlinear(eh, vh):
        e = sfft.irfft(eh, n=n)
        v = sfft.irfft(vh, n=n)
        re, rv = rhs(e, v)
        return (sfft.rfft(re) - a12 * vh - drift * eh, sfft.rfft(rv) - a21 * eh - drift * vh)

    c, b12, b21 = _linear_propagator(g, 0.5 * h, frame_speed)

    def half(eh, vh):
        return c * eh + b12 * vh, b21 * eh + c * vh

    eh, vh = sfft.rfft(eta), sfft.rfft(vee)
    n1e, n1v = nonlinear(eh, vh)
    u2 = half(eh + 0.5 * h * n1e, vh + 0.5 * h * n1v)
    n2e, n2v = nonlinear(*u2)
    ehh, vhh = half(eh, vh)
    n3e, n3v = nonlinear(ehh + 0.5 * h * n2e, vhh + 0.5 * h * n2v)
    ef, vf = half(ehh, vhh)
    t3e, t3v = half(n3e, n3v)
    n4e, n4v = nonlinear(ef + h * t3e, vf + h * t3v)
    s1e, s1v = half(*half(n1e, n1v))
    s23e, s23v = half(n2e + n3e, n2v + n3v)
    new_e = ef + (h / 6.0) * (s1e + 2.0 * s23e + n4e)
    new_v = vf + (h / 6.0) * (s1v + 2.0 * s23v + n4v)
    return sfft.irfft(new_e, n=n), sfft.irfft(new_v, n=n)


# ----------------------------------------------------------------------
# Madelung maps


def phase_mismatch(total: float) -> float:
    """Distance of a total phase change to the nearest multiple of 2 pi."""
    return abs(total - 2.0 * math.pi * round(total / (2.0 * math.pi)))


def madelung_to_wave(s: HydroState, phase0: float = 0.0) -> WaveState:
    """psi = sqrt(1 - eta) exp(i phi) with phi(-L) = phase0 and phi' = -v.

    The phase of psi winds by -int v across the box, which in general is not
    a multiple of 2 pi; the mismatch is stored in ``meta["wrap_mismatch"]``.
    """
    g = s.grid
    if np.max(s.eta) >= 1.0:
        raise LiftingError("eta reaches 1: the state cannot be lifted")
    phi = phase0 - g.antiderivative(s.vee)
    total = -g.integrate(s.vee)
    psi = np.sqrt(1.0 - s.eta) * np.exp(1j * phi)
    meta = {"wrap_mismatch": phase_mismatch(total), "winding": total, "phase0": phase0}
    return WaveState(g, psi, s.t, meta)


def wave_to_madelung(w: WaveState, sigma_guard: float = SIGMA_GUARD) -> HydroState:
    """Inverse of :func:`madelung_to_wave` (v from the unwrapped phase).

    The phase winding across the box is read from ``w.meta["winding"]`` when
    present (non-periodic lifts) and otherwise from the periodic closure.
    """
    g = w.grid
    rho2 = np.abs(w.psi) ** 2
    if np.min(rho2) <= sigma_guard:
        raise LiftingError(f"|psi|^2 drops to {np.min(rho2):.3g} <= {sigma_guard}")
    phi = np.unwrap(np.angle(w.psi))
    winding = w.meta.get("winding")
    if winding is None:
        # periodic psi: close the last cell with the increment psi_{N-1} -> psi_0
        winding = phi[-1] - phi[0] + np.angle(w.psi[0] * np.conj(w.psi[-1]))
    slope = winding / (2.0 * g.L)
    periodic = phi - slope * (g.x + g.L)
    vee = -(g.derivative(periodic, 1) + slope)
    return HydroState(g, 1.0 - rho2, vee, w.t)


def periodic_wave(s: HydroState, phase0: float = 0.0) -> WaveState:
    """A periodic wave function agreeing with ``s`` away from the seam x = +-L.

    A second dark soliton is placed at the seam, with the speed whose phase
    jump cancels the winding -int v of ``s``; superposition is the product
    of the two wave functions, i.e. 1 - eta = (1 - eta)(1 - eta_img) and
    v = v + v_img.
    """
    g = s.grid
    M = g.integrate(s.vee)
    M_red = M - 2.0 * math.pi * round(M / (2.0 * math.pi))
    eta, vee = s.eta, s.vee
    c_img = None
    if abs(M_red) > 1e-14:
        c_img = -math.copysign(SQRT2 * math.cos(M_red / 2.0), M_red)
        img = eval_hydro(SolitonParams(c_img, g.L), g)
        eta = 1.0 - (1.0 - eta) * (1.0 - img.eta)
        vee = vee + img.vee
    w = madelung_to_wave(HydroState(g, eta, vee, s.t), phase0)
    w.meta["image_speed"] = c_img
    return w


# ----------------------------------------------------------------------
# wave-form solver


def gl_energy(g: Grid, psi: np.ndarray) -> float:
    dpsi = g.derivative_complex(psi, 1)
    return g.integrate(0.5 * np.abs(dpsi) ** 2 + 0.25 * (1.0 - np.abs(psi) ** 2) ** 2)


@dataclass
class WaveTrajectory:
    grid: Grid
    times: np.ndarray
    psi: np.ndarray
    energy: np.ndarray
    dt: float
    warnings: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> WaveState:
        return WaveState(self.grid, self.psi[i], float(self.times[i]))

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])) / max(abs(self.energy[0]), 1e-300))


def gp_integrate(w0: WaveState, T: float, dt: float = 1e-3, cadence: float = DEFAULT_CADENCE,
                 contamination_tol: float = 1e-6) -> WaveTrajectory:
    """Strang splitting for i psi_t + psi_xx + psi (1 - |psi|^2) = 0 on the periodic box.

    ``w0`` must be periodic (see :func:`periodic_wave`).  A warning is
    recorded when |psi|^2 - 1 grows above ``contamination_tol`` in the guard
    band L/2 < |x| < 0.6 L just outside the accuracy window |x| <= L/2.
    """
    if T < 0 or dt <= 0:
        raise DomainError("need T >= 0 and dt > 0")
    g = w0.grid
    if w0.meta.get("wrap_mismatch", 0.0) > 1e-8:
        log.warning("initial wave function is not periodic (mismatch %.3g)", w0.meta["wrap_mismatch"])
    psi = np.array(w0.psi, dtype=complex)
    lin = np.exp(-1j * g.k_full ** 2 * dt)
    band = (np.abs(g.x) > 0.5 * g.L) & (np.abs(g.x) < 0.6 * g.L)
    base = float(np.max(np.abs(np.abs(psi[band]) ** 2 - 1.0))) if band.any() else 0.0
    warned = base > contamination_tol

    out_t = _output_times(T, cadence) if T > 0 else np.array([0.0])
    psis, ts, ens, warnings = [psi.copy()], [w0.t], [gl_energy(g, psi)], []
    h_used = dt
    for i in range(1, len(out_t)):
        span = out_t[i] - out_t[i - 1]
        nsub = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / nsub
        if abs(h - dt) > 1e-15:
            lin_h = np.exp(-1j * g.k_full ** 2 * h)
        else:
            lin_h = lin
        h_used = min(h_used, h)
        for _ in range(nsub):
            psi = psi * np.exp(0.5j * h * (1.0 - np.abs(psi) ** 2))
            psi = sfft.ifft(lin_h * sfft.fft(psi))
            psi = psi * np.exp(0.5j * h * (1.0 - np.abs(psi) ** 2))
        if not np.all(np.isfinite(psi)):
            raise IntegrationError("non-finite wave function", t=w0.t + out_t[i])
        if not warned and band.any():
            dev = float(np.max(np.abs(np.abs(psi[band]) ** 2 - 1.0)))
            if dev > contamination_tol:
                warned = True
                msg = f"boundary contamination {dev:.3g} at t={w0.t + out_t[i]:.3g}"
                log.warning(msg)
                warnings.append(msg)
        psis.append(psi.copy())
        ts.append(w0.t + out_t[i])
        ens.append(gl_energy(g, psi))
    return WaveTrajectory(g, np.array(ts), np.array(psis), np.array(ens), h_used, warnings)

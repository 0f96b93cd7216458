"""Monotonicity, localization, virial and phase-tracking diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.integrate import solve_ivp

from .errors import DomainError, TrackingLossError
from .grid import Grid, Pair
from .hydro import Trajectory, WaveState, WaveTrajectory, wave_to_madelung
from .linear_ops import SolitonOperators
from .modulation import ModulationTrack, fd_derivative
from .soliton import check_speed

log = logging.getLogger(__name__)


def nu_c(c: float) -> float:
    return math.sqrt(2.0 - check_speed(c) ** 2) / 8.0


def sigma_c(c: float) -> float:
    return (2.0 - check_speed(c) ** 2) / (4.0 * math.sqrt(2.0))


def phi(x, nu: float):
    """Phi = (1 + tanh(nu x))/2 with its first four derivatives."""
    x = np.asarray(x, dtype=float)
    t = np.tanh(nu * x)
    s2 = 1.0 - t * t
    return (0.5 * (1.0 + t),
            0.5 * nu * s2,
            -nu ** 2 * s2 * t,
            nu ** 3 * s2 * (3.0 * t * t - 1.0),
            nu ** 4 * s2 * t * (8.0 - 12.0 * t * t))


@dataclass
class MonotonicityConfig:
    c: float
    R_list: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0)
    defect_slack: float = 1e-6
    nu: float | None = None
    sigma_max: float | None = None

    def __post_init__(self):
        check_speed(self.c)
        if self.nu is None:
            self.nu = nu_c(self.c)
        if self.sigma_max is None:
            self.sigma_max = sigma_c(self.c)
        if self.nu <= 0:
            raise DomainError("nu must be positive")

    def monobis_constant(self, R: float) -> float:
        c = self.c
        return 768.0 * math.sqrt(2.0 - c * c) / c ** 4 * math.exp(-2.0 * self.nu * abs(R))

    def mono_coefficient(self) -> float:
        return (2.0 - self.c ** 2) ** 2 / 2.0 ** 11

    def mono_tail(self, R: float) -> float:
        c = self.c
        return 24.0 * (2.0 - c * c) ** 2 / c ** 4 * math.exp(-2.0 * self.nu * abs(R))


def localization_bound(c: float) -> float:
    """2^21 / (c^4 (2 - c^2))."""
    check_speed(c)
    return 2.0 ** 21 / (c ** 4 * (2.0 - c * c))


# ----------------------------------------------------------------------
# localized momentum


def localized_momentum(g: Grid, eta, vee, a: float, R: float, nu: float) -> float:
    """I_R = (1/2) int [eta v](x + a) Phi(x - R) dx."""
    y = g.centered(a)
    return 0.5 * g.integrate(eta * vee * phi(y - R, nu)[0])


def _frame_centers(traj: Trajectory, track: ModulationTrack) -> np.ndarray:
    if len(track.points) != len(traj):
        raise DomainError("track and trajectory have different lengths")
    if np.max(np.abs(track.times - traj.times)) > 1e-9:
        raise DomainError("track times do not match the trajectory samples")
    return np.array([p.frame_a for p in track.points])


@dataclass
class MomentumProfile:
    times: np.ndarray
    R_list: tuple
    values: np.ndarray  # shape (len(times), len(R_list))

    def column(self, R: float) -> np.ndarray:
        return self.values[:, list(self.R_list).index(R)]

    def rows(self):
        for i, t in enumerate(self.times):
            for j, R in enumerate(self.R_list):
                yield (float(t), float(R), float(self.values[i, j]))


MOMENTUM_COLUMNS = ("t", "R", "I_R")


def momentum_profile(traj: Trajectory, track: ModulationTrack, R_list, nu: float) -> MomentumProfile:
    """I_R(t) for every sample and every offset in ``R_list``."""
    a = _frame_centers(traj, track)
    g = traj.grid
    vals = np.array([[localized_momentum(g, traj.eta[i], traj.vee[i], a[i], R, nu) for R in R_list]
                     for i in range(len(traj))])
    return MomentumProfile(np.asarray(traj.times, dtype=float), tuple(float(r) for r in R_list), vals)


def consint_rhs(g: Grid, eta, vee, a: float, a_prime: float, R: float, sigma: float,
                t: float, nu: float) -> float:
    """Right-hand side of the time-derivative identity for I_{R + sigma t}."""
    y = g.centered(a) - R - sigma * t
    _, d1, _, d3, _ = phi(y, nu)
    d_eta = g.derivative(eta, 1)
    om = 1.0 - eta
    term1 = -0.5 * (a_prime + sigma) * g.integrate(eta * vee * d1)
    dens = (1.0 - 2.0 * eta) * vee ** 2 + 0.5 * eta ** 2 + (3.0 - 2.0 * eta) * d_eta ** 2 / (4.0 * om ** 2)
    term2 = 0.5 * g.integrate(dens * d1)
    term3 = 0.25 * g.integrate((eta + np.log1p(-eta)) * d3)
    return term1 + term2 + term3


@dataclass
class IdentityDefect:
    R: float
    sigma: float
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def defect(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def max_defect(self) -> float:
        return float(np.max(np.abs(self.defect)))


def didt_identity_check(traj: Trajectory, track: ModulationTrack, R: float, sigma: float,
                        nu: float, c_ref: float | None = None) -> IdentityDefect:
    """Finite-difference d/dt I_{R + sigma t} against the three-integral right side."""
    if c_ref is not None and abs(sigma) > sigma_c(c_ref) + 1e-14:
        raise DomainError(f"|sigma| must not exceed sigma_c = {sigma_c(c_ref):.6g}")
    if len(traj) < 5:
        raise DomainError("need at least five samples")
    a = _frame_centers(traj, track)
    g = traj.grid
    t = traj.times
    I = np.array([localized_momentum(g, traj.eta[i], traj.vee[i], a[i], R + sigma * t[i], nu)
                  for i in range(len(traj))])
    lhs = fd_derivative(t, I)
    rhs = np.array([consint_rhs(g, traj.eta[i], traj.vee[i], a[i], track.a_prime[i], R, sigma, t[i], nu)
                    for i in range(len(traj))])
    return IdentityDefect(R, sigma, t, lhs, rhs)


@dataclass
class MonotonicityReport:
    config: MonotonicityConfig
    R_list: list
    worst_margin: dict  # R -> min over t0 <= t1 of I(t1) - I(t0) + C(R)
    violations: list = field(default_factory=list)  # (R, t0, t1, gap)
    mono_violations: list = field(default_factory=list)  # (R, sigma, t, gap)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "c": self.config.c,
            "nu": self.config.nu,
            "defect_slack": self.config.defect_slack,
            "worst_margin": {str(k): v for k, v in self.worst_margin.items()},
            "violations": [list(v) for v in self.violations],
            "differential_bound_violations": [list(v) for v in self.mono_violations],
        }


def monotonicity_check(traj: Trajectory, track: ModulationTrack, config: MonotonicityConfig,
                       sigmas=None, differential_slack: float = 1e-4) -> MonotonicityReport:
    """Check I_R(t1) >= I_R(t0) - C(R) over all sampled pairs t0 <= t1.

    Along the lines R + sigma t (``sigmas`` defaults to {-sigma_c, 0, sigma_c})
    the differential lower bound is checked with the finite-difference
    derivative, allowing ``differential_slack`` for the differencing error.
    """
    prof = momentum_profile(traj, track, config.R_list, config.nu).values
    t = traj.times
    worst = {}
    violations = []
    for j, R in enumerate(config.R_list):
        I = prof[:, j]
        C = config.monobis_constant(R)
        suffix_min = np.minimum.accumulate(I[::-1])[::-1]
        margins = suffix_min - I + C
        k = int(np.argmin(margins))
        worst[float(R)] = float(margins[k])
        if margins[k] < -config.defect_slack:
            t1 = int(k + np.argmin(I[k:]))
            violations.append((float(R), float(t[k]), float(t[t1]), float(margins[k])))

    if sigmas is None:
        sigmas = (-config.sigma_max, 0.0, config.sigma_max)
    a = _frame_centers(traj, track)
    g = traj.grid
    mono = []
    coef = config.mono_coefficient()
    for R in config.R_list:
        for s in sigmas:
            chk = didt_identity_check(traj, track, R, s, config.nu)
            for i in range(len(t)):
                y = g.centered(a[i]) - R - s * t[i]
                d1 = phi(y, config.nu)[1]
                dens = g.derivative(traj.eta[i], 1) ** 2 + traj.eta[i] ** 2 + traj.vee[i] ** 2
                bound = coef * g.integrate(dens * d1) - config.mono_tail(R + s * t[i])
                gap = chk.lhs[i] - bound
                if gap < -differential_slack:
                    mono.append((float(R), float(s), float(t[i]), float(gap)))
    return MonotonicityReport(config, list(config.R_list), worst, violations, mono)


# ----------------------------------------------------------------------
# localization


def localization_norm(traj: Trajectory, track: ModulationTrack, nu: float) -> np.ndarray:
    """int [(d_x eta)^2 + eta^2 + v^2](x + a(t)) e^{2 nu |x|} dx along the run."""
    a = _frame_centers(traj, track)
    g = traj.grid
    return np.array([g.weighted_norm(Pair(traj.eta[i], traj.vee[i]), nu, a[i]) for i in range(len(traj))])


def rigidity_series(traj: Trajectory, track: ModulationTrack, kappa: float = 1.0) -> dict:
    """u* = S H_c(eps) along the track, with I*, J*, N = I* + kappa J* and the
    empirical ratio (dN/dt) / |u*|_X^2 (kappa is a free parameter)."""
    g = traj.grid
    I, Jv, N, norm2 = [], [], [], []
    for p in track.points:
        ops = SolitonOperators(p.c, g)
        u = ops.u_star(p.eps)
        i_, j_, n_ = ops.rigidity_functionals(u, kappa)
        I.append(i_)
        Jv.append(j_)
        N.append(n_)
        norm2.append(g.norm_X(u) ** 2)
    N = np.array(N)
    norm2 = np.array(norm2)
    dN = fd_derivative(track.times, N)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(norm2 > 0, dN / norm2, np.nan)
    return {"I": np.array(I), "J": np.array(Jv), "N": N, "u_norm2": norm2, "dN_ratio": ratio}


# ----------------------------------------------------------------------
# virial identity for i u_t + u_xx = F


def sine_window(a: float, b: float):
    """chi(t) = sin(pi (t - a)/(b - a)) with chi(a) = chi(b) = 0; returns (chi, chi', chi'')."""
    w = math.pi / (b - a)

    def chi(t):
        t = np.asarray(t, dtype=float)
        s = np.sin(w * (t - a))
        return s, w * np.cos(w * (t - a)), -w * w * s
    return chi


@dataclass
class VirialResult:
    lhs: float
    rhs: float
    terms: dict
    under_resolved: bool = False

    @property
    def defect(self) -> float:
        return abs(self.lhs - self.rhs)


def virial_identity_check(g: Grid, u0: np.ndarray, F=None, T: float = 1.0, phi_fn=None,
                          chi_fn=None, t0: float = 0.0, n_quad: int = 48,
                          rtol: float = 1e-12, tail_tol: float = 1e-10) -> VirialResult:
    """Evaluate both sides of the space-time virial identity on [t0, t0 + T].

    ``F(x, t)`` is the forcing (None for the free equation), ``phi_fn(x)``
    returns (Phi, Phi', Phi'', Phi'''') and ``chi_fn(t)`` returns
    (chi, chi', chi'') with chi vanishing at both ends.  The equation is
    solved in Fourier space (exactly when F is None, otherwise with a
    high-order adaptive integrator in the interaction picture) and the time
    integrals use Gauss-Legendre quadrature.
    """
    a, b = t0, t0 + T
    if T <= 0:
        raise DomainError("time window must have positive length")
    if phi_fn is None:
        def phi_fn(x):
            p = phi(x, 0.5)
            return p[0], p[1], p[2], p[4]
    if chi_fn is None:
        chi_fn = sine_window(a, b)
    ca, cpa, _ = chi_fn(a)
    cb, cpb, _ = chi_fn(b)
    if abs(ca) > 1e-12 or abs(cb) > 1e-12:
        raise DomainError("chi must vanish at both ends of the time window")

    k2 = g.k_full ** 2
    u0h = sfft.fft(np.asarray(u0, dtype=complex))

    if F is None:
        def u_at(t):
            return sfft.ifft(np.exp(-1j * k2 * (t - a)) * u0h)
    else:
        def rhs(t, w):
            return -1j * np.exp(1j * k2 * (t - a)) * sfft.fft(F(g.x, t))
        sol = solve_ivp(rhs, (a, b), u0h, method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                        dense_output=True)
        if not sol.success:
            raise RuntimeError(f"virial evolution failed: {sol.message}")

        def u_at(t):
            return sfft.ifft(np.exp(-1j * k2 * (t - a)) * sol.sol(t))

    P0, P1, P2, P4 = phi_fn(g.x)
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    ts = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    ws = 0.5 * (b - a) * weights

    lhs = 0.0
    t_mass = t_F1 = t_F2 = t_F3 = 0.0
    tail = 0.0
    for t, wq in zip(ts, ws):
        u = u_at(t)
        ux = g.derivative_complex(u, 1)
        ch, chp, chpp = chi_fn(t)
        spec = np.abs(sfft.fft(u))
        tail = max(tail, float(np.max(spec[np.abs(g.k_full) > 0.8 * g.k_max]) / max(spec.max(), 1e-300)))
        lhs += wq * 4.0 * g.integrate(np.abs(ux) ** 2 * P2) * ch
        t_mass += wq * g.integrate(np.abs(u) ** 2 * (P0 * chpp + P4 * ch))
        if F is not None:
            f = F(g.x, t)
            t_F1 += wq * 2.0 * g.integrate(np.real(f * np.conj(1j * u)) * P0) * chp
            t_F2 -= wq * 2.0 * g.integrate(np.real(f * np.conj(u)) * P2) * ch
            t_F3 -= wq * 4.0 * g.integrate(np.real(f * np.conj(ux)) * P1) * ch
    ua, ub = u_at(a), u_at(b)
    t_bdry = g.integrate((np.abs(ua) ** 2 * cpa - np.abs(ub) ** 2 * cpb) * P0)
    terms = {"boundary": t_bdry, "mass": t_mass, "F_iu": t_F1, "F_u": t_F2, "F_ux": t_F3}
    rhs_val = sum(terms.values())
    under = tail > tail_tol
    if under:
        log.warning("virial check under-resolved: spectral tail %.3g", tail)
    return VirialResult(float(lhs), float(rhs_val), terms, under)


# ----------------------------------------------------------------------
# phase tracking


def bump_chi(g: Grid, halfwidth: float = 2.0) -> np.ndarray:
    """Even C-infinity bump supported in |x| < halfwidth, with unit discrete integral."""
    y = g.x
    out = np.zeros(g.N)
    m = np.abs(y) < halfwidth
    out[m] = np.exp(-1.0 / (1.0 - (y[m] / halfwidth) ** 2))
    return out / g.integrate(out)


def shifted_wave(w: WaveState, b: float) -> np.ndarray:
    """Samples of Psi(x + b), built from Fourier shifts of eta, v and of the phase."""
    g = w.grid
    hs = wave_to_madelung(w, sigma_guard=0.0)
    phase0 = float(np.angle(w.psi[0]))
    # phi(x) = phase0 - int_{-L}^x v ; split the antiderivative into mean ramp + periodic part
    vh = sfft.rfft(hs.vee)
    mean = vh[0].real / g.N
    gh = np.zeros_like(vh)
    gh[1:-1] = vh[1:-1] / (1j * g.k[1:-1])
    per = sfft.irfft(gh, n=g.N)
    per_shift = g.shift(per, -b)
    anti = per_shift - per[0] + mean * (g.x + b + g.L)
    eta_s = g.shift(hs.eta, -b)
    return np.sqrt(1.0 - eta_s) * np.exp(1j * (phase0 - anti))


def phase_track(waves, b_series, c_star: float, chi: np.ndarray | None = None,
                jump_guard: float = 0.5 * math.pi) -> np.ndarray:
    """theta(t) = arg(int Psi(x + b(t)) chi(x) dx) - arg(i sign(c*)), continued in t.

    ``waves`` is a :class:`WaveTrajectory` or a sequence of :class:`WaveState`.
    """
    check_speed(c_star)
    states = [waves.state(i) for i in range(len(waves))] if isinstance(waves, WaveTrajectory) else list(waves)
    if len(states) != len(b_series):
        raise DomainError("need one center per wave state")
    g = states[0].grid
    if chi is None:
        chi = bump_chi(g)
    ref = math.copysign(0.5 * math.pi, c_star)
    bound = abs(c_star) / (2.0 * math.sqrt(2.0))
    thetas = []
    for w, b in zip(states, b_series):
        z = complex(g.dx * np.sum(shifted_wave(w, float(b)) * chi))
        if abs(z) < bound:
            raise TrackingLossError(f"|int Psi chi| = {abs(z):.3g} below {bound:.3g} at t={w.t}")
        raw = math.atan2(z.imag, z.real) - ref
        if thetas:
            step = (raw - thetas[-1] + math.pi) % (2.0 * math.pi) - math.pi
            if abs(step) > jump_guard:
                log.warning("phase jump %.3g exceeds the continuation guard at t=%.3g", step, w.t)
            thetas.append(thetas[-1] + step)
        else:
            thetas.append((raw + math.pi) % (2.0 * math.pi) - math.pi)
    return np.array(thetas)

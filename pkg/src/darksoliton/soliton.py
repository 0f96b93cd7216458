"""The dark soliton family of the 1D Gross-Pitaevskii equation.

In hydrodynamical variables the travelling wave of speed c is

    eta_c(x) = (2 - c^2) / (2 cosh^2(sqrt(2 - c^2) x / 2)),
    v_c(x)   = c eta_c / (2 (1 - eta_c)),

and in wave form U_c(x) = sqrt((2 - c^2)/2) tanh(sqrt(2 - c^2) x / 2) + i c / sqrt(2).
Every derivative below is evaluated from closed forms; spectral
differentiation is only used by :func:`profile_residual`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import Grid, Pair

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SolitonParams:
    """Speed ``c`` (0 < |c| < sqrt 2) and center ``a`` of the profile Q_{c,a}."""

    c: float
    a: float = 0.0

    def __post_init__(self):
        check_speed(self.c)
        if not np.isfinite(self.a):
            raise DomainError(f"soliton center must be finite, got {self.a}")

    @property
    def kappa(self) -> float:
        """Inverse width sqrt(2 - c^2) / 2."""
        return math.sqrt(2.0 - self.c ** 2) / 2.0


def check_speed(c: float) -> float:
    if not np.isfinite(c) or c == 0.0 or abs(c) >= SQRT2:
        raise DomainError(f"speed must satisfy 0 < |c| < sqrt(2), got {c}")
    return float(c)


def default_half_length(c: float) -> float:
    """Box half-length max(60, 60/sqrt(2 - c^2)) keeping the profile tail below 1e-20."""
    check_speed(c)
    return max(60.0, 60.0 / math.sqrt(2.0 - c * c))


def _sech2(y: np.ndarray) -> np.ndarray:
    # 4 e^{-2|y|} / (1 + e^{-2|y|})^2 never overflows
    e = np.exp(-2.0 * np.abs(y))
    return 4.0 * e / (1.0 + e) ** 2


@dataclass
class SolitonProfile:
    """Samples of Q_{c,a} and the derived fields used by the operators."""

    params: SolitonParams
    eta: np.ndarray
    vee: np.ndarray
    d_eta: np.ndarray
    d_vee: np.ndarray
    mu: np.ndarray
    d2_eta: np.ndarray
    d3_eta: np.ndarray
    dlog_eta: np.ndarray  # d_eta / eta, finite everywhere

    @property
    def c(self) -> float:
        return self.params.c

    def pair(self) -> Pair:
        return Pair(self.eta, self.vee)

    def d_pair(self) -> Pair:
        return Pair(self.d_eta, self.d_vee)


def profile_at(c: float, y: np.ndarray, a: float = 0.0) -> SolitonProfile:
    """Evaluate the profile at co-moving positions ``y`` (already shifted by a)."""
    p = SolitonParams(c, a)
    kap = p.kappa
    y = np.asarray(y, dtype=float)
    th = np.tanh(kap * y)
    eta = 2.0 * kap ** 2 * _sech2(kap * y)
    s = 2.0 - c * c
    one_m = 1.0 - eta
    d_eta = -2.0 * kap * eta * th
    return SolitonProfile(
        params=p,
        eta=eta,
        vee=c * eta / (2.0 * one_m),
        d_eta=d_eta,
        d_vee=c * d_eta / (2.0 * one_m ** 2),
        mu=eta * (3.0 - c * c - 3.0 * eta),
        d2_eta=s * eta - 3.0 * eta ** 2,
        d3_eta=(s - 6.0 * eta) * d_eta,
        dlog_eta=-2.0 * kap * th,
    )


def eval_hydro(p: SolitonParams, g: Grid) -> SolitonProfile:
    """Q_{c,a} sampled on the grid, with x - a wrapped periodically."""
    return profile_at(p.c, g.centered(p.a), p.a)


def eval_wave(p: SolitonParams, x) -> np.ndarray | complex:
    """U_c(x - a); accepts scalars or arrays (not wrapped)."""
    y = np.asarray(x, dtype=float) - p.a
    amp = math.sqrt((2.0 - p.c ** 2) / 2.0)
    out = amp * np.tanh(p.kappa * y) + 1j * p.c / SQRT2
    return out if out.ndim else complex(out)


def eval_wave_dx(p: SolitonParams, x) -> np.ndarray:
    """Closed-form dU_c/dx = sqrt((2-c^2)/2) kappa sech^2(kappa (x - a))."""
    y = np.asarray(x, dtype=float) - p.a
    amp = math.sqrt((2.0 - p.c ** 2) / 2.0)
    return amp * p.kappa * _sech2(p.kappa * y) + 0j


def d_dc_profile(p: SolitonParams, g: Grid) -> Pair:
    """(d eta_c / dc, d v_c / dc) at fixed co-moving position."""
    c = p.c
    y = g.centered(p.a)
    prof = profile_at(c, y, p.a)
    r = math.sqrt(2.0 - c * c)
    eta = prof.eta
    d_eta_c = (c / r) * eta * (y * np.tanh(r * y / 2.0) - 2.0 / r)
    one_m = 1.0 - eta
    d_v_c = eta / (2.0 * one_m) + c * d_eta_c / (2.0 * one_m ** 2)
    return Pair(d_eta_c, d_v_c)


def energy_closed(c: float) -> float:
    check_speed(c)
    return (2.0 - c * c) ** 1.5 / 3.0


def momentum_closed(c: float) -> float:
    """P(Q_c) = int_|c|^sqrt2 sqrt(2 - s^2) ds, odd in c."""
    check_speed(c)
    ac = abs(c)
    val = math.pi / 2.0 - ac * math.sqrt(2.0 - ac * ac) / 2.0 - math.asin(ac / SQRT2)
    return math.copysign(val, c)


def conserved_closed(c: float) -> tuple[float, float, float]:
    """Closed forms (E, P, dP/dc) on the soliton branch."""
    check_speed(c)
    return energy_closed(c), momentum_closed(c), -math.sqrt(2.0 - c * c)


@dataclass
class ProfileResidual:
    """Max-norm residuals of the profile equations on a grid."""

    etac: float  # eta'' - (2 - c^2) eta + 3 eta^2
    first_integral: float  # (eta')^2 - (2 - c^2) eta^2 + 2 eta^3
    hgp: float  # travelling-wave residual of the hydrodynamical system
    solver_rhs: float  # same residual through the dealiased solver right-hand side
    solc: float  # -i c U' + U'' + U (1 - |U|^2)
    boundary_value: float
    spectral_tail: float
    under_resolved: bool

    def max(self) -> float:
        return max(self.etac, self.first_integral, self.hgp, self.solc)


def profile_residual(p: SolitonParams, g: Grid, tol: float = 1e-12) -> ProfileResidual:
    """Residuals computed with spectral derivatives of the sampled profile."""
    from .hydro import hgp_rhs_fields

    c = p.c
    prof = eval_hydro(p, g)
    eta, vee = prof.eta, prof.vee
    s = 2.0 - c * c

    d1 = g.derivative(eta, 1)
    d2 = g.derivative(eta, 2)
    r_etac = np.max(np.abs(d2 - s * eta + 3.0 * eta ** 2))
    r_first = np.max(np.abs(d1 ** 2 - s * eta ** 2 + 2.0 * eta ** 3))

    # travelling-wave residual of the hydrodynamical system, with spectral
    # derivatives of eta and the chain rule for the rational functions of eta
    # (1/(1 - eta) has complex poles close to the real axis when |c| is small)
    d3 = g.derivative(eta, 3)
    q = 1.0 / (1.0 - eta)
    dv = c * d1 * q ** 2 / 2.0
    rhs_eta = 2.0 * d1 * vee + 2.0 * eta * dv - 2.0 * dv
    rhs_v = (2.0 * vee * dv - d1 + 0.5 * d3 * q + d1 * d2 * q ** 2 + 0.5 * d1 ** 3 * q ** 3)
    r_hgp = max(np.max(np.abs(rhs_eta + c * d1)), np.max(np.abs(rhs_v + c * dv)))

    solver_eta, solver_v = hgp_rhs_fields(g, eta, vee)
    r_solver = max(np.max(np.abs(solver_eta + c * g.derivative(eta, 1))),
                   np.max(np.abs(solver_v + c * g.derivative(vee, 1))))

    # U itself is not periodic, but U' decays, so U'' is obtained spectrally from U'
    xs = p.a + g.centered(p.a)
    u = eval_wave(p, xs)
    du = eval_wave_dx(p, xs)
    d2u = g.derivative(du.real, 1) + 1j * g.derivative(du.imag, 1)
    r_solc = np.max(np.abs(-1j * c * du + d2u + u * (1.0 - np.abs(u) ** 2)))

    boundary = float(np.max(np.abs(eta[[0, -1]])))
    tail = 0.0
    for f in (eta, vee):
        spec = np.abs(np.fft.rfft(f))
        tail = max(tail, float(spec[-max(1, len(spec) // 10):].max() / max(spec.max(), 1e-300)))
    return ProfileResidual(
        etac=float(r_etac),
        first_integral=float(r_first),
        hgp=float(r_hgp),
        solver_rhs=float(r_solver),
        solc=float(r_solc),
        boundary_value=boundary,
        spectral_tail=tail,
        under_resolved=bool(boundary > tol or tail > tol),
    )

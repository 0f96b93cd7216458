"""Modulation parameters (a, c) of a state close to the soliton family.

Given (eta, v), the pair (a, c) is chosen so that the perturbation

    eps = (eta(. + a) - eta_c, v(. + a) - v_c)

satisfies <eps, d_x Q_c> = 0 and P'(Q_c)(eps) = (1/2) int (eta_c eps_v + v_c eps_eta) = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModulationError, DomainError, ModulationError, NoSolitonError
from .grid import Grid, Pair
from .hydro import HydroState, Trajectory
from .soliton import SQRT2, SolitonParams, check_speed, eval_hydro

log = logging.getLogger(__name__)

C_FLOOR = 0.05
C_MARGIN = 0.01


def _profile(g: Grid, c: float):
    return eval_hydro(SolitonParams(c, 0.0), g)


def epsilon(s: HydroState, a: float, c: float) -> Pair:
    """The perturbation eps in the frame of the soliton centered at ``a``."""
    g = s.grid
    prof = _profile(g, check_speed(c))
    return Pair(g.shift(s.eta, -a) - prof.eta, g.shift(s.vee, -a) - prof.vee)


def orthogonality_residual(s: HydroState, a: float, c: float) -> tuple[float, float]:
    """(r1, r2) = (<eps, d_x Q_c>, P'(Q_c)(eps))."""
    g = s.grid
    prof = _profile(g, check_speed(c))
    e_eta = g.shift(s.eta, -a) - prof.eta
    e_v = g.shift(s.vee, -a) - prof.vee
    r1 = g.dx * (np.dot(e_eta, prof.d_eta) + np.dot(e_v, prof.d_vee))
    r2 = 0.5 * g.dx * (np.dot(prof.eta, e_v) + np.dot(prof.vee, e_eta))
    return float(r1), float(r2)


def _clamp_speed(c: float, c_floor: float, c_margin: float) -> float:
    sgn = 1.0 if c >= 0 else -1.0
    return sgn * min(max(abs(c), c_floor), SQRT2 - c_margin)


def initial_guess(s: HydroState, c_floor: float = C_FLOOR, c_margin: float = C_MARGIN):
    """Center from the refined peak of eta, speed from max eta_c = (2 - c^2)/2."""
    g = s.grid
    eta = np.asarray(s.eta)
    j = int(np.argmax(eta))
    m = float(eta[j])
    if m < 1e-6:
        raise NoSolitonError(f"no dip in |psi|: max eta = {m:.3g}")
    if m >= 1.0:
        raise DomainError("max eta >= 1: state outside the hydrodynamical regime")
    e_l, e_r = eta[(j - 1) % g.N], eta[(j + 1) % g.N]
    denom = e_l - 2.0 * m + e_r
    off = 0.5 * (e_l - e_r) / denom if denom < 0 else 0.0
    off = float(np.clip(off, -0.5, 0.5))
    a = float(g.x[j] + off * g.dx)
    peak = m - 0.25 * (e_l - e_r) * off
    sgn = 1.0 if s.vee[j] >= 0 else -1.0
    c = sgn * math.sqrt(max(0.0, 2.0 - 2.0 * peak))
    return a, _clamp_speed(c, c_floor, c_margin)


@dataclass
class ModulationPoint:
    t: float
    a: float
    c: float
    eps: Pair
    eps_norm_X: float
    residual: tuple[float, float]
    iterations: int = 0
    offset: float = 0.0  # a - offset is the center in the stored (computational) frame

    @property
    def frame_a(self) -> float:
        return self.a - self.offset


def solve(s: HydroState, guess=None, tol: float = 1e-12, max_iter: int = 50,
          fd_step: float = 1e-6, basin: float = 0.5, c_floor: float = C_FLOOR,
          c_margin: float = C_MARGIN, max_cond: float = 1e12) -> ModulationPoint:
    """Damped Newton iteration on (r1, r2) as functions of (a, c).

    The Jacobian is a central finite difference with step ``fd_step``.
    """
    g = s.grid
    a, c = initial_guess(s, c_floor, c_margin) if guess is None else (float(guess[0]), float(guess[1]))
    c = _clamp_speed(c, c_floor, c_margin)
    eps0 = epsilon(s, a, c)
    n0 = g.norm_X(eps0)
    if n0 >= basin:
        raise ModulationError(f"initial guess outside the basin: |eps|_X = {n0:.3g} >= {basin}", t=s.t)

    def F(a_, c_):
        return np.array(orthogonality_residual(s, a_, c_))

    r = F(a, c)
    history = [float(np.max(np.abs(r)))]
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise ModulationError(f"no convergence after {max_iter} iterations", history, s.t)
        it += 1
        h = fd_step
        hc = min(fd_step, 0.5 * (SQRT2 - abs(c)))
        J = np.empty((2, 2))
        J[:, 0] = (F(a + h, c) - F(a - h, c)) / (2.0 * h)
        J[:, 1] = (F(a, c + hc) - F(a, c - hc)) / (2.0 * hc)
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > max_cond:
            raise DegenerateModulationError(f"modulation Jacobian condition number {cond:.3g}", history, s.t)
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            a_new, c_new = a + lam * step[0], c + lam * step[1]
            if 0.0 < abs(c_new) < SQRT2 and np.sign(c_new) == np.sign(c):
                r_new = F(a_new, c_new)
                if np.max(np.abs(r_new)) < history[-1] or lam < 1e-3:
                    break
            lam *= 0.5
            if lam < 1e-3:
                raise ModulationError("line search failed", history, s.t)
        a, c, r = a_new, c_new, r_new
        history.append(float(np.max(np.abs(r))))
        if abs(c) <= c_floor or abs(c) >= SQRT2 - c_margin:
            raise ModulationError(f"speed {c:.6g} left the admissible interval", history, s.t)

    eps = epsilon(s, a, c)
    return ModulationPoint(t=float(s.t), a=float(a), c=float(c), eps=eps,
                           eps_norm_X=g.norm_X(eps), residual=(float(r[0]), float(r[1])),
                           iterations=it)


def fd_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Fourth-order central differences inside, second order near the ends."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    n = len(f)
    if n < 3:
        return np.gradient(f, t) if n == 2 else np.zeros(n)
    h = np.diff(t)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
        return np.gradient(f, t, edge_order=2)
    h = h[0]
    d = np.gradient(f, h, edge_order=2)
    if n >= 5:
        d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    return d


@dataclass
class ModulationTrack:
    points: list[ModulationPoint]
    a_prime: np.ndarray = field(default=None)
    c_prime: np.ndarray = field(default=None)
    error: dict | None = None  # set when a partial track stopped early

    def __post_init__(self):
        t = self.times
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise DomainError("track times must be strictly increasing")
        if self.a_prime is None:
            self.a_prime = fd_derivative(t, self.a)
        if self.c_prime is None:
            self.c_prime = fd_derivative(t, self.c)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    @property
    def a(self) -> np.ndarray:
        return np.array([p.a for p in self.points])

    @property
    def c(self) -> np.ndarray:
        return np.array([p.c for p in self.points])

    @property
    def eps_norm(self) -> np.ndarray:
        return np.array([p.eps_norm_X for p in self.points])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([p.residual for p in self.points])

    def report(self) -> dict:
        eps = self.eps_norm
        sup_eps = float(eps.max())
        sup_cp = float(np.max(np.abs(self.c_prime)))
        return {
            "sup_eps_X": sup_eps,
            "sup_c_prime": sup_cp,
            "sup_a_prime_minus_c": float(np.max(np.abs(self.a_prime - self.c))),
            "c_prime_over_eps2": sup_cp / sup_eps ** 2 if sup_eps > 0 else float("nan"),
            "max_residual": float(np.max(np.abs(self.residuals))),
        }

    def rows(self):
        for i, p in enumerate(self.points):
            yield (p.t, p.a, p.c, self.a_prime[i], self.c_prime[i], p.eps_norm_X,
                   p.residual[0], p.residual[1])


TRACK_COLUMNS = ("t", "a", "c", "a_prime", "c_prime", "eps_norm_X", "r1", "r2")


def track(traj: Trajectory, guess=None, partial: bool = False, **solve_kw) -> ModulationTrack:
    """Modulate every sample of a trajectory, warm-starting from the previous point.

    Centers are reported in the lab frame and stay continuous (never wrapped),
    so a' is meaningful even when the soliton crosses the periodic seam.
    With ``partial`` a failed solve ends the track instead of raising; the
    points obtained so far are kept and ``error`` describes the failure.
    """
    points = []
    V = traj.frame_speed
    prev = guess
    error = None
    for i in range(len(traj)):
        s = traj.state(i)
        try:
            p = solve(s, prev, **solve_kw)
        except ModulationError as exc:
            exc.t = s.t
            if not partial or not points:
                raise
            error = {"kind": type(exc).__name__, "message": str(exc), "t": float(s.t)}
            log.warning("modulation track stopped at t=%.6g: %s", s.t, exc)
            break
        p.offset = V * s.t
        p.a = p.a + p.offset
        points.append(p)
        prev = (p.frame_a, p.c)
    return ModulationTrack(points, error=error)

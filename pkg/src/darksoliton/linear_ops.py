"""Linearization around the soliton: H_c, J, S, the remainder R_c, M_c, G_c and T_c.

Operators act on :class:`~darksoliton.grid.Pair` fields sampled on a grid,
with the soliton centered at x = 0.  Matrix-free application uses spectral
derivatives; dense assembly uses the exactly antisymmetric Fourier
differentiation matrix D and writes every divergence-form term as
D^T diag(a) D so that the matrices are symmetric by construction.

An antisymmetric D on an even grid annihilates the alternating (Nyquist)
vector as well as the constants.  Placed in the first component that vector
carries no kinetic energy, so every dense eigenproblem below is restricted
to the complement of (z, 0), z_j = (-1)^j.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, GuardError
from .grid import Grid, Pair
from .soliton import SolitonParams, SolitonProfile, check_speed, d_dc_profile, eval_hydro

log = logging.getLogger(__name__)

DENSE_MAX_N = 2048
TOL_NEG = 1e-8


def essential_edge_Hc(c: float) -> float:
    """Bottom (2 - c^2)/(3 + sqrt(1 + 4c^2)) of the essential spectrum of H_c."""
    check_speed(c)
    return (2.0 - c * c) / (3.0 + math.sqrt(1.0 + 4.0 * c * c))


def symbol_Hc(c: float, k) -> np.ndarray:
    """Far-field symbol [[k^2/4 + 1/2, -c/2], [-c/2, 1]] (shape (..., 2, 2))."""
    k = np.asarray(k, dtype=float)
    out = np.empty(k.shape + (2, 2))
    out[..., 0, 0] = 0.25 * k ** 2 + 0.5
    out[..., 0, 1] = out[..., 1, 0] = -0.5 * c
    out[..., 1, 1] = 1.0
    return out


def symbol_min_eigenvalue(c: float, k) -> np.ndarray:
    """Smaller eigenvalue of the far-field symbol, in closed form."""
    k = np.asarray(k, dtype=float)
    a = 0.25 * k ** 2 + 0.5
    mean = 0.5 * (a + 1.0)
    rad = np.sqrt(0.25 * (a - 1.0) ** 2 + 0.25 * c * c)
    return mean - rad


def tau_c(c: float) -> float:
    """Bottom of the essential spectrum of T_c."""
    check_speed(c)
    s = (3.0 - c * c) * (22.0 + c * c)
    return s / 16.0 - 0.5 * math.sqrt(s * s / 64.0 - 27.0 * (2.0 - c * c))


def symbol_Tinf(c: float, xi: float) -> np.ndarray:
    """Symbol of the constant-coefficient limit operator of T_c at frequency xi."""
    d = 3.0 - c * c
    return np.array([[1.5 / d * xi ** 2 + d * (6.0 + c * c) / 8.0, -0.5 * c ** 3],
                     [-0.5 * c ** 3, 2.0 * d]])


@dataclass
class SpectrumReport:
    c: float
    eigenvalues: np.ndarray
    count_negative: int
    kernel_residual: float
    essential_edge: float
    coercivity: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self, n_eigs: int = 50) -> dict:
        return {
            "c": self.c,
            "count_negative": self.count_negative,
            "kernel_residual": self.kernel_residual,
            "essential_edge": self.essential_edge,
            "coercivity": self.coercivity,
            "lowest_eigenvalues": [float(x) for x in self.eigenvalues[:n_eigs]],
            **{k: v for k, v in self.extras.items()},
        }


class SolitonOperators:
    """All linear objects attached to Q_c on a given grid (immutable after construction)."""

    def __init__(self, c: float, grid: Grid):
        self.c = check_speed(c)
        self.grid = grid
        self.prof: SolitonProfile = eval_hydro(SolitonParams(c, 0.0), grid)
        p = self.prof
        one_m = 1.0 - p.eta
        cc = c * c
        self._inv = 1.0 / one_m
        self._coupling = c / (2.0 * one_m)  # c/2 + v_c
        self._V = 0.25 * (2.0 - p.d2_eta / one_m ** 2 - p.d_eta ** 2 / one_m ** 3)
        d = 3.0 - cc - 3.0 * p.eta  # mu_c / eta_c
        self._d = d
        # T_c coefficients, written without dividing by eta_c
        r = p.dlog_eta
        self._T_a = 1.5 / d  # 3 eta / (2 mu)
        dx_term = -p.eta / d + 3.0 * r * p.d_eta / d ** 2  # d_x(d_eta / mu)
        self._T_V = (27.0 * ((2.0 - cc) - 2.0 * p.eta) / (8.0 * d)
                     + c ** 6 / (8.0 * d * one_m ** 2) + 2.25 * dx_term)
        self._T_b = -c ** 3 / (2.0 * one_m)
        self._T_e = 2.0 * d
        self._dense: dict = {}

    # ------------------------------------------------------------------
    # matrix-free operators

    def H(self, u: Pair) -> Pair:
        g = self.grid
        u1, u2 = u
        first = (-0.25 * g.derivative(g.derivative(u1, 1) * self._inv, 1)
                 + self._V * u1 - self._coupling * u2)
        second = -self._coupling * u1 + (1.0 - self.prof.eta) * u2
        return Pair(first, second)

    def J(self, u: Pair) -> Pair:
        return apply_J(u, self.grid)

    @staticmethod
    def S(u: Pair) -> Pair:
        return apply_S(u)

    def u_star(self, eps: Pair) -> Pair:
        return apply_S(self.H(eps))

    def P_prime(self) -> Pair:
        """Momentum gradient (1/2)(v_c, eta_c)."""
        return Pair(0.5 * self.prof.vee, 0.5 * self.prof.eta)

    def kernel_vector(self) -> Pair:
        return Pair(self.prof.d_eta, self.prof.d_vee)

    def d_c(self) -> Pair:
        return d_dc_profile(SolitonParams(self.c, 0.0), self.grid)

    def remainder(self, eps: Pair, sigma_guard: float = 1e-3) -> Pair:
        g = self.grid
        p = self.prof
        e1, e2 = eps
        eta = p.eta + e1
        if np.max(eta) >= 1.0 - sigma_guard:
            raise GuardError("eta_c + eps_eta reaches 1 - sigma_guard", max_eta=float(np.max(eta)))
        oc = 1.0 - p.eta
        ot = 1.0 - eta
        de = g.derivative(e1, 1)
        dq = p.d_eta
        flux = e1 * de / (4.0 * oc * ot) + dq * e1 ** 2 / (4.0 * oc ** 2 * ot)
        first = (dq ** 2 * e1 ** 2 * (3.0 - p.eta - 2.0 * eta) / (8.0 * oc ** 3 * ot ** 2)
                 + dq * e1 * de * (2.0 - p.eta - eta) / (4.0 * oc ** 2 * ot ** 2)
                 + de ** 2 / (8.0 * ot ** 2)
                 - 0.5 * e2 ** 2
                 - g.derivative(flux, 1))
        return Pair(first, -e1 * e2)

    def M(self, u: Pair) -> Pair:
        p = self.prof
        m11 = -self.c * p.d_eta / (2.0 * (1.0 - p.eta) ** 2)
        m12 = -p.dlog_eta
        u1, u2 = u
        return Pair(m11 * u1 + m12 * u2, m12 * u1)

    def G_bilinear(self, u: Pair) -> float:
        JSu = self.J(apply_S(u))
        return 2.0 * self.grid.inner_l2(apply_S(self.M(u)), self.H(JSu))

    def G_explicit(self, u: Pair) -> float:
        g = self.grid
        p = self.prof
        c = self.c
        d = self._d
        u1, u2 = u
        du1 = g.derivative(u1, 1)
        sq1 = u2 - c / (2.0 * d) * u1 - c * p.dlog_eta / (2.0 * (1.0 - p.eta) * d) * du1
        sq2 = du1 - p.dlog_eta * u1
        return g.integrate(2.0 * p.mu * sq1 ** 2 + 1.5 * (p.eta / d) * sq2 ** 2)

    def w_of_u(self, u: Pair) -> Pair:
        """The substitution turning G_c(u) into <T_c w, w>."""
        g = self.grid
        p = self.prof
        c = self.c
        d = self._d
        u1, u2 = u
        se = np.sqrt(p.eta)
        oc = 1.0 - p.eta
        du1 = g.derivative(u1, 1)
        # (d_eta)^2 / (mu eta) = ((2 - c^2) - 2 eta) / d ;  d_eta / mu = dlog / d
        w2 = se * (u2 - c * ((2.0 - c * c) - 2.0 * p.eta) / (4.0 * d * oc) * u1
                   - c * p.dlog_eta / (2.0 * d * oc) * du1)
        return Pair(se * u1, w2)

    def T(self, w: Pair) -> Pair:
        g = self.grid
        w1, w2 = w
        first = -g.derivative(self._T_a * g.derivative(w1, 1), 1) + self._T_V * w1 + self._T_b * w2
        return Pair(first, self._T_b * w1 + self._T_e * w2)

    def T_kernel_vector(self) -> Pair:
        p = self.prof
        e32 = p.eta ** 1.5
        return Pair(e32, self.c ** 3 * e32 / (4.0 * self._d * (1.0 - p.eta)))

    # ------------------------------------------------------------------
    # dense assembly

    def _require_dense(self):
        if self.grid.N > DENSE_MAX_N:
            raise DomainError(f"dense assembly is limited to N <= {DENSE_MAX_N}")

    def _divergence_block(self, a: np.ndarray) -> np.ndarray:
        D = self.grid.derivative_matrix()
        return D.T @ (a[:, None] * D)

    def _symmetrize(self, A: np.ndarray, what: str) -> np.ndarray:
        asym = float(np.max(np.abs(A - A.T)))
        scale = max(1.0, float(np.max(np.abs(A))))
        if asym > 1e-10 * scale:
            raise RuntimeError(f"{what} assembly asymmetric: {asym:.3g}")
        return 0.5 * (A + A.T)

    def H_matrix(self) -> np.ndarray:
        if "H" not in self._dense:
            self._require_dense()
            n = self.grid.N
            A = np.zeros((2 * n, 2 * n))
            A[:n, :n] = self._divergence_block(0.25 * self._inv) + np.diag(self._V)
            A[:n, n:] = A[n:, :n] = np.diag(-self._coupling)
            A[n:, n:] = np.diag(1.0 - self.prof.eta)
            self._dense["H"] = self._symmetrize(A, "H_c")
        return self._dense["H"]

    def T_matrix(self) -> np.ndarray:
        if "T" not in self._dense:
            self._require_dense()
            n = self.grid.N
            A = np.zeros((2 * n, 2 * n))
            A[:n, :n] = self._divergence_block(self._T_a) + np.diag(self._T_V)
            A[:n, n:] = A[n:, :n] = np.diag(self._T_b)
            A[n:, n:] = np.diag(self._T_e)
            self._dense["T"] = self._symmetrize(A, "T_c")
        return self._dense["T"]

    def X_gram(self) -> np.ndarray:
        """Gram matrix of the X inner product: dx * ((D^T D + I) (+) I)."""
        if "G" not in self._dense:
            n = self.grid.N
            D = self.grid.derivative_matrix()
            G = np.zeros((2 * n, 2 * n))
            G[:n, :n] = D.T @ D + np.eye(n)
            G[n:, n:] = np.eye(n)
            self._dense["G"] = self.grid.dx * 0.5 * (G + G.T)
        return self._dense["G"]

    def nyquist_pair(self) -> Pair:
        n = self.grid.N
        z = (-1.0) ** np.arange(n)
        return Pair(z, np.zeros(n))

    def _complement_basis(self, constraints: list[Pair]) -> np.ndarray:
        """Orthonormal basis of the complement of the constraints and the Nyquist pair."""
        C = np.column_stack([p.stack() for p in [self.nyquist_pair(), *constraints]])
        Q, _ = np.linalg.qr(C, mode="complete")
        return Q[:, C.shape[1]:]

    def _reduced_eigh(self, A: np.ndarray, constraints=()):
        Z = self._complement_basis(list(constraints))
        Ar = Z.T @ A @ Z
        w, V = sla.eigh(0.5 * (Ar + Ar.T))
        return w, Z @ V

    # ------------------------------------------------------------------
    # spectra

    def spectrum_H(self) -> SpectrumReport:
        w, V = self._reduced_eigh(self.H_matrix())
        neg = int(np.sum(w < -TOL_NEG))
        i0 = int(np.argmin(np.abs(w)))
        kvec = self.kernel_vector().stack()
        vec = V[:, i0]
        cos = abs(vec @ kvec) / (np.linalg.norm(vec) * np.linalg.norm(kvec))
        sine = math.sqrt(max(0.0, 1.0 - cos * cos))
        edge = essential_edge_Hc(self.c)
        above = w[(w > 10.0 * abs(w[i0]) + 1e-6)]
        return SpectrumReport(
            c=self.c, eigenvalues=w, count_negative=neg, kernel_residual=sine, essential_edge=edge,
            extras={
                "negative_eigenvalue": float(w[0]),
                "zero_eigenvalue": float(w[i0]),
                "first_positive_eigenvalue": float(above[0]) if above.size else None,
                "H_dxQ_residual": self.grid.norm_X(self.H(self.kernel_vector())),
            })

    def coercivity(self, constrained: bool = True) -> tuple[float, np.ndarray]:
        """Minimal generalized Rayleigh quotient <H u, u> / |u|_X^2.

        With ``constrained`` the minimum runs over the L^2-orthogonal
        complement of d_x Q_c and (1/2)(v_c, eta_c).  Returns the value and
        the minimizing pair (stacked).
        """
        Hf = self.grid.dx * self.H_matrix()
        G = self.X_gram()
        cons = [self.kernel_vector(), self.P_prime()] if constrained else []
        Z = self._complement_basis(cons)
        Hr = Z.T @ Hf @ Z
        Gr = Z.T @ G @ Z
        w, V = sla.eigh(0.5 * (Hr + Hr.T), 0.5 * (Gr + Gr.T), subset_by_index=[0, 0])
        return float(w[0]), Z @ V[:, 0]

    def inverse_bound_constant(self) -> float:
        """Smallest A with |eps|_X <= A |S H_c eps|_X on the constrained subspace."""
        n = self.grid.N
        H = self.H_matrix()
        G = self.X_gram()
        P = np.zeros_like(H)
        P[:n, n:] = P[n:, :n] = np.eye(n)
        SH = P @ H
        Z = self._complement_basis([self.kernel_vector(), self.P_prime()])
        Ar = Z.T @ (SH.T @ G @ SH) @ Z
        Gr = Z.T @ G @ Z
        w = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Gr + Gr.T), eigvals_only=True, subset_by_index=[0, 0])
        return 1.0 / math.sqrt(w[0])

    def spectrum_T(self) -> SpectrumReport:
        w, V = self._reduced_eigh(self.T_matrix())
        kvec = self.T_kernel_vector()
        tk = self.T(kvec)
        g = self.grid
        resid = math.sqrt(g.inner_l2(tk, tk) / g.inner_l2(kvec, kvec))
        i0 = int(np.argmin(np.abs(w)))
        vec = V[:, i0]
        kv = kvec.stack()
        cos = abs(vec @ kv) / (np.linalg.norm(vec) * np.linalg.norm(kv))
        rest = np.delete(w, i0)
        lam1 = float(rest.min())
        tau = tau_c(self.c)
        return SpectrumReport(
            c=self.c, eigenvalues=w, count_negative=int(np.sum(w < -TOL_NEG)),
            kernel_residual=resid, essential_edge=tau,
            extras={
                "zero_eigenvalue": float(w[i0]),
                "kernel_alignment_sine": math.sqrt(max(0.0, 1.0 - cos * cos)),
                "smallest_nonzero_eigenvalue": lam1,
                "tau_gap": tau - lam1,
                "zero_mode_isolation": lam1 / max(abs(float(w[i0])), 1e-300),
            })

    # ------------------------------------------------------------------
    # rigidity functionals

    def rigidity_functionals(self, u: Pair, kappa: float = 1.0, center: float = 0.0):
        """(I*, J*, I* + kappa J*) with I* = int x u1 u2 and J* = <M_c u, u>."""
        g = self.grid
        x = g.centered(center)
        u1, u2 = u
        I = g.integrate(x * u1 * u2)
        Jv = g.inner_l2(self.M(u), u)
        return I, Jv, I + kappa * Jv


# ----------------------------------------------------------------------
# functional interface


def apply_S(u: Pair) -> Pair:
    """Swap the two components."""
    return Pair(u.second.copy(), u.first.copy())


def apply_J(u: Pair, g: Grid) -> Pair:
    """J = -2 S d_x, i.e. (-2 d_x u2, -2 d_x u1)."""
    return Pair(-2.0 * g.derivative(u.second, 1), -2.0 * g.derivative(u.first, 1))


def apply_Hc(c: float, u: Pair, g: Grid) -> Pair:
    return SolitonOperators(c, g).H(u)


def remainder_R(c: float, eps: Pair, g: Grid, sigma_guard: float = 1e-3) -> Pair:
    return SolitonOperators(c, g).remainder(eps, sigma_guard)


def u_star(c: float, eps: Pair, g: Grid) -> Pair:
    return SolitonOperators(c, g).u_star(eps)


def Gc_form(c: float, u: Pair, g: Grid) -> tuple[float, float]:
    ops = SolitonOperators(c, g)
    return ops.G_bilinear(u), ops.G_explicit(u)


def spectrum_Hc(c: float, g: Grid, with_coercivity: bool = False) -> SpectrumReport:
    ops = SolitonOperators(c, g)
    rep = ops.spectrum_H()
    if with_coercivity:
        rep.coercivity = ops.coercivity()[0]
    return rep


def coercivity_Lambda(c: float, g: Grid) -> float:
    lam, vec = SolitonOperators(c, g).coercivity()
    if lam <= 0:
        log.error("constrained quadratic form is not positive: Lambda = %.3g", lam)
    return lam


def spectrum_Tc(c: float, g: Grid) -> SpectrumReport:
    return SolitonOperators(c, g).spectrum_T()


def rigidity_functionals(c: float, u: Pair, g: Grid, kappa: float = 1.0):
    return SolitonOperators(c, g).rigidity_functionals(u, kappa)


def energy_gradient(g: Grid, eta: np.ndarray, vee: np.ndarray) -> Pair:
    """E'(eta, v), used to cross-check the remainder R_c."""
    d = g.derivative(eta, 1)
    om = 1.0 - eta
    first = -0.25 * g.derivative(d / om, 1) + d ** 2 / (8.0 * om ** 2) - 0.5 * vee ** 2 + 0.5 * eta
    return Pair(first, om * vee)

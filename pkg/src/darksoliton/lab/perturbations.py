"""Initial-data generators: the soliton plus a small perturbation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ..errors import DomainError, GuardError
from ..grid import Grid, Pair
from ..hydro import HydroState, check_guard, soliton_state

KINDS = ("none", "gaussian_eta", "gaussian_v", "second_soliton", "random_localized")


@dataclass
class PerturbationSpec:
    kind: str = "gaussian_eta"
    amplitude: float = 0.02  # X-norm of the added pair (unused by second_soliton)
    width: float = 2.0
    offset: float = 0.0  # relative to the main soliton center
    speed: float = 1.35  # second_soliton only
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown perturbation kind {self.kind!r}; expected one of {KINDS}")
        if self.amplitude < 0 or not np.isfinite(self.amplitude):
            raise DomainError("perturbation amplitude must be finite and non-negative")
        if self.width <= 0:
            raise DomainError("perturbation width must be positive")
        if self.kind == "second_soliton" and not 0 < abs(self.speed) < np.sqrt(2.0):
            raise DomainError("second soliton speed must satisfy 0 < |c| < sqrt(2)")


def _normalize(g: Grid, u: Pair, amplitude: float) -> Pair:
    n = g.norm_X(u)
    return u * (amplitude / n) if n > 0 else u


def perturbation_field(g: Grid, spec: PerturbationSpec, center: float) -> Pair:
    """The additive pair for the non-soliton kinds, scaled to X-norm ``amplitude``."""
    spec.validate()
    y = g.centered(center + spec.offset)
    bump = np.exp(-(y / spec.width) ** 2)
    zero = np.zeros(g.N)
    if spec.kind == "none" or spec.amplitude == 0:
        return Pair(zero, zero.copy())
    if spec.kind == "gaussian_eta":
        return _normalize(g, Pair(bump, zero), spec.amplitude)
    if spec.kind == "gaussian_v":
        return _normalize(g, Pair(zero, bump), spec.amplitude)
    if spec.kind == "random_localized":
        rng = np.random.default_rng(spec.seed)
        comps = []
        for _ in range(2):
            fh = sfft.rfft(rng.standard_normal(g.N))
            fh[g.k > (2.0 / 3.0) * g.k_max] = 0.0
            comps.append(sfft.irfft(fh, n=g.N) * bump)
        return _normalize(g, Pair(*comps), spec.amplitude)
    raise DomainError(f"{spec.kind} is not an additive field perturbation")


def initial_state(g: Grid, c0: float, a0: float, spec: PerturbationSpec,
                  sigma_guard: float = 1e-3) -> HydroState:
    """Q_{c0,a0} plus the requested perturbation, checked against the eta < 1 guard."""
    spec.validate()
    s = soliton_state(c0, a0, g)
    if spec.kind == "second_soliton":
        other = soliton_state(spec.speed, a0 + spec.offset, g)
        s = HydroState(g, s.eta + other.eta, s.vee + other.vee, 0.0)
    else:
        u = perturbation_field(g, spec, a0)
        s = HydroState(g, s.eta + u.first, s.vee + u.second, 0.0)
    try:
        check_guard(s.eta, sigma_guard)
    except GuardError as exc:
        raise DomainError(f"perturbed initial data violate the eta < 1 guard: {exc}") from exc
    return s

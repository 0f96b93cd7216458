"""The acceptance battery: one machine-readable verdict per criterion.

Each ``criterion_*`` function returns a :class:`Verdict` holding the measured
values next to the thresholds they are compared with.  Expensive runs are
shared through :class:`Battery`, so the same trajectories feed several
criteria.  ``level="fast"`` shortens the horizons and trims the parameter
lists; ``level="full"`` uses the documented settings.
"""

from __future__ import annotations

import dataclasses
import math
import tempfile
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .. import diagnostics as diag
from ..grid import Grid, Pair
from ..hydro import energy, gp_integrate, integrate, periodic_wave, soliton_state, wave_to_madelung
from ..linear_ops import SolitonOperators, essential_edge_Hc, symbol_Hc, symbol_Tinf, tau_c
from ..modulation import solve
from ..soliton import SolitonParams, d_dc_profile, eval_hydro, profile_residual
from .config import GridConfig, RunConfig, write_json
from .perturbations import PerturbationSpec
from .runs import loglog_slope, run_simulation, simulate, summarize

LEVELS = ("fast", "full")

# (c, L, N) used for the dense spectral problems
SPECTRAL_GRIDS = {0.3: (20.0, 1024), 0.7: (30.0, 1024), 1.0: (40.0, 512), 1.3: (60.0, 512)}
MODULATION_SPEEDS = (0.6, 0.8, 1.0, 1.2, 1.35)
MODULATION_CENTERS = (-10.0, -5.0, 0.0, 5.0, 10.0)
# five-decimal reference value for tau_1; the closed form gives 1.6438928, so the
# comparison allows one unit in the last printed digit plus half a unit of rounding
TAU1_PRINTED = 1.64388
TAU1_PRINTED_TOL = 1.5e-5


@dataclass
class Verdict:
    id: int
    name: str
    passed: bool
    values: dict
    thresholds: dict
    seconds: float = 0.0
    notes: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.id:2d}: {self.name}"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Battery:
    level: str = "full"
    workdir: Path | None = None
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be one of {LEVELS}")
        if self.workdir is None:
            self.workdir = Path(tempfile.mkdtemp(prefix="darksoliton-verify-"))
        self.workdir = Path(self.workdir)

    @property
    def full(self) -> bool:
        return self.level == "full"

    @property
    def horizon(self) -> float:
        return 20.0 if self.full else 5.0

    def base_config(self, **kw) -> RunConfig:
        cfg = RunConfig(c0=1.0, a0=0.0, grid=GridConfig(60.0, 1024), T=self.horizon,
                        perturbation=PerturbationSpec("gaussian_eta", 0.02))
        return dataclasses.replace(cfg, **kw).validate()

    def perturbed(self, kind: str = "gaussian_eta", amplitude: float = 0.02):
        """(trajectory, track) of a perturbed c = 1 run, cached per (kind, amplitude)."""
        key = ("perturbed", kind, amplitude)
        if key not in self.cache:
            cfg = self.base_config(perturbation=PerturbationSpec(kind, amplitude))
            self.cache[key] = simulate(cfg)
        return self.cache[key]

    @cached_property
    def grid60(self) -> Grid:
        return Grid(60.0, 1024)


def _timed(fn):
    def wrapper(battery: Battery) -> Verdict:
        t0 = time.perf_counter()
        v = fn(battery)
        v.seconds = time.perf_counter() - t0
        return v
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ----------------------------------------------------------------------


@_timed
def criterion_01(b: Battery) -> Verdict:
    """Closed-form anchors at c = 1."""
    g = b.grid60
    p = eval_hydro(SolitonParams(1.0), g)
    E = energy(g, p.eta, p.vee)
    dc = d_dc_profile(SolitonParams(1.0), g)
    angle = g.inner_l2(p.pair(), Pair(dc.second, dc.first))
    # far-field symbol minimum over the discrete frequencies (k = 0 included)
    ks = np.concatenate([g.k, np.linspace(0.0, 4.0, 4001)])
    sym_min = float(np.min(np.linalg.eigvalsh(symbol_Hc(1.0, ks))[:, 0]))
    edge = 1.0 / (3.0 + math.sqrt(5.0))
    vals = {"E": E, "E_error": abs(E - 1.0 / 3.0), "angle": angle, "angle_error": abs(angle + 2.0),
            "symbol_min": sym_min, "edge_closed": essential_edge_Hc(1.0), "edge_error": abs(sym_min - edge)}
    thr = {"E_error": 1e-10, "angle_error": 1e-8, "edge_error": 1e-12}
    ok = all(vals[k] < t for k, t in thr.items())
    return Verdict(1, "closed-form anchors (E, angle, essential edge)", ok, vals, thr)


@_timed
def criterion_02(b: Battery) -> Verdict:
    """Profile residuals at N=1024, L=60."""
    g = b.grid60
    vals = {}
    for c in (0.5, 1.0, 1.3):
        r = profile_residual(SolitonParams(c), g)
        vals[f"c={c}"] = {"etac": r.etac, "first_integral": r.first_integral, "hgp": r.hgp,
                          "solc": r.solc, "solver_rhs": r.solver_rhs, "under_resolved": r.under_resolved}
    worst = max(max(v["etac"], v["hgp"], v["solc"]) for v in vals.values())
    vals["worst"] = worst
    thr = {"worst": 1e-8}
    return Verdict(2, "profile residuals (solc, etac, travelling-wave HGP)", worst < 1e-8, vals, thr,
                   notes="solver_rhs is informational (dealiased right-hand side at c=0.5 is resolution-limited)")


@_timed
def criterion_03(b: Battery) -> Verdict:
    """Conservation of E and P over the perturbed runs."""
    kinds = ("gaussian_eta", "gaussian_v") if b.full else ("gaussian_eta",)
    vals = {}
    for k in kinds:
        traj, _ = b.perturbed(k)
        vals[k] = {"drift_E": float(traj.drift_E.max()), "drift_P": float(traj.drift_P.max()),
                   "T": float(traj.times[-1])}
    worst = max(max(v["drift_E"], v["drift_P"]) for v in vals.values())
    vals["worst"] = worst
    thr = {"worst": 1e-8}
    return Verdict(3, f"conservation over T={b.horizon:g}", worst < 1e-8, vals, thr)


@_timed
def criterion_04(b: Battery) -> Verdict:
    """Exact soliton transport and HGP vs wave-form agreement."""
    g = b.grid60
    c, a = 1.0, 0.0
    T = 10.0
    traj = integrate(soliton_state(c, a, g), T)
    ref = eval_hydro(SolitonParams(c, a + c * T), g)
    transport = g.norm_X(Pair(traj.eta[-1] - ref.eta, traj.vee[-1] - ref.vee))

    T2 = 5.0
    hgp = integrate(soliton_state(c, a, g), T2, cadence=T2)
    w0 = periodic_wave(soliton_state(c, a, g))
    wt = gp_integrate(w0, T2, cadence=T2)
    back = wave_to_madelung(wt.state(len(wt) - 1))
    inner = np.abs(g.x) <= 0.5 * g.L
    dual = float(max(np.max(np.abs(back.eta - hgp.eta[-1])[inner]),
                     np.max(np.abs(back.vee - hgp.vee[-1])[inner])))
    vals = {"transport_X_error": transport, "dual_solver_interior_max": dual}
    thr = {"transport_X_error": 1e-6, "dual_solver_interior_max": 1e-5}
    ok = transport < 1e-6 and dual < 1e-5
    return Verdict(4, "soliton transport and dual-solver agreement", ok, vals, thr)


@_timed
def criterion_05(b: Battery) -> Verdict:
    """Modulation recovery, orthogonality and amplitude scaling."""
    g = b.grid60
    worst_a = worst_c = worst_r = 0.0
    speeds = MODULATION_SPEEDS if b.full else (0.8, 1.0, 1.35)
    centers = MODULATION_CENTERS if b.full else (-5.0, 0.0, 5.0)
    for c0 in speeds:
        for a0 in centers:
            p = solve(soliton_state(c0, a0, g))
            worst_a = max(worst_a, abs(p.a - a0))
            worst_c = max(worst_c, abs(p.c - c0))
            worst_r = max(worst_r, max(abs(p.residual[0]), abs(p.residual[1])))
    alphas = (0.04, 0.02, 0.01)
    eps, cp = [], []
    for al in alphas:
        traj, tk = b.perturbed("gaussian_eta", al)
        rep = tk.report()
        eps.append(rep["sup_eps_X"])
        cp.append(rep["sup_c_prime"])
        worst_r = max(worst_r, rep["max_residual"])
    s1, s2 = loglog_slope(alphas, eps), loglog_slope(alphas, cp)
    vals = {"grid": f"{len(speeds)}x{len(centers)}", "max_a_error": worst_a, "max_c_error": worst_c,
            "max_orthogonality_residual": worst_r, "slope_eps": s1, "slope_c_prime": s2,
            "sup_eps_X": eps, "sup_c_prime": cp}
    thr = {"recovery": 1e-10, "orthogonality": 1e-12, "slope_eps": [0.8, 1.2], "slope_c_prime": [1.7, 2.3]}
    ok = (max(worst_a, worst_c) < 1e-10 and worst_r <= 1e-12
          and 0.8 <= s1 <= 1.2 and 1.7 <= s2 <= 2.3)
    return Verdict(5, "modulation recovery, orthogonality, scaling slopes", ok, vals, thr)


@_timed
def criterion_06(b: Battery) -> Verdict:
    """Spectral structure of H_c and constrained coercivity."""
    speeds = tuple(SPECTRAL_GRIDS) if b.full else (1.0,)
    vals = {}
    ok = True
    for c in speeds:
        L, N = SPECTRAL_GRIDS[c]
        ops = SolitonOperators(c, Grid(L, N))
        rep = ops.spectrum_H()
        Hdc = ops.H(ops.d_c()) - ops.P_prime()
        res = ops.grid.norm_X(Hdc)
        lam, _ = ops.coercivity()
        vals[f"c={c}"] = {"grid": [L, N], "count_negative": rep.count_negative,
                          "negative_eigenvalue": rep.extras["negative_eigenvalue"],
                          "kernel_sine": rep.kernel_residual, "H_dcQ_residual": res, "Lambda": lam}
        ok &= rep.count_negative == 1 and rep.kernel_residual < 1e-4 and res < 1e-6 and lam > 0
    thr = {"count_negative": 1, "kernel_sine": 1e-4, "H_dcQ_residual": 1e-6, "Lambda": "> 0"}
    return Verdict(6, "spectral structure of H_c", bool(ok), vals, thr)


def random_smooth_pairs(g: Grid, n: int, seed: int = 0) -> list[Pair]:
    """Seeded smooth, rapidly decaying test pairs (Gaussian envelopes times low-order trig)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        comps = []
        for _ in range(2):
            x0 = rng.uniform(-3.0, 3.0)
            w = rng.uniform(1.0, 3.0)
            k = rng.uniform(0.0, 2.0)
            ph = rng.uniform(0.0, 2.0 * math.pi)
            comps.append(rng.normal() * np.exp(-((g.x - x0) / w) ** 2) * np.cos(k * g.x + ph))
        out.append(Pair(*comps))
    return out


@_timed
def criterion_07(b: Battery) -> Verdict:
    """Bilinear and explicit forms of G_c."""
    g = b.grid60
    vals = {}
    worst_rel = worst_q = 0.0
    for c in (0.7, 1.0):
        ops = SolitonOperators(c, g)
        rels = []
        for u in random_smooth_pairs(g, 20, seed=int(100 * c)):
            gb, ge = ops.G_bilinear(u), ops.G_explicit(u)
            rels.append(abs(gb - ge) / max(abs(ge), 1e-300))
        q = ops.prof.pair()
        gq = max(abs(ops.G_bilinear(q)), abs(ops.G_explicit(q)))
        vals[f"c={c}"] = {"max_relative_gap": max(rels), "G_of_Q": gq}
        worst_rel = max(worst_rel, max(rels))
        worst_q = max(worst_q, gq)
    thr = {"max_relative_gap": 1e-10, "G_of_Q": 1e-8}
    return Verdict(7, "G_c bilinear vs explicit form", worst_rel < 1e-10 and worst_q <= 1e-8, vals, thr)


@_timed
def criterion_08(b: Battery) -> Verdict:
    """T_c kernel, essential-edge comparison and zero-mode isolation at c = 1."""
    L, N = SPECTRAL_GRIDS[1.0]
    rep = SolitonOperators(1.0, Grid(L, N)).spectrum_T()
    tau = tau_c(1.0)
    tau_symbol = float(np.linalg.eigvalsh(symbol_Tinf(1.0, 0.0))[0])
    vals = {"kernel_residual": rep.kernel_residual, "tau_1": tau, "tau_1_symbol": tau_symbol,
            "tau_1_vs_printed": abs(tau - TAU1_PRINTED),
            "smallest_nonzero_eigenvalue": rep.extras["smallest_nonzero_eigenvalue"],
            "gap": rep.extras["tau_gap"], "zero_eigenvalue": rep.extras["zero_eigenvalue"],
            "zero_mode_isolation": rep.extras["zero_mode_isolation"],
            "count_negative": rep.count_negative}
    thr = {"kernel_residual": 1e-5, "tau_1_vs_symbol": 1e-12, "tau_1_vs_printed": TAU1_PRINTED_TOL,
           "zero_mode_isolation": 100.0}
    ok = (rep.kernel_residual < 1e-5 and abs(tau - tau_symbol) < 1e-12
          and abs(tau - TAU1_PRINTED) <= TAU1_PRINTED_TOL
          and rep.extras["zero_mode_isolation"] > 100.0)
    return Verdict(8, "T_c kernel, edge and isolated zero mode", ok, vals, thr,
                   notes="gap = tau_1 - smallest nonzero eigenvalue (positive: eigenvalue below the edge)")


@_timed
def criterion_09(b: Battery) -> Verdict:
    """Monotonicity and the time-derivative identity on the alpha = 0.02 run."""
    traj, tk = b.perturbed("gaussian_eta", 0.02)
    cfg = diag.MonotonicityConfig(1.0, defect_slack=1e-6)
    rep = diag.monotonicity_check(traj, tk, cfg)
    defects = {}
    for R in cfg.R_list:
        for s in (-cfg.sigma_max, 0.0, cfg.sigma_max):
            defects[f"R={R:g},sigma={s:.4g}"] = diag.didt_identity_check(traj, tk, R, s, cfg.nu).max_defect
    worst = max(defects.values())
    vals = {"violations": rep.violations, "worst_margin": rep.worst_margin,
            "differential_bound_violations": len(rep.mono_violations),
            "identity_max_defect": worst, "identity_defects": defects}
    thr = {"slack": 1e-6, "identity_max_defect": 1e-4}
    return Verdict(9, "monotonicity inequality and momentum identity", rep.ok and worst < 1e-4, vals, thr)


@_timed
def criterion_10(b: Battery) -> Verdict:
    """Virial identity for a free Gaussian and a forced case."""
    g = Grid(40.0, 512)
    u0 = np.exp(-0.5 * (g.x - 1.0) ** 2 + 0.5j * g.x)

    def forcing(x, t):
        return 0.2 * np.exp(-(x + 1.0) ** 2) * np.exp(1j * (0.7 * t + 0.3 * x))

    free = diag.virial_identity_check(g, u0, None, T=2.0)
    forced = diag.virial_identity_check(g, u0, forcing, T=2.0)
    vals = {"free_lhs": free.lhs, "free_defect": free.defect,
            "forced_lhs": forced.lhs, "forced_defect": forced.defect,
            "under_resolved": free.under_resolved or forced.under_resolved}
    thr = {"defect": 1e-6}
    return Verdict(10, "virial identity (free and forced)", free.defect < 1e-6 and forced.defect < 1e-6,
                   vals, thr)


@_timed
def criterion_11(b: Battery) -> Verdict:
    """Settling of c(t), decay of the windowed perturbation, b' vs c."""
    T = 60.0 if b.full else 30.0
    cfg = b.base_config(T=T, frame_speed=1.0, sponge=1.0)
    traj, tk = simulate(cfg)
    s = summarize(cfg, traj, tk)
    vals = {"T": T, "c_tail_std": s.c_tail_std, "c_final": s.c_final,
            "window_eps_final": s.window_eps_final, "window_eps_post_max": s.window_eps_post_max,
            "window_eps_ratio": s.window_eps_ratio, "b_prime_minus_c": s.b_prime_minus_c,
            "status": s.status}
    thr = {"c_tail_std": 5e-4, "window_eps_ratio": 0.5, "b_prime_minus_c": 2e-3}
    ok = (s.ok and s.c_tail_std < 5e-4 and s.window_eps_ratio <= 0.5 and abs(s.b_prime_minus_c) < 2e-3)
    return Verdict(11, "asymptotic-stability surrogate", ok, vals, thr)


@_timed
def criterion_12(b: Battery) -> Verdict:
    """Byte-identical CSVs from identical config and seed."""
    cfg = RunConfig(c0=0.9, a0=-3.0, grid=GridConfig(40.0, 256), T=2.0,
                    perturbation=PerturbationSpec("random_localized", 0.02, seed=12345))
    d1, d2 = b.workdir / "repro_1", b.workdir / "repro_2"
    run_simulation(cfg, d1)
    run_simulation(cfg, d2)
    names = sorted(p.name for p in d1.glob("*.csv"))
    same = {n: (d1 / n).read_bytes() == (d2 / n).read_bytes() for n in names}
    vals = {"files": names, "identical": same}
    return Verdict(12, "byte-identical reproducibility", bool(names) and all(same.values()), vals, {})


CRITERIA = (criterion_01, criterion_02, criterion_03, criterion_04, criterion_05, criterion_06,
            criterion_07, criterion_08, criterion_09, criterion_10, criterion_11, criterion_12)


def run_verification_suite(level: str = "fast", out: str | Path | None = None,
                           only=None) -> list[Verdict]:
    """Run the battery; failures are reported as data (a crashed criterion counts as failed)."""
    battery = Battery(level, Path(out) / "work" if out is not None else None)
    verdicts = []
    for fn in CRITERIA:
        num = int(fn.__name__.split("_")[1])
        if only is not None and num not in only:
            continue
        try:
            v = fn(battery)
        except Exception as exc:  # a crash is a failed verdict, not an aborted suite
            v = Verdict(num, fn.__doc__.strip().splitlines()[0], False, {}, {},
                        notes=f"{type(exc).__name__}: {exc}")
        verdicts.append(v)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_json(Path(out) / "verify.json", {"level": level, "criteria": [v.to_dict() for v in verdicts],
                                               "passed": all(v.passed for v in verdicts)})
    return verdicts

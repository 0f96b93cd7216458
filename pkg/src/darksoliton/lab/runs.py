"""Experiment scenarios: a single perturbed run and an amplitude sweep."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import diagnostics as diag
from ..errors import ConfigError, ModulationError, SweepError
from ..hydro import Trajectory, integrate, sponge_profile
from ..modulation import TRACK_COLUMNS, ModulationTrack, track
from .config import RunConfig, write_csv, write_json
from .perturbations import initial_state

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "x", "eta", "v")
SWEEP_COLUMNS = ("alpha", "sup_eps_X", "sup_c_prime", "sup_a_prime_minus_c", "c_final")


@dataclass
class RunSummary:
    status: str
    config_hash: str
    T_reached: float
    n_samples: int
    drift_E: float
    drift_P: float
    sup_eps_X: float
    sup_c_prime: float
    sup_a_prime_minus_c: float
    c_final: float
    c_tail_mean: float
    c_tail_std: float
    b_prime_minus_c: float
    window_eps_final: float
    window_eps_post_max: float
    window_eps_ratio: float
    max_orthogonality_residual: float
    monotonicity_violations: int
    consint_max_defect: float
    virial_defect: float
    error: dict | None = None
    files: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _tail(values: np.ndarray, fraction: float = 0.25) -> np.ndarray:
    n = max(2, int(math.ceil(fraction * len(values))))
    return values[-n:]


def simulate(cfg: RunConfig) -> tuple[Trajectory, ModulationTrack | None]:
    """Build the initial state, integrate and modulate (no file output)."""
    cfg.validate()
    g = cfg.make_grid()
    s0 = initial_state(g, cfg.c0, cfg.a0, cfg.perturbation, cfg.sigma_guard)
    sponge = sponge_profile(g, strength=cfg.sponge) if cfg.sponge > 0 else None
    traj = integrate(s0, cfg.T, dt=cfg.dt, cadence=cfg.cadence, sigma_guard=cfg.sigma_guard,
                     frame_speed=cfg.frame_speed, sponge=sponge)
    try:
        tk = track(traj, guess=(cfg.a0, cfg.c0), partial=True)
    except ModulationError as exc:
        log.error("modulation failed at the first sample: %s", exc)
        tk = None
    return traj, tk


def summarize(cfg: RunConfig, traj: Trajectory, tk: ModulationTrack | None) -> RunSummary:
    g = traj.grid
    nan = float("nan")
    status = "ok"
    error = traj.error
    if error is not None:
        status = error["kind"]
    if tk is None:
        return RunSummary(status="modulation", config_hash=cfg.config_hash(),
                          T_reached=float(traj.times[-1]), n_samples=len(traj),
                          drift_E=float(traj.drift_E.max()), drift_P=float(traj.drift_P.max()),
                          sup_eps_X=nan, sup_c_prime=nan, sup_a_prime_minus_c=nan, c_final=nan,
                          c_tail_mean=nan, c_tail_std=nan, b_prime_minus_c=nan, window_eps_final=nan,
                          window_eps_post_max=nan, window_eps_ratio=nan,
                          max_orthogonality_residual=nan, monotonicity_violations=-1,
                          consint_max_defect=nan, virial_defect=_virial_default(g), error=error)
    if tk.error is not None:
        status, error = "modulation", tk.error
        traj = traj.head(len(tk.points))
    rep = tk.report()
    d = cfg.diagnostics
    c = tk.c
    ap = tk.a_prime
    wn = np.array([g.norm_X_window(p.eps, 0.0, d.window_halfwidth) for p in tk.points])
    post = wn[tk.times >= tk.times[0] + d.transient_fraction * (tk.times[-1] - tk.times[0])]
    post_max = float(post.max()) if post.size else nan

    violations, consint = -1, nan
    if d.monotonicity and len(traj) >= 5:
        mcfg = diag.MonotonicityConfig(cfg.c0, R_list=tuple(d.R_list), defect_slack=d.defect_slack)
        mrep = diag.monotonicity_check(traj, tk, mcfg, sigmas=(0.0,))
        violations = len(mrep.violations)
        consint = max(diag.didt_identity_check(traj, tk, R, 0.0, mcfg.nu).max_defect for R in d.R_list)

    return RunSummary(
        status=status, config_hash=cfg.config_hash(), T_reached=float(traj.times[-1]),
        n_samples=len(traj), drift_E=float(traj.drift_E.max()), drift_P=float(traj.drift_P.max()),
        sup_eps_X=rep["sup_eps_X"], sup_c_prime=rep["sup_c_prime"],
        sup_a_prime_minus_c=rep["sup_a_prime_minus_c"], c_final=float(c[-1]),
        c_tail_mean=float(np.mean(_tail(c))), c_tail_std=float(np.std(_tail(c))),
        b_prime_minus_c=float(np.mean(_tail(ap)) - np.mean(_tail(c))),
        window_eps_final=float(wn[-1]), window_eps_post_max=post_max,
        window_eps_ratio=float(wn[-1] / post_max) if post_max > 0 else nan,
        max_orthogonality_residual=rep["max_residual"], monotonicity_violations=violations,
        consint_max_defect=float(consint), virial_defect=_virial_default(g), error=error,
    )


def _virial_default(g) -> float:
    """Virial-identity defect for a free moving Gaussian on the run grid."""
    u0 = np.exp(-0.5 * (g.x - 1.0) ** 2 + 0.5j * g.x)
    return diag.virial_identity_check(g, u0, None, T=1.0).defect


def run_simulation(cfg: RunConfig, out: str | Path | None = None) -> RunSummary:
    """Run one experiment and write config.json, summary.json and the CSV files."""
    t_start = time.perf_counter()
    cfg.validate()
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash()
    write_json(out / "config.json", cfg.to_dict(), h)

    traj, tk = simulate(cfg)
    summary = summarize(cfg, traj, tk)
    files = {"config": "config.json"}
    if tk is not None:
        n = len(tk.points)
        write_csv(out / "track.csv", TRACK_COLUMNS, tk.rows(), h)
        files["track"] = "track.csv"
        nu = diag.nu_c(cfg.c0)
        prof = diag.momentum_profile(traj.head(n), tk, cfg.diagnostics.R_list, nu)
        write_csv(out / "momentum.csv", diag.MOMENTUM_COLUMNS, prof.rows(), h)
        files["momentum"] = "momentum.csv"
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, _trajectory_rows(traj, cfg.diagnostics.trajectory_every), h)
    files["trajectory"] = "trajectory.csv"
    summary.files = files
    summary.seconds = time.perf_counter() - t_start
    write_json(out / "summary.json", summary.to_dict(), h)
    return summary


def _trajectory_rows(traj: Trajectory, every: int):
    """Rows (t, x_lab, eta, v); x_lab = x + V t for a run in a frame moving at V."""
    g = traj.grid
    for i in range(0, len(traj), every):
        t = float(traj.times[i])
        x = g.x + traj.frame_speed * t
        for j in range(g.N):
            yield (t, x[j], traj.eta[i, j], traj.vee[i, j])


# ----------------------------------------------------------------------
# amplitude sweep


def _member(args):
    cfg, out = args
    return run_simulation(cfg, out)


@dataclass
class SweepResult:
    alphas: list
    summaries: list
    slope_eps: float
    slope_c_prime: float

    def rows(self):
        for a, s in zip(self.alphas, self.summaries):
            yield (a, s.sup_eps_X, s.sup_c_prime, s.sup_a_prime_minus_c, s.c_final)

    def to_dict(self) -> dict:
        return {"alphas": self.alphas, "slope_eps": self.slope_eps, "slope_c_prime": self.slope_c_prime,
                "members": [s.to_dict() for s in self.summaries]}


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def run_scaling_sweep(base: RunConfig, alphas, out: str | Path | None = None,
                      max_workers: int = 1) -> SweepResult:
    """Run one member per amplitude and fit log-log slopes of sup|eps|_X and sup|c'|."""
    alphas = [float(a) for a in alphas]
    if len(alphas) < 3:
        raise ConfigError("a scaling sweep needs at least three amplitudes")
    if any(a <= 0 for a in alphas):
        raise ConfigError("sweep amplitudes must be positive (alpha = 0 is a degenerate fit point)")
    if len(set(alphas)) != len(alphas):
        raise ConfigError("sweep amplitudes must be distinct")
    out = Path(out if out is not None else base.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, a in enumerate(alphas):
        cfg = dataclasses.replace(base, perturbation=dataclasses.replace(base.perturbation, amplitude=a))
        jobs.append((cfg.validate(), out / f"member_{i:02d}"))

    summaries = []
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_member, j) for j in jobs]
            for i, f in enumerate(futures):
                try:
                    summaries.append(f.result())
                except Exception as exc:
                    raise SweepError(f"member {i} (alpha={alphas[i]}) failed: {exc}", member=i) from exc
    else:
        for i, j in enumerate(jobs):
            try:
                summaries.append(_member(j))
            except Exception as exc:
                raise SweepError(f"member {i} (alpha={alphas[i]}) failed: {exc}", member=i) from exc
    for i, s in enumerate(summaries):
        if not s.ok:
            raise SweepError(f"member {i} (alpha={alphas[i]}) ended with status {s.status}", member=i)

    res = SweepResult(alphas, summaries,
                      loglog_slope(alphas, [s.sup_eps_X for s in summaries]),
                      loglog_slope(alphas, [s.sup_c_prime for s in summaries]))
    h = base.config_hash()
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, res.rows(), h)
    write_json(out / "sweep.json", res.to_dict(), h)
    return res

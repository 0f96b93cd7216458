"""Command-line entry point: ``darksoliton <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import diagnostics as diag
from ..errors import ConfigError, DomainError
from ..grid import Grid
from ..hydro import HydroState, energy, momentum
from ..linear_ops import SolitonOperators
from ..modulation import TRACK_COLUMNS, ModulationTrack, solve
from ..soliton import SolitonParams, conserved_closed, eval_hydro, profile_residual
from .config import RunConfig, load_config, write_csv, write_json
from .runs import run_scaling_sweep, run_simulation, simulate

log = logging.getLogger("darksoliton")


def _common(p: argparse.ArgumentParser, grid: bool = False, speed: bool = False):
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults apply to missing keys)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="perturbation seed (unsigned 64-bit)")
    if speed:
        p.add_argument("--c", type=float, help="soliton speed (defaults to the config c0)")
    if grid:
        p.add_argument("--L", type=float, help="half-length of the periodic box")
        p.add_argument("--N", type=int, help="number of grid points")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="darksoliton", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("soliton", help="sample the travelling wave Q_c on a grid")
    _common(p, grid=True, speed=True)
    p.add_argument("--a", type=float, default=0.0, help="center")

    p = sub.add_parser("simulate", help="perturbed run with modulation and diagnostics")
    _common(p)

    p = sub.add_parser("modulate", help="modulation track of a trajectory CSV written by simulate")
    _common(p)
    p.add_argument("--input", type=Path, required=True, help="trajectory.csv (t,x,eta,v)")

    p = sub.add_parser("spectrum", help="discrete spectrum of H_c or T_c")
    _common(p, grid=True, speed=True)
    p.add_argument("--operator", choices=("H", "T"), default="H")
    p.add_argument("--count", type=int, default=50, help="number of eigenvalues in the CSV")

    p = sub.add_parser("coercivity", help="constrained coercivity constant for several speeds")
    _common(p, grid=True)
    p.add_argument("--speeds", default="0.3,0.7,1.0,1.3", help="comma-separated speeds")

    p = sub.add_parser("monotonicity", help="localized momentum and monotonicity report")
    _common(p)

    p = sub.add_parser("virial", help="virial identity for the linear Schrodinger flow")
    _common(p, grid=True)
    p.add_argument("--T", type=float, default=2.0, help="length of the time window")
    p.add_argument("--forcing", type=float, default=0.0, help="amplitude of a localized forcing term")

    p = sub.add_parser("sweep", help="amplitude sweep with log-log slopes")
    _common(p)
    p.add_argument("--alphas", default="0.04,0.02,0.01", help="comma-separated amplitudes (at least three)")
    p.add_argument("--workers", type=int, default=1, help="member runs executed in parallel")

    p = sub.add_parser("verify", help="run the acceptance battery")
    _common(p)
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--only", help="comma-separated criterion numbers")
    return ap


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _config(args) -> RunConfig:
    cfg = load_config(args.config, seed=args.seed)
    if args.out is not None:
        cfg.out = str(args.out)
    return cfg


def _grid(args, cfg: RunConfig) -> Grid:
    L = args.L if getattr(args, "L", None) is not None else cfg.grid.L
    N = args.N if getattr(args, "N", None) is not None else cfg.grid.N
    return Grid(float(L), int(N))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------
# subcommands


def cmd_soliton(args) -> int:
    cfg = _config(args)
    c = args.c if args.c is not None else cfg.c0
    g = _grid(args, cfg)
    p = eval_hydro(SolitonParams(c, args.a), g)
    out = _outdir(cfg)
    h = cfg.config_hash()
    write_csv(out / "soliton.csv", ("x", "eta", "v", "d_eta", "mu"),
              zip(g.x, p.eta, p.vee, p.d_eta, p.mu), h)
    E, P, dP = conserved_closed(c)
    res = profile_residual(SolitonParams(c, args.a), g)
    info = {"c": c, "a": args.a, "L": g.L, "N": g.N,
            "E_quadrature": energy(g, p.eta, p.vee), "E_closed": E,
            "P_quadrature": momentum(g, p.eta, p.vee), "P_closed": P, "dP_dc": dP,
            "residuals": dataclasses.asdict(res)}
    write_json(out / "soliton.json", info, h)
    print(f"wrote {out / 'soliton.csv'} (max residual {res.max():.3g})")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    s = run_simulation(cfg)
    print(f"status={s.status} T={s.T_reached:g} sup|eps|_X={s.sup_eps_X:.4g} "
          f"c_final={s.c_final:.10g} drift_E={s.drift_E:.3g} -> {cfg.out}")
    return 0 if s.ok else 2


def read_trajectory_csv(path: Path):
    """Parse trajectory.csv into (grid, times, eta, vee, frame offsets)."""
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    if data.shape[1] != 4:
        raise ConfigError(f"{path}: expected columns t,x,eta,v")
    times = np.unique(data[:, 0])
    N = len(data) // len(times)
    if N * len(times) != len(data):
        raise ConfigError(f"{path}: ragged trajectory samples")
    block = data.reshape(len(times), N, 4)
    dx = block[0, 1, 1] - block[0, 0, 1]
    g = Grid(0.5 * N * dx, N)
    offsets = block[:, 0, 1] + g.L  # x_lab of the first node minus -L
    return g, block[:, 0, 0], block[:, :, 2], block[:, :, 3], offsets


def cmd_modulate(args) -> int:
    cfg = _config(args)
    g, times, eta, vee, offsets = read_trajectory_csv(args.input)
    points = []
    guess = None
    for i, (t, e, v, off) in enumerate(zip(times, eta, vee, offsets)):
        p = solve(HydroState(g, e, v, float(t)), guess)
        p.offset = float(off)
        p.a += p.offset
        points.append(p)
        if i + 1 < len(times):
            # samples may be sparse: predict the next center from the current speed
            a_next = p.a + p.c * (times[i + 1] - t)
            guess = (a_next - offsets[i + 1], p.c)
    tk = ModulationTrack(points)
    out = _outdir(cfg)
    write_csv(out / "track.csv", TRACK_COLUMNS, tk.rows(), cfg.config_hash())
    print(json.dumps(tk.report(), indent=2))
    return 0


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    c = args.c if args.c is not None else cfg.c0
    ops = SolitonOperators(c, _grid(args, cfg))
    rep = ops.spectrum_H() if args.operator == "H" else ops.spectrum_T()
    out = _outdir(cfg)
    h = cfg.config_hash()
    name = f"spectrum_{args.operator}"
    write_json(out / f"{name}.json", rep.to_dict(args.count), h)
    write_csv(out / f"{name}.csv", ("index", "eigenvalue"),
              ((i, lam) for i, lam in enumerate(rep.eigenvalues[:args.count])), h)
    print(f"{args.operator}_c, c={c}: negative={rep.count_negative} "
          f"lowest={rep.eigenvalues[0]:.6g} edge={rep.essential_edge:.6g}")
    return 0


def cmd_coercivity(args) -> int:
    cfg = _config(args)
    g = _grid(args, cfg)
    rows = []
    for c in _floats(args.speeds):
        lam, _ = SolitonOperators(c, g).coercivity()
        rows.append((c, lam))
        print(f"c={c:g}: Lambda={lam:.6g}")
    out = _outdir(cfg)
    h = cfg.config_hash()
    write_csv(out / "coercivity.csv", ("c", "Lambda"), rows, h)
    return 0 if all(lam > 0 for _, lam in rows) else 2


def cmd_monotonicity(args) -> int:
    cfg = _config(args)
    traj, tk = simulate(cfg)
    if tk is None:
        print("modulation failed at the first sample", file=sys.stderr)
        return 2
    traj = traj.head(len(tk.points))
    d = cfg.diagnostics
    mcfg = diag.MonotonicityConfig(cfg.c0, R_list=tuple(d.R_list), defect_slack=d.defect_slack)
    rep = diag.monotonicity_check(traj, tk, mcfg)
    out = _outdir(cfg)
    h = cfg.config_hash()
    prof = diag.momentum_profile(traj, tk, d.R_list, mcfg.nu)
    write_csv(out / "momentum.csv", diag.MOMENTUM_COLUMNS, prof.rows(), h)
    report = rep.to_dict()
    report["identity_max_defect"] = max(diag.didt_identity_check(traj, tk, R, 0.0, mcfg.nu).max_defect
                                        for R in d.R_list)
    write_json(out / "monotonicity.json", report, h)
    print(f"violations={len(rep.violations)} identity_max_defect={report['identity_max_defect']:.3g}")
    return 0 if rep.ok else 2


def cmd_virial(args) -> int:
    cfg = _config(args)
    g = _grid(args, cfg)
    u0 = np.exp(-0.5 * (g.x - 1.0) ** 2 + 0.5j * g.x)
    F = None
    if args.forcing:
        amp = args.forcing

        def F(x, t):
            return amp * np.exp(-(x + 1.0) ** 2) * np.exp(1j * (0.7 * t + 0.3 * x))
    res = diag.virial_identity_check(g, u0, F, T=args.T)
    out = _outdir(cfg)
    write_json(out / "virial.json", {"lhs": res.lhs, "rhs": res.rhs, "defect": res.defect,
                                     "terms": res.terms, "under_resolved": res.under_resolved},
               cfg.config_hash())
    print(f"lhs={res.lhs:.12g} rhs={res.rhs:.12g} defect={res.defect:.3g}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    res = run_scaling_sweep(cfg, _floats(args.alphas), cfg.out, max_workers=args.workers)
    print(f"slope |eps|_X = {res.slope_eps:.4f}, slope sup|c'| = {res.slope_c_prime:.4f}")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_verification_suite
    out = args.out if args.out is not None else Path("verify") / args.level
    only = {int(x) for x in args.only.split(",")} if args.only else None
    verdicts = run_verification_suite(args.level, out, only=only)
    for v in verdicts:
        print(v.line() + (f"  ({v.notes})" if not v.passed and v.notes else ""))
    print(f"report: {Path(out) / 'verify.json'}")
    return 0 if all(v.passed for v in verdicts) else 1


COMMANDS = {
    "soliton": cmd_soliton, "simulate": cmd_simulate, "modulate": cmd_modulate,
    "spectrum": cmd_spectrum, "coercivity": cmd_coercivity, "monotonicity": cmd_monotonicity,
    "virial": cmd_virial, "sweep": cmd_sweep, "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

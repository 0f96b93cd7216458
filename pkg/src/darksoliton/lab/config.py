"""Run configuration: JSON in, validated dataclasses, resolved JSON and hash out."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..grid import Grid
from .perturbations import KINDS, PerturbationSpec

SCHEMA_VERSION = 1


@dataclass
class GridConfig:
    L: float = 60.0
    N: int = 1024


@dataclass
class DiagnosticsConfig:
    R_list: list = field(default_factory=lambda: [-10.0, -5.0, 0.0, 5.0, 10.0])
    defect_slack: float = 1e-6
    window_halfwidth: float = 20.0
    transient_fraction: float = 0.25
    monotonicity: bool = True
    trajectory_every: int = 10  # write every n-th stored sample to trajectory.csv


@dataclass
class RunConfig:
    c0: float = 1.0
    a0: float = 0.0
    grid: GridConfig = field(default_factory=GridConfig)
    T: float = 20.0
    dt: float | None = None
    cadence: float = 0.1
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    frame_speed: float = 0.0
    sponge: float = 0.0  # damping strength near the box edges; 0 disables
    sigma_guard: float = 1e-3
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    out: str = "runs/default"

    # ------------------------------------------------------------------

    def validate(self) -> RunConfig:
        if not (0.0 < abs(self.c0) < math.sqrt(2.0)):
            raise ConfigError(f"c0 = {self.c0} must satisfy 0 < |c0| < sqrt(2)")
        for name in ("c0", "a0", "T", "cadence", "frame_speed", "sponge", "sigma_guard"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not (self.grid.L > 0):
            raise ConfigError("grid.L must be positive")
        if int(self.grid.N) != self.grid.N or self.grid.N < 16 or self.grid.N % 2:
            raise ConfigError("grid.N must be an even integer >= 16")
        if abs(self.a0) >= self.grid.L:
            raise ConfigError("a0 must lie inside the box")
        if self.T < 0:
            raise ConfigError("T must be non-negative")
        if self.cadence <= 0:
            raise ConfigError("cadence must be positive")
        if self.dt is not None and not (0 < self.dt <= self.cadence):
            raise ConfigError("dt must lie in (0, cadence]")
        if self.sponge < 0:
            raise ConfigError("sponge strength must be non-negative")
        if not (0 < self.sigma_guard < 1):
            raise ConfigError("sigma_guard must lie in (0, 1)")
        if self.perturbation.kind not in KINDS:
            raise ConfigError(f"perturbation.kind must be one of {KINDS}")
        try:
            self.perturbation.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        d = self.diagnostics
        if d.window_halfwidth <= 0 or not (0 <= d.transient_fraction < 1):
            raise ConfigError("diagnostics window/transient settings out of range")
        if d.trajectory_every < 1:
            raise ConfigError("diagnostics.trajectory_every must be >= 1")
        return self

    def make_grid(self) -> Grid:
        return Grid(float(self.grid.L), int(self.grid.N))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 of the canonical resolved config, excluding the output directory."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        kw = _take(cls, data, "config")
        if "grid" in kw:
            kw["grid"] = GridConfig(**_take(GridConfig, kw["grid"], "grid"))
        if "perturbation" in kw:
            kw["perturbation"] = PerturbationSpec(**_take(PerturbationSpec, kw["perturbation"], "perturbation"))
        if "diagnostics" in kw:
            kw["diagnostics"] = DiagnosticsConfig(**_take(DiagnosticsConfig, kw["diagnostics"], "diagnostics"))
        return cls(**kw).validate()


def _take(cls, data, where: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return dict(data)


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    """Read a JSON config (or start from defaults) and apply top-level overrides."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    cfg = RunConfig.from_dict(data)
    seed = overrides.pop("seed", None)
    if seed is not None:
        if int(seed) < 0 or int(seed) >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg.perturbation = dataclasses.replace(cfg.perturbation, seed=int(seed))
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


# ----------------------------------------------------------------------
# deterministic serialization


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path: str | Path, columns, rows, config_hash: str) -> Path:
    """CSV with a ``# config_sha256=<hash>`` first line and 17-digit floats."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def write_json(path: str | Path, obj, config_hash: str | None = None) -> Path:
    if config_hash is not None:
        obj = {"config_sha256": config_hash, **obj}
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")

"""Experiment configs, single runs and eps-sweeps with on-disk manifests.

Config files are JSON objects (schema version 1)::

    {
      "version": 1,
      "epsilon": 0.1,            # optional for sweeps
      "nu": 0.5,                 # fixed-viscosity regime, or
      "alpha": 1.0,              # combined regime nu = eps**alpha
      "dt_max": 0.01, "t_end": 2.0,
      "cfl": 0.5, "eps_dt_factor": 1.0, "dealias": true,
      "sample_every": 1, "integrator": "IFRK2", "hs_order": 2.5,
      "grid": {"n1": 128, "n2": 256, "L1": 6.283..., "L2": 25.13...},
      "data": {"amp": 1.0, "seed": 0, "profile": "hat", "width": 2.0,
               "n_modes": 3, "eps_power": 0.0},
      "snapshots": [0.5, 1.0, 2.0],
      "sweep": {"K_fraction": 0.5, "T": 2.0}
    }

Unknown keys anywhere are errors.  Every output is first written with a
``.partial`` suffix and renamed once the manifest is complete.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import ConvergenceReport, constraint_residual, convergence_metric, energy_ledger, time_average
from .limits import project_to_zonal
from .snapshot import write_csv, write_snapshot, write_zonal_csv
from .solver import (
    Combined,
    FixedViscosity,
    IllPreparedFamily,
    SolverConfig,
    Trajectory,
    integrate,
    make_ill_prepared_data,
)
from .spectral import GridSpec

SCHEMA_VERSION = 1
OUT_ENV = "SQG_OUT_DIR"
DEFAULT_OUT = "sqg_out"

_TOP_KEYS = {
    "version",
    "epsilon",
    "nu",
    "alpha",
    "dt_max",
    "t_end",
    "cfl",
    "eps_dt_factor",
    "dealias",
    "sample_every",
    "integrator",
    "hs_order",
    "grid",
    "data",
    "snapshots",
    "sweep",
}
_GRID_KEYS = {"n1", "n2", "L1", "L2"}
_DATA_KEYS = {"amp", "seed", "profile", "width", "n_modes", "eps_power"}
_SWEEP_KEYS = {"K_fraction", "T"}


class ConfigError(ValueError):
    """The experiment config is unreadable or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    family: IllPreparedFamily
    solver: SolverConfig
    epsilon: float | None = None
    nu: float | None = None
    alpha: float | None = None
    K_fraction: float = 0.5
    window: float | None = None
    raw: dict = field(default_factory=dict, compare=False)

    def regime(self, epsilon: float | None = None, kind: str | None = None, alpha: float | None = None):
        eps = self.epsilon if epsilon is None else epsilon
        if eps is None:
            raise ConfigError("epsilon is not set")
        kind = kind or ("fixed" if self.nu is not None else "combined")
        if kind == "fixed":
            if self.nu is None:
                raise ConfigError("fixed-viscosity regime needs 'nu'")
            return FixedViscosity(eps, self.nu)
        a = self.alpha if alpha is None else alpha
        if a is None:
            raise ConfigError("combined regime needs 'alpha'")
        return Combined(eps, a)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def parse_config(raw: dict) -> ExperimentConfig:
    _check_keys(raw, _TOP_KEYS, "config")
    if raw.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"config 'version' must be {SCHEMA_VERSION}")
    if "nu" in raw and "alpha" in raw:
        raise ConfigError("give either 'nu' or 'alpha', not both")
    for key in ("dt_max", "t_end", "grid"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    grid_raw = raw["grid"]
    _check_keys(grid_raw, _GRID_KEYS, "grid")
    data_raw = raw.get("data", {})
    _check_keys(data_raw, _DATA_KEYS, "data")
    sweep_raw = raw.get("sweep", {})
    _check_keys(sweep_raw, _SWEEP_KEYS, "sweep")
    try:
        grid = GridSpec(**grid_raw)
        family = IllPreparedFamily(**data_raw)
        solver_kw = {
            k: raw[k]
            for k in ("dt_max", "t_end", "cfl", "eps_dt_factor", "dealias", "sample_every", "integrator", "hs_order")
            if k in raw
        }
        solver = SolverConfig(snapshot_times=tuple(raw.get("snapshots", ())), **solver_kw)
        cfg = ExperimentConfig(
            grid,
            family,
            solver,
            epsilon=raw.get("epsilon"),
            nu=raw.get("nu"),
            alpha=raw.get("alpha"),
            K_fraction=sweep_raw.get("K_fraction", 0.5),
            window=sweep_raw.get("T"),
            raw=raw,
        )
        if cfg.epsilon is not None and (cfg.nu is not None or cfg.alpha is not None):
            cfg.regime()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if any(not 0 < t <= solver.t_end for t in solver.snapshot_times):
        raise ConfigError("snapshot times must lie in (0, t_end]")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(raw)


def out_root(default: str | Path | None = None) -> Path:
    return Path(os.environ.get(OUT_ENV) or default or DEFAULT_OUT)


# ---------------------------------------------------------------------------
# staged output directory


def _finite(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


class _Outputs:
    """Collects files under ``.partial`` names and publishes them together."""

    def __init__(self, directory: Path):
        self.dir = directory
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / (name + ".partial")

    def finalize(self, manifest: dict) -> Path:
        """Publish the files and write the manifest; non-finite floats become ``null``."""
        listing = []
        for name in self.files:
            (self.dir / (name + ".partial")).replace(self.dir / name)
            listing.append({"name": name, "bytes": (self.dir / name).stat().st_size})
        manifest["files"] = listing
        tmp = self.dir / "manifest.json.partial"
        tmp.write_text(json.dumps(_finite(manifest), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
        tmp.replace(self.dir / "manifest.json")
        return self.dir / "manifest.json"


def _regime_dict(regime) -> dict:
    d = asdict(regime)
    d["kind"] = "fixed" if isinstance(regime, FixedViscosity) else "combined"
    d["viscosity"] = regime.viscosity
    return d


def _base_manifest(cfg: ExperimentConfig, kind: str) -> dict:
    g = cfg.grid
    return {
        "kind": kind,
        "config_hash": cfg.hash,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "grid": {"n1": g.n1, "n2": g.n2, "L1": g.L1, "L2": g.L2},
        "data": cfg.family.describe(),
        "solver_version": __version__,
    }


# ---------------------------------------------------------------------------
# single run


@dataclass
class RunResult:
    trajectory: Trajectory
    directory: Path
    manifest: dict

    @property
    def exit_code(self) -> int:
        return 0 if self.trajectory.valid else 2


def _snapshot_name(t: float) -> str:
    return f"snapshot_t{t:.6f}.sqgf"


def _initial_data(cfg: ExperimentConfig, epsilon: float):
    try:
        return make_ill_prepared_data(cfg.family, epsilon, cfg.grid)
    except ValueError as exc:
        raise ConfigError(f"initial data: {exc}") from exc


def run_experiment(cfg: ExperimentConfig, root: str | Path | None = None) -> RunResult:
    regime = cfg.regime()
    theta0 = _initial_data(cfg, regime.epsilon)
    traj = integrate(theta0, regime, cfg.solver)
    out = _Outputs(out_root(root) / f"run_{cfg.hash[:12]}")

    d = traj.diagnostics
    write_csv(
        out.path("timeseries.csv"),
        ["t", "L2", "H_half_seminorm", "Hs", "energy_defect"],
        zip(traj.times, d["l2"], d["h_half"], d["hs"], d["energy_defect"]),
    )
    ledger = energy_ledger(traj) if traj.regular else None
    if ledger is not None:
        write_csv(out.path("ledger.csv"), ["t", "defect"], ledger.rows())
    for ts in cfg.solver.snapshot_times:
        hit = np.flatnonzero(np.abs(traj.times - ts) <= 1e-12 * max(1.0, ts))
        if hit.size:
            write_snapshot(out.path(_snapshot_name(ts)), traj.snapshots[hit[0]])
    write_zonal_csv(out.path("mean_final.csv"), project_to_zonal(traj.snapshots[-1]))

    manifest = _base_manifest(cfg, "run")
    manifest.update(
        regime=_regime_dict(regime),
        status=traj.status,
        t_final=float(traj.times[-1]),
        n_steps=traj.n_steps,
        dt_max_used=traj.dt_used,
        validity={
            "regular": traj.regular,
            "boundary_ok": traj.boundary_ok,
            "boundary_mass_max": float(np.max(d["boundary_mass"])),
            "energy_ledger_passed": bool(ledger.passed) if ledger else False,
        },
    )
    out.finalize(manifest)
    return RunResult(traj, out.dir, manifest)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    report: ConvergenceReport | None
    members: list[Trajectory]
    directory: Path
    manifest: dict

    @property
    def all_valid(self) -> bool:
        return all(tr.valid for tr in self.members)

    @property
    def verdict(self) -> bool:
        return self.all_valid and self.report is not None and self.report.passed

    @property
    def exit_code(self) -> int:
        return 0 if self.verdict else 2


def check_epsilons(epsilons) -> list[float]:
    eps = [float(e) for e in epsilons]
    if len(eps) < 3:
        raise ConfigError("need >= 3 epsilons")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilons must be strictly decreasing")
    return eps


def _run_member(args) -> Trajectory:
    cfg, regime = args
    return integrate(_initial_data(cfg, regime.epsilon), regime, cfg.solver)


def run_sweep(
    cfg: ExperimentConfig,
    epsilons,
    kind: str = "fixed",
    alpha: float | None = None,
    root: str | Path | None = None,
    jobs: int = 1,
) -> SweepResult:
    if kind not in ("fixed", "combined"):
        raise ConfigError(f"unknown regime {kind!r}")
    eps = check_epsilons(epsilons)
    regimes = [cfg.regime(e, kind, alpha) for e in eps]
    for r in regimes:
        _initial_data(cfg, r.epsilon)
    tasks = [(cfg, r) for r in regimes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(_run_member, tasks))
    else:
        members = [_run_member(t) for t in tasks]

    tag = config_hash({"config": cfg.raw, "epsilons": eps, "regime": kind, "alpha": alpha})[:12]
    out = _Outputs(out_root(root) / f"sweep_{tag}")
    regular = [tr for tr in members if tr.regular]
    report = None
    if len(regular) == len(members):
        report = convergence_metric(members, T=cfg.window, K_fraction=cfg.K_fraction)
        write_csv(out.path("convergence.csv"), ["epsilon", "D", "norm_id", "T", "K_fraction"], report.rows())
    write_csv(
        out.path("members.csv"),
        ["epsilon", "valid", "regular", "boundary_mass_max", "constraint_residual", "status"],
        [
            (
                tr.regime.epsilon,
                int(tr.valid),
                int(tr.regular),
                float(np.max(tr.diagnostics["boundary_mass"])),
                constraint_residual(time_average(tr)) if tr.regular else math.nan,
                tr.status,
            )
            for tr in members
        ],
    )
    manifest = _base_manifest(cfg, "sweep")
    manifest.update(
        regime={"kind": kind, "nu": cfg.nu if kind == "fixed" else None, "alpha": regimes[0].alpha if kind == "combined" else None},
        epsilons=eps,
        deviations=None if report is None else [float(x) for x in report.deviations],
        validity={"all_valid": all(tr.valid for tr in members), "all_regular": len(regular) == len(members)},
    )
    result = SweepResult(report, members, out.dir, manifest)
    manifest["verdict"] = "PASS" if result.verdict else "FAIL"
    out.finalize(manifest)
    return result


def with_overrides(cfg: ExperimentConfig, **solver_overrides) -> ExperimentConfig:
    """Copy of ``cfg`` with solver fields replaced (raw dict kept in sync)."""
    raw = dict(cfg.raw)
    raw.update(solver_overrides)
    return replace(cfg, solver=replace(cfg.solver, **solver_overrides), raw=raw)

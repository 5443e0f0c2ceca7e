"""Configuration parsing, command-line entry points, and bit-stable data
emission.

Config files are flat UTF-8 key-value documents with dotted section keys::

    # fig2-style photon counting
    system.omega = 10.0
    detector.kind = apd
    detector.eta = 0.8
    ...

Unknown keys are errors.  Emitted CSVs use shortest round-trip float
formatting and a JSON sidecar records everything needed to reproduce the
file (parameters, seed, mode); re-running with the same config and seed
yields byte-identical output.

Homodyne voltage columns are in dimensionless v units (v = V sqrt(C/4kT))
with display polarity flipped (v_out = -v), matching the tracked quadrature.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, apd, homodyne, metrics, tla
from .engine import DetectionRecord, EngineConfig, EnsembleResult, \
    TrajectoryRecord, run_ensemble

SCHEMA_VERSION = 1
MODES = ("self-consistent", "truth-driven", "ideal-baseline")

_APD_KEYS = {"detector.eta", "detector.gamma_r", "detector.tau_dd",
             "detector.gamma_dk"}
_RECV_KEYS = {"detector.eta", "detector.gamma", "detector.noise_power",
              "detector.phi"}
_PHYS_KEYS = {"detector.R", "detector.C", "detector.kT", "detector.P",
              "detector.omega0", "detector.eta", "detector.phi",
              "detector.e_charge"}
_COMMON_KEYS = {
    "system.omega", "system.gamma", "system.gamma_physical",
    "detector.kind",
    "engine.dt", "engine.t_final", "engine.sample_stride",
    "engine.master_seed", "engine.n_trajectories", "engine.burn_in",
    "engine.n_jobs",
    "mode", "output.prefix",
}
_GRID_KEYS = {"grid.n_points", "grid.v_bound", "grid.update_form"}
_SWEEP_KEYS = {"sweep.omegas"}


@dataclass(frozen=True)
class SimConfig:
    """Validated simulation description (one detector block)."""

    system: tla.SystemParams
    detector_kind: str
    engine: EngineConfig
    mode: str
    apd_params: apd.ApdParams | None = None
    receiver: homodyne.ReceiverParams | None = None
    receiver_physical: homodyne.PhysicalReceiverParams | None = None
    voltage_scale: float | None = None
    grid: homodyne.GridConfig | None = None
    update_form: str = "linear"
    sweep_omegas: tuple[float, ...] = metrics.DEFAULT_SWEEP_OMEGAS
    output_prefix: str | None = None
    raw: dict | None = None


def _parse_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', "
                             f"got {line.strip()!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key or not value:
            raise ValueError(f"line {lineno}: empty key or value")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


class _Reader:
    def __init__(self, entries: dict[str, str]):
        self.entries = entries
        self.used: set[str] = set()

    def _get(self, key, default, required):
        if key not in self.entries:
            if required:
                raise ValueError(f"missing required key: {key}")
            return default
        self.used.add(key)
        return self.entries[key]

    def float(self, key, default=None, required=False):
        raw = self._get(key, default, required)
        if raw is default and key not in self.entries:
            return default
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ValueError(f"key {key}: expected a float, got {raw!r}")

    def int(self, key, default=None, required=False):
        raw = self._get(key, default, required)
        if raw is default and key not in self.entries:
            return default
        try:
            return int(raw)
        except (TypeError, ValueError):
            raise ValueError(f"key {key}: expected an integer, got {raw!r}")

    def str(self, key, default=None, required=False, choices=None):
        raw = self._get(key, default, required)
        if raw is not None and choices is not None and raw not in choices:
            raise ValueError(f"key {key}: expected one of {sorted(choices)}, "
                             f"got {raw!r}")
        return raw

    def floats(self, key, default=None):
        raw = self._get(key, None, False)
        if raw is None:
            return default
        try:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        except ValueError:
            raise ValueError(f"key {key}: expected comma-separated floats, "
                             f"got {raw!r}")

    def reject_unknown(self, allowed: set[str]) -> None:
        unknown = sorted(set(self.entries) - allowed)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")


def _wrap_key(prefix: str):
    """Re-raise dataclass invariant violations with the config key path."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc_type is ValueError:
                raise ValueError(f"{prefix}: {exc}") from None
            return False
    return _Ctx()


def parse_config(text: str) -> SimConfig:
    """Parse and validate a flat key-value config document."""
    entries = _parse_lines(text)
    r = _Reader(entries)
    kind = r.str("detector.kind", required=True,
                 choices={"apd", "homodyne"})
    with _wrap_key("system"):
        system = tla.SystemParams(
            omega=r.float("system.omega", required=True),
            gamma=r.float("system.gamma", default=1.0),
            gamma_physical=r.float("system.gamma_physical", default=None))
    with _wrap_key("engine"):
        engine_cfg = EngineConfig(
            dt=r.float("engine.dt", required=True),
            t_final=r.float("engine.t_final", required=True),
            sample_stride=r.int("engine.sample_stride", default=10),
            master_seed=r.int("engine.master_seed", default=0),
            n_trajectories=r.int("engine.n_trajectories", default=1),
            burn_in=r.float("engine.burn_in", default=10.0),
            n_jobs=r.int("engine.n_jobs", default=1))
    mode = r.str("mode", default="self-consistent", choices=set(MODES))
    prefix = r.str("output.prefix", default=None)
    sweep_omegas = r.floats("sweep.omegas",
                            default=metrics.DEFAULT_SWEEP_OMEGAS)

    apd_params = None
    receiver = None
    receiver_physical = None
    voltage_scale = None
    grid = None
    update_form = "linear"
    if kind == "apd":
        with _wrap_key("detector"):
            apd_params = apd.ApdParams(
                eta=r.float("detector.eta", required=True),
                gamma_r=r.float("detector.gamma_r", required=True),
                tau_dd=r.float("detector.tau_dd", required=True),
                gamma_dk=r.float("detector.gamma_dk", required=True))
        r.reject_unknown(_COMMON_KEYS | _APD_KEYS | _SWEEP_KEYS)
    else:
        physical_given = bool((_PHYS_KEYS - {"detector.eta", "detector.phi"})
                              & set(entries))
        if physical_given:
            with _wrap_key("detector"):
                receiver_physical = homodyne.PhysicalReceiverParams(
                    R=r.float("detector.R", required=True),
                    C=r.float("detector.C", required=True),
                    kT=r.float("detector.kT", required=True),
                    P=r.float("detector.P", required=True),
                    omega0=r.float("detector.omega0", required=True),
                    eta=r.float("detector.eta", required=True),
                    phi=r.float("detector.phi", default=0.0),
                    e_charge=r.float("detector.e_charge",
                                     default=homodyne.E_CHARGE))
            if system.gamma_physical is None:
                raise ValueError(
                    "physical receiver parameters require "
                    "system.gamma_physical for the unit conversion")
            receiver, voltage_scale = homodyne.physical_to_dimensionless(
                receiver_physical, system.gamma_physical)
        else:
            with _wrap_key("detector"):
                receiver = homodyne.ReceiverParams(
                    eta=r.float("detector.eta", required=True),
                    gamma=r.float("detector.gamma", required=True),
                    noise_power=r.float("detector.noise_power", required=True),
                    phi=r.float("detector.phi", default=0.0))
        with _wrap_key("grid"):
            grid = homodyne.GridConfig(
                n_points=r.int("grid.n_points", default=512),
                v_bound=r.float("grid.v_bound", default=None))
        update_form = r.str("grid.update_form", default="linear",
                            choices={"linear", "exponential"})
        allowed = _COMMON_KEYS | _RECV_KEYS | _GRID_KEYS | _SWEEP_KEYS
        if physical_given:
            allowed |= _PHYS_KEYS
        r.reject_unknown(allowed)

    return SimConfig(system=system, detector_kind=kind, engine=engine_cfg,
                     mode=mode, apd_params=apd_params, receiver=receiver,
                     receiver_physical=receiver_physical,
                     voltage_scale=voltage_scale, grid=grid,
                     update_form=update_form, sweep_omegas=sweep_omegas,
                     output_prefix=prefix, raw=dict(entries))


def load_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    """Shortest round-trip decimal for floats; str for the rest."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_sidecar(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    payload["package_version"] = __version__
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def emit_trajectory(record: TrajectoryRecord, detection: DetectionRecord,
                    base: Path, meta: dict) -> list[Path]:
    """Write {base}.csv, {base}.events.csv (APD), and the {base}.json sidecar."""
    channel = []
    header = ["t", "x_c", "y_c", "z_c", "purity"]
    if record.counts is not None:
        header.append("count")
        channel.append(record.counts)
    if record.v_out is not None:
        header.append("v_out")
        channel.append(record.v_out)
    rows = zip(record.times, record.x, record.y, record.z, record.purity,
               *channel)
    paths = [base.with_suffix(".csv")]
    _write_csv(paths[0], header, rows)
    if detection.kind == "apd":
        events_path = base.with_suffix(".events.csv")
        _write_csv(events_path, ["t_avalanche"],
                   [[t] for t in detection.times])
        paths.append(events_path)
    sidecar = base.with_suffix(".json")
    _write_sidecar(sidecar, {
        **meta,
        "columns": header,
        "seed": record.seed,
        "mode": record.mode,
        "aggregates": {
            "n_samples": len(record.times),
            "final_purity": float(record.purity[-1]),
            "n_avalanches": (int(len(detection.times))
                             if detection.kind == "apd" else None),
        },
        "diagnostics": {k: float(v)
                        for k, v in record.diagnostics.items()},
    })
    paths.append(sidecar)
    return paths


def emit_ensemble(result: EnsembleResult, report: metrics.PurityReport,
                  base: Path, meta: dict) -> list[Path]:
    header = ["t", "mean_x", "se_x", "mean_y", "se_y", "mean_z", "se_z",
              "mean_purity", "se_purity"]
    rows = zip(result.times, result.mean_x, result.se_x, result.mean_y,
               result.se_y, result.mean_z, result.se_z, result.mean_purity,
               result.se_purity)
    csv_path = base.with_suffix(".csv")
    _write_csv(csv_path, header, rows)
    sidecar = base.with_suffix(".json")
    _write_sidecar(sidecar, {
        **meta,
        "columns": header,
        "seed": result.master_seed,
        "mode": result.mode,
        "aggregates": {
            "n_trajectories": result.n_trajectories,
            "stationary_purity": report.p,
            "stationary_purity_se": report.se_p,
            "unconditional_purity": report.p_u,
            "scaled_purity": report.scaled_p,
            "scaled_purity_se": report.se_scaled,
            "scaled": report.scaled,
            "burn_in": report.burn_in,
        },
    })
    return [csv_path, sidecar]


def emit_table(points: list[metrics.SweepPoint], base: Path,
               meta: dict) -> list[Path]:
    header = ["omega", "quadrature", "phi", "p", "p_u", "scaled_p",
              "se_scaled", "n_trajectories"]
    rows = [[p.omega, p.quadrature, p.phi, p.p, p.p_u, p.scaled_p,
             p.se_scaled, p.n_trajectories] for p in points]
    csv_path = base.with_suffix(".csv")
    _write_csv(csv_path, header, rows)
    sidecar = base.with_suffix(".json")
    _write_sidecar(sidecar, {**meta, "columns": header,
                             "aggregates": {"n_points": len(points)}})
    return [csv_path, sidecar]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _meta(cfg: SimConfig, command: str) -> dict:
    return {"command": command, "config": cfg.raw,
            "gamma_physical": cfg.system.gamma_physical,
            "voltage_units": ("dimensionless v = V sqrt(C/4kT), "
                              "display polarity inverted"
                              if cfg.detector_kind == "homodyne" else None)}


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    engine_cfg = cfg.engine
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "ensemble", None) is not None:
        changes["n_trajectories"] = args.ensemble
    if args.jobs is not None:
        changes["n_jobs"] = args.jobs
    if changes:
        engine_cfg = EngineConfig(
            dt=engine_cfg.dt, t_final=engine_cfg.t_final,
            sample_stride=engine_cfg.sample_stride,
            master_seed=changes.get("master_seed", engine_cfg.master_seed),
            n_trajectories=changes.get("n_trajectories",
                                       engine_cfg.n_trajectories),
            burn_in=engine_cfg.burn_in,
            n_jobs=changes.get("n_jobs", engine_cfg.n_jobs))
    mode = args.mode if getattr(args, "mode", None) else cfg.mode
    return SimConfig(system=cfg.system, detector_kind=cfg.detector_kind,
                     engine=engine_cfg, mode=mode, apd_params=cfg.apd_params,
                     receiver=cfg.receiver,
                     receiver_physical=cfg.receiver_physical,
                     voltage_scale=cfg.voltage_scale, grid=cfg.grid,
                     update_form=cfg.update_form,
                     sweep_omegas=cfg.sweep_omegas,
                     output_prefix=cfg.output_prefix, raw=cfg.raw)


def _trajectory_model(cfg: SimConfig):
    e = cfg.engine
    if cfg.detector_kind == "apd":
        def model(seed):
            rec, _ = apd.run_apd_trajectory(
                cfg.system, cfg.apd_params, dt=e.dt, t_final=e.t_final,
                seed=seed, sample_stride=e.sample_stride, mode=cfg.mode)
            return rec
    else:
        def model(seed):
            rec, _ = homodyne.run_homodyne_trajectory(
                cfg.system, cfg.receiver, cfg.grid, dt=e.dt,
                t_final=e.t_final, seed=seed,
                sample_stride=e.sample_stride, mode=cfg.mode,
                update_form=cfg.update_form)
            return rec
    return model


def _run_detector(cfg: SimConfig, args, command: str) -> list[Path]:
    cfg = _apply_overrides(cfg, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.output_prefix or Path(args.config).stem
    e = cfg.engine
    if e.n_trajectories == 1:
        seed = e.master_seed
        if cfg.detector_kind == "apd":
            rec, det = apd.run_apd_trajectory(
                cfg.system, cfg.apd_params, dt=e.dt, t_final=e.t_final,
                seed=seed, sample_stride=e.sample_stride, mode=cfg.mode)
        else:
            rec, det = homodyne.run_homodyne_trajectory(
                cfg.system, cfg.receiver, cfg.grid, dt=e.dt,
                t_final=e.t_final, seed=seed,
                sample_stride=e.sample_stride, mode=cfg.mode,
                update_form=cfg.update_form)
        return emit_trajectory(rec, det, out_dir / f"{prefix}_traj",
                               _meta(cfg, command))
    result = run_ensemble(_trajectory_model(cfg), e)
    report = metrics.purity_report(result, cfg.system, e.burn_in, e.t_final)
    return emit_ensemble(result, report, out_dir / f"{prefix}_ensemble",
                         _meta(cfg, command))


def _cmd_steady(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        system = cfg.system
    else:
        system = tla.SystemParams(omega=args.omega)
    ss = tla.steady_state(system)
    x, y, z = tla.expectations(ss)
    p_u = tla.purity(ss)
    print(f"omega = {_fmt(system.omega)}  gamma = {_fmt(system.gamma)}")
    print(f"x_ss = {_fmt(x)}")
    print(f"y_ss = {_fmt(y)}")
    print(f"z_ss = {_fmt(z)}")
    print(f"p_u  = {_fmt(p_u)}")
    return 0


def _cmd_run(args, command: str) -> int:
    cfg = load_config(args.config)
    if cfg.detector_kind != command:
        raise ValueError(f"config declares detector.kind = "
                         f"{cfg.detector_kind!r}, but the {command!r} "
                         "command was invoked")
    paths = _run_detector(cfg, args, command)
    for p in paths:
        print(p)
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.detector_kind != "homodyne":
        raise ValueError("sweep requires a homodyne config")
    cfg = _apply_overrides(cfg, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.output_prefix or Path(args.config).stem
    points = metrics.purity_vs_drive_sweep(
        cfg.sweep_omegas, cfg.receiver, cfg.grid, cfg.engine,
        gamma=cfg.system.gamma, update_form=cfg.update_form)
    paths = emit_table(points, out_dir / f"{prefix}_sweep",
                       _meta(cfg, "sweep"))
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlamonitor",
        description="Conditional-state simulation of a driven two-level atom "
                    "under realistic photodetection")
    sub = parser.add_subparsers(dest="command", required=True)

    steady = sub.add_parser("steady", help="print the unconditional steady "
                                           "state and its purity")
    group = steady.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", type=str)
    group.add_argument("--omega", type=float)
    steady.set_defaults(func=_cmd_steady)

    for name, help_text in (("apd", "avalanche-photodiode counting run"),
                            ("homodyne", "photoreceiver homodyne run")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--out", default=".")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--ensemble", type=int, default=None)
        cmd.add_argument("--mode", choices=MODES, default=None)
        cmd.add_argument("--jobs", type=int, default=None)
        cmd.set_defaults(func=lambda a, _n=name: _cmd_run(a, _n))

    sweep = sub.add_parser("sweep", help="scaled purity vs drive strength")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", default=".")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--ensemble", type=int, default=None)
    sweep.add_argument("--jobs", type=int, default=None)
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

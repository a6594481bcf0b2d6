"""Command-line front end.

Commands: simulate, loadline, sweep, cryo, stress, report.  Every command
writes its outputs plus a ``manifest.json`` into the output directory.

Exit codes: 0 success, 2 invalid input (config, flags, sweep spec),
3 solver or analysis failure.  Diagnostics go to stderr as one JSON
record per line.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import AnalysisWindowError, CircuitError, ThdUndefinedError, run_machine
from .config import ConfigError, MachineConfig, config_hash, loads, reference_toml_text
from .cryogenics import PropertyRangeError, armature_current_density_check, cryo_report
from .geometry import GeometryError
from .magnetostatics import representative_magnets
from .mechanics import stress_from_field
from .optimizer import EmptyFeasibleSetError, SweepSpec, SweepSpecError, sweep
from .superconductor import (
    LoadLineConvergenceError,
    current_sharing_temperature,
    ic_temperature_curve,
    load_line_curve,
    load_line_to_csv,
    magnet_critical_current,
    unit_turn_field,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OUT_ENV = "HTS_WEC_OUT"
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


class UsageError(ValueError):
    """Invalid command-line input."""


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str
    config_sha256: str
    output_dir: str
    tool_version: str
    timestamp_utc: str

    def write(self, out: Path) -> None:
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _diag(level: str, command: str, message: str, **extra) -> None:
    rec = {"level": level, "command": command, "message": message, **extra}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def _clean(obj):
    """JSON-safe copy with floats rounded to 10 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.10g}") if math.isfinite(x) else None
    return obj


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _load(args) -> tuple[MachineConfig, str, str]:
    if args.config is None:
        text, where = reference_toml_text(), "<reference>"
    else:
        p = Path(args.config)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        text, where = p.read_text(), str(p)
    return loads(text), text, where


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError(f"no output directory: pass --out or set {OUT_ENV}")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _with_cycles(cfg: MachineConfig, cycles: int | None) -> MachineConfig:
    if cycles is None:
        return cfg
    if cycles < 1:
        raise UsageError("--cycles must be at least 1")
    return cfg.with_updates(simulation=type(cfg.simulation)(cfg.simulation.dt_s, cycles))


# ------------------------------------------------------------ analyses


def _loadline(cfg: MachineConfig):
    unit = unit_turn_field(cfg.assembly, cfg.iron_boost_factor)
    res = magnet_critical_current(
        cfg.assembly,
        cfg.lift,
        cfg.operating_temperature_K,
        cfg.iron_boost_factor,
        cfg.operating_current_A,
        unit_field=unit,
    )
    return unit, res


def _loadline_summary(cfg, unit, res) -> dict:
    at_op = unit.scaled(cfg.operating_current_A)
    return {
        "critical_current_A": res.critical_current_A,
        "operating_current_A": res.operating_current_A,
        "margin_A": res.margin_A,
        "margin_percent": res.margin_percent,
        "negative_margin": res.negative_margin,
        "limiting_magnet": res.limiting_magnet,
        "limiting_turn": {"pancake": res.limiting_turn[0], "turn": res.limiting_turn[1]},
        "iterations": res.iterations,
        "residual_A": res.residual_A,
        "max_B_T": float(at_op.magnitude.max()),
        "mean_B_T": float(at_op.magnitude.mean()),
    }


def _tape_temperatures(cfg: MachineConfig) -> tuple[float, float]:
    t = cfg.magnet.tapes[0]
    return t.reference_temperature_K, t.critical_temperature_K


def _cryo(cfg: MachineConfig, ic: float) -> dict:
    T_op, T_C = _tape_temperatures(cfg)
    if cfg.operating_current_A >= ic:
        raise ValueError("operating current is not below the critical current; no thermal margin exists")
    T_cs = current_sharing_temperature(cfg.operating_current_A, ic, T_op, T_C)
    rep = cryo_report(
        cfg.assembly,
        T_cs,
        T_op,
        T_C,
        cfg.cryo.winding_density_kg_per_m3,
        cfg.cryo.h_vaporization_J_per_kg,
    )
    return rep.as_dict()


def _stress(cfg: MachineConfig, unit):
    return stress_from_field(unit.scaled(cfg.operating_current_A), cfg.operating_current_A)


def _simulate(cfg: MachineConfig):
    ts, m = run_machine(cfg, cycles=cfg.simulation.cycles, dt=cfg.simulation.dt_s)
    t0 = cfg.wave.period_s
    sel = ts.window(t0, t0 * (1 + cfg.simulation.cycles))
    cd = armature_current_density_check(
        ts.i_phase[:, sel],
        cfg.armature.conductor_area_mm2,
        cfg.cryo.current_density_limit_A_per_mm2,
        cfg.cryo.duty_threshold,
    )
    summary = m.as_dict()
    summary["power_kW"] = m.P_out_kW
    summary["current_density"] = cd.as_dict()
    summary["cycles"] = cfg.simulation.cycles
    summary["dt_s"] = cfg.simulation.dt_s
    return ts, summary


# ------------------------------------------------------------ commands


def cmd_simulate(args, cfg, out: Path) -> list[str]:
    cfg = _with_cycles(cfg, args.cycles)
    ts, summary = _simulate(cfg)
    ts.to_csv(out / "transient.csv")
    _write_json(out / "metrics.json", summary)
    return ["transient.csv", "metrics.json"]


def cmd_loadline(args, cfg, out: Path) -> list[str]:
    unit, res = _loadline(cfg)
    T_op, T_C = _tape_temperatures(cfg)
    top = max(1.5 * res.critical_current_A, 1.1 * cfg.operating_current_A)
    curve = load_line_curve(unit, cfg.lift, np.linspace(0.0, top, 101), cfg.operating_temperature_K, T_op, T_C)
    load_line_to_csv(curve, out / "loadline.csv")
    _write_json(out / "loadline.json", _loadline_summary(cfg, unit, res))
    return ["loadline.csv", "loadline.json"]


def cmd_cryo(args, cfg, out: Path) -> list[str]:
    _, res = _loadline(cfg)
    T_op, T_C = _tape_temperatures(cfg)
    curve = ic_temperature_curve(res.critical_current_A, T_op, T_C)
    with open(out / "ic_temperature.csv", "w") as fh:
        fh.write("T_K,Ic_A\n")
        for T, ic in curve:
            fh.write(f"{T:.6f},{ic:.6f}\n")
    _write_json(out / "cryo.json", _cryo(cfg, res.critical_current_A))
    return ["ic_temperature.csv", "cryo.json"]


def cmd_stress(args, cfg, out: Path) -> list[str]:
    unit = unit_turn_field(cfg.assembly, cfg.iron_boost_factor)
    st = _stress(cfg, unit)
    st.to_csv(out / "stress.csv")
    summary = st.summary()
    summary["magnets_evaluated"] = list(representative_magnets(cfg.assembly))
    _write_json(out / "stress.json", summary)
    return ["stress.csv", "stress.json"]


def cmd_sweep(args, cfg, out: Path) -> list[str]:
    if args.sweep_spec is None:
        raise UsageError("--sweep-spec is required")
    p = Path(args.sweep_spec)
    if not p.is_file():
        raise SweepSpecError(f"sweep spec not found: {p}")
    try:
        data = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise SweepSpecError(f"invalid TOML in {p}: {exc}") from exc
    spec = SweepSpec.from_dict(data.get("sweep", data))
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    rep = sweep(spec, cfg, jobs=args.jobs)
    rep.to_csv(out / "sweep.csv")
    rep.to_json(out / "sweep.json")
    return ["sweep.csv", "sweep.json"]


def cmd_report(args, cfg, out: Path) -> list[str]:
    cfg = _with_cycles(cfg, args.cycles)
    unit, res = _loadline(cfg)
    ll = _loadline_summary(cfg, unit, res)
    st = _stress(cfg, unit).summary()
    cryo = _cryo(cfg, res.critical_current_A) if not res.negative_margin else None
    _, sim = _simulate(cfg)
    report = {
        "electromagnetic": {
            "maximum_flux_density_T": ll["max_B_T"],
            "average_flux_density_T": ll["mean_B_T"],
            "critical_current_A": ll["critical_current_A"],
            "current_margin_A": ll["margin_A"],
        },
        "mechanical": {
            "maximum_stress_MPa": st["max_hoop_MPa"],
            "average_stress_MPa": st["mean_hoop_MPa"],
            "young_modulus_GPa": st["young_modulus_GPa"],
        },
        "thermal": {
            "coolant_mass_kg": cryo and cryo["coolant_mass_kg"],
            "current_sharing_temperature_K": cryo and cryo["T_cs_K"],
            "stability_margin_J_per_m3": cryo and cryo["stability_margin_J_per_m3"],
            "magnet_mass_kg": cryo and cryo["magnet_mass_kg"],
        },
        "operation": sim,
    }
    _write_json(out / "report.json", report)
    return ["report.json"]


COMMANDS = {
    "simulate": cmd_simulate,
    "loadline": cmd_loadline,
    "sweep": cmd_sweep,
    "cryo": cmd_cryo,
    "stress": cmd_stress,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 too, but route through the JSON diagnostics
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hts-wec", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="machine TOML (default: packaged reference design)")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")
        if name in ("simulate", "report"):
            p.add_argument("--cycles", type=int, help="wave cycles in the analysis window")
        if name == "sweep":
            p.add_argument("--sweep-spec", help="sweep TOML with a [sweep] table")
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


INVALID = (UsageError, ConfigError, SweepSpecError, GeometryError)
SOLVER = (
    CircuitError,
    AnalysisWindowError,
    ThdUndefinedError,
    LoadLineConvergenceError,
    EmptyFeasibleSetError,
    PropertyRangeError,
)


def main(argv: list[str] | None = None) -> int:
    command = "hts-wec"
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        cfg, text, where = _load(args)
        out = _out_dir(args)
        written = COMMANDS[command](args, cfg, out)
        RunManifest(
            command=command,
            config_path=where,
            config_sha256=config_hash(text),
            output_dir=str(out),
            tool_version=__version__,
            timestamp_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        ).write(out)
        _diag("info", command, "ok", outputs=written)
        return EXIT_OK
    except INVALID as exc:
        _diag("error", command, str(exc), kind=type(exc).__name__)
        return EXIT_INVALID
    except SOLVER as exc:
        _diag("error", command, str(exc), kind=type(exc).__name__)
        return EXIT_SOLVER
    except ValueError as exc:
        _diag("error", command, str(exc), kind=type(exc).__name__)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

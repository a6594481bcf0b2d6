"""Fixed-tape-length design sweep and single- vs multi-width comparison.

Every candidate (magnet height, radial build) is rebuilt from the template:
the core tape width fills the height between the template's end layers,
and the turn count and pitch of each width class are re-derived so each
class consumes exactly its allotted tape length.  Candidates are scored
with the EMF-RMS proxy or the full rectifier transient; the top rows of a
proxy sweep are then re-scored with the full transient.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .circuit import analysis_window, emf_waveforms, run_machine
from .config import ConfigError, MachineConfig
from .geometry import GeometryError, tape_length_of
from .mechanics import stress_from_field
from .superconductor import magnet_critical_current, unit_turn_field

OBJECTIVES = ("emf_rms", "output_power")
LENGTH_RTOL = 1e-6


class SweepSpecError(ValueError):
    """Sweep specification is empty or inconsistent."""


class EmptyFeasibleSetError(RuntimeError):
    """No candidate satisfied the current, margin and stress limits."""


def _grid(lo: float, hi: float, step: float, name: str) -> tuple[float, ...]:
    if step <= 0 or hi < lo:
        raise SweepSpecError(f"{name} range [{lo}, {hi}] step {step} is empty")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + k * step, 9) for k in range(n))


@dataclass(frozen=True)
class SweepSpec:
    """Grid over (magnet height, radial build) in mm, inclusive of both ends."""

    height_range_mm: tuple[float, float, float]
    width_range_mm: tuple[float, float, float]
    objective: str = "emf_rms"
    budget: int = 100
    top_k: int = 5
    max_hoop_stress_MPa: float = math.inf
    min_margin_percent: float = 0.0
    current_fraction: float | None = None  # run each candidate at this fraction of its own Ic

    def __post_init__(self) -> None:
        if self.current_fraction is not None and not 0 < self.current_fraction < 1:
            raise SweepSpecError("current_fraction must lie in (0, 1)")
        if self.objective not in OBJECTIVES:
            raise SweepSpecError(f"objective must be one of {OBJECTIVES}")
        if self.top_k < 1 or self.budget < 1:
            raise SweepSpecError("top_k and budget must be at least 1")
        n = len(self.heights_mm) * len(self.widths_mm)
        if n > self.budget:
            raise SweepSpecError(f"grid has {n} points, above the evaluation budget {self.budget}")

    @property
    def heights_mm(self) -> tuple[float, ...]:
        return _grid(*self.height_range_mm, "height")

    @property
    def widths_mm(self) -> tuple[float, ...]:
        return _grid(*self.width_range_mm, "width")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise SweepSpecError(f"unknown sweep keys: {', '.join(sorted(extra))}")
        for key in ("height_range_mm", "width_range_mm"):
            if key not in data or len(data[key]) != 3:
                raise SweepSpecError(f"{key} must be [start, stop, step]")
            data[key] = tuple(float(x) for x in data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise SweepSpecError(str(exc)) from exc


# ------------------------------------------------------------- redesign


def layers_for_height(template: Sequence[float], height_mm: float, plate_mm: float) -> tuple[float, ...]:
    """Keep the template's end layers and fill the rest with its core width.

    The core width is the most common width; the end layers are the runs of
    other widths at either end of the stack.
    """
    widths = list(template)
    core = max(sorted(set(widths)), key=widths.count)
    lead = 0
    while lead < len(widths) and widths[lead] != core:
        lead += 1
    trail = 0
    while trail < len(widths) - lead and widths[-1 - trail] != core:
        trail += 1
    head, tail = widths[:lead], widths[len(widths) - trail :]
    ends = sum(2 * w for w in head + tail) + plate_mm * (len(head) + len(tail))
    n = int(math.floor((height_mm - ends + plate_mm) / (2 * core + plate_mm) + 1e-9))
    if n < 1:
        raise GeometryError(f"height {height_mm} mm leaves no room for core layers")
    return tuple(head + [core] * n + tail)


def redesign(cfg: MachineConfig, height_mm: float, width_mm: float) -> MachineConfig:
    """Template design rebuilt at a new height and radial build, same tape lengths."""
    mg = cfg.magnet
    layers = layers_for_height(mg.layers_mm, height_mm, mg.insulation_plate_thickness_mm)
    magnet = replace(
        mg,
        layers_mm=layers,
        height_mm=height_mm,
        radial_build_mm=width_mm,
        cryostat_height_mm=mg.cryostat_height_mm - mg.height_mm + height_mm,
        cryostat_width_mm=mg.cryostat_width_mm - mg.radial_build_mm + width_mm,
    )
    return replace(cfg, magnet=magnet)


# ------------------------------------------------------------ evaluation


@dataclass(frozen=True)
class SweepRow:
    index: int
    height_mm: float
    width_mm: float
    layer_count: int
    operating_current_A: float
    critical_current_A: float
    margin_A: float
    margin_percent: float
    max_B_T: float
    max_hoop_MPa: float
    emf_rms_V: float
    P_out_kW: float | None
    feasible: bool
    reason: str


def emf_rms(cfg: MachineConfig, dt: float = 1e-3) -> float:
    """Mean over phases of the open-circuit EMF RMS across the analysis window."""
    t0, t1 = analysis_window(cfg.wave, cfg.simulation.cycles)
    t = np.arange(round((t1 - t0) / dt) + 1) * dt + t0
    e = emf_waveforms(cfg, t)
    return float(np.mean(np.sqrt(trapezoid(e**2, t, axis=1) / (t[-1] - t[0]))))


def output_power(cfg: MachineConfig) -> float:
    return float(run_machine(cfg, cycles=cfg.simulation.cycles, dt=cfg.simulation.dt_s)[1].P_out_kW)


def evaluate_design(
    cfg: MachineConfig,
    objective: str = "emf_rms",
    max_hoop_MPa=math.inf,
    min_margin_percent=0.0,
    current_fraction: float | None = None,
):
    """Geometry, load line, field, stress and objective of one design.

    With ``current_fraction`` the design runs at that fraction of its own
    critical current instead of the configured operating current.
    Returns (operating current, critical current, margin A, margin %,
    max |B|, max hoop stress, EMF RMS, output power or None, feasibility
    reason or "").
    """
    asm = cfg.assembly
    lengths = tape_length_of(asm)
    for w, km in cfg.magnet.tape_total_km:
        if abs(lengths[w] - km * 1e3) > LENGTH_RTOL * km * 1e3:
            raise GeometryError(f"{w} mm tape length {lengths[w]:.6f} m does not match {km} km")
    unit = unit_turn_field(asm, cfg.iron_boost_factor)
    I_op = cfg.operating_current_A
    ll = magnet_critical_current(
        asm, cfg.lift, cfg.operating_temperature_K, cfg.iron_boost_factor, I_op, unit_field=unit
    )
    if current_fraction is not None:
        I_op = current_fraction * ll.critical_current_A
        cfg = replace(cfg, operating_current_A=I_op)
        ll = replace(ll, operating_current_A=I_op, margin_A=ll.critical_current_A - I_op,
                     margin_percent=100.0 * (ll.critical_current_A - I_op) / I_op)
    at_op = unit.scaled(I_op)
    stress = stress_from_field(at_op, I_op)
    reason = ""
    if ll.negative_margin:
        reason = "operating current above critical current"
    elif ll.margin_percent < min_margin_percent:
        reason = "margin below limit"
    elif stress.max_hoop_MPa > max_hoop_MPa:
        reason = "hoop stress above limit"
    e_rms = emf_rms(cfg, cfg.simulation.dt_s)
    power = float(output_power(cfg)) if objective == "output_power" and not reason else None
    return (
        I_op,
        ll.critical_current_A,
        ll.margin_A,
        ll.margin_percent,
        float(at_op.magnitude.max()),
        stress.max_hoop_MPa,
        e_rms,
        power,
        reason,
    )


def _evaluate_point(args) -> SweepRow:
    index, cfg, h, w, spec = args
    try:
        design = redesign(cfg, h, w)
        values = evaluate_design(
            design, spec.objective, spec.max_hoop_stress_MPa, spec.min_margin_percent, spec.current_fraction
        )
    except (GeometryError, ConfigError) as exc:
        nan = math.nan
        return SweepRow(index, h, w, 0, nan, nan, nan, nan, nan, nan, nan, None, False, f"invalid geometry: {exc}")
    reason = values[-1]
    return SweepRow(index, h, w, len(design.magnet.layers_mm), *values[:-1], not reason, reason)


def _power_point(args) -> float:
    cfg, row = args
    design = replace(redesign(cfg, row.height_mm, row.width_mm), operating_current_A=row.operating_current_A)
    return output_power(design)


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))  # map keeps submission order


@dataclass(frozen=True)
class SweepReport:
    spec: SweepSpec
    rows: tuple[SweepRow, ...]
    ranking: tuple[int, ...]  # feasible row indices, best first by the sweep objective
    argmax: int  # best row by the sweep objective
    power_argmax: int  # best row by output power among the rows evaluated with the transient

    def score(self, row: SweepRow) -> float:
        return row.emf_rms_V if self.spec.objective == "emf_rms" else row.P_out_kW

    def best(self) -> SweepRow:
        return self.rows[self.argmax]

    def to_csv(self, path: str | Path) -> None:
        names = list(SweepRow.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in self.rows:
                w.writerow([_fmt(getattr(row, n)) for n in names])

    def as_dict(self) -> dict:
        spec = asdict(self.spec)
        spec["max_hoop_stress_MPa"] = _json_float(spec["max_hoop_stress_MPa"])
        return {
            "spec": spec,
            "objective": self.spec.objective,
            "argmax": _row_dict(self.rows[self.argmax]),
            "power_argmax": _row_dict(self.rows[self.power_argmax]),
            "ranking": list(self.ranking),
            "rows": [_row_dict(r) for r in self.rows],
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _json_float(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return float(f"{v:.10g}") if isinstance(v, float) else v


def _row_dict(row: SweepRow) -> dict:
    return {k: _json_float(v) for k, v in asdict(row).items()}


def sweep(spec: SweepSpec, template: MachineConfig, jobs: int = 1) -> SweepReport:
    """Exhaustive grid evaluation in grid order (height-major)."""
    points = [(h, w) for h in spec.heights_mm for w in spec.widths_mm]
    rows = _map(_evaluate_point, [(i, template, h, w, spec) for i, (h, w) in enumerate(points)], jobs)
    feasible = [r for r in rows if r.feasible]
    if not feasible:
        raise EmptyFeasibleSetError(f"none of the {len(rows)} candidates is feasible")

    def key(score):
        return lambda r: (-score(r), r.index)

    if spec.objective == "emf_rms":
        ranking = sorted(feasible, key=key(lambda r: r.emf_rms_V))
        top = ranking[: spec.top_k]
        powers = _map(_power_point, [(template, r) for r in top], jobs)
        for r, p in zip(top, powers):
            rows[r.index] = replace(r, P_out_kW=p)
        top = [rows[r.index] for r in top]
        power_best = min(top, key=key(lambda r: r.P_out_kW))
    else:
        ranking = sorted(feasible, key=key(lambda r: r.P_out_kW))
        power_best = ranking[0]
    return SweepReport(spec, tuple(rows), tuple(r.index for r in ranking), ranking[0].index, power_best.index)


# ------------------------------------------------------ width comparison


@dataclass(frozen=True)
class WidthComparison:
    single_ic_A: float
    multi_ic_A: float
    single_P_out_kW: float
    multi_P_out_kW: float

    @property
    def delta_ic_percent(self) -> float:
        return 100.0 * (self.multi_ic_A / self.single_ic_A - 1.0)

    @property
    def delta_power_percent(self) -> float:
        return 100.0 * (self.multi_P_out_kW / self.single_P_out_kW - 1.0)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(delta_ic_percent=self.delta_ic_percent, delta_power_percent=self.delta_power_percent)
        return d


def _total_length_km(cfg: MachineConfig) -> float:
    return sum(km for _, km in cfg.magnet.tape_total_km)


def compare_multi_width(single: MachineConfig, multi: MachineConfig) -> WidthComparison:
    """Percentage gain in load-line Ic and output power of ``multi`` over ``single``.

    Both designs must use the same total tape length.  Each is run at its
    own operating current.
    """
    a, b = _total_length_km(single), _total_length_km(multi)
    if abs(a - b) > LENGTH_RTOL * max(a, b):
        raise ValueError(f"designs use different total tape lengths ({a} km vs {b} km)")

    def ic(cfg):
        return magnet_critical_current(
            cfg.assembly, cfg.lift, cfg.operating_temperature_K, cfg.iron_boost_factor, cfg.operating_current_A
        ).critical_current_A

    return WidthComparison(ic(single), ic(multi), output_power(single), output_power(multi))

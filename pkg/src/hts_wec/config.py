"""Machine configuration: declarative design, TOML round-trip, reference design.

The magnet stack is stored as design intent (layer widths, tape usage,
radial build, height).  Turn counts and turn pitch are derived so each
tape width consumes exactly its allotted length.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .circuit import CircuitSpec
from .excitation import WaveSpec
from .geometry import (
    ArmatureLayout,
    GeometryError,
    MagnetAssembly,
    TapeSpec,
    WindingPack,
    fit_turns_to_length,
    place_magnets,
    stack_pack,
)
from .superconductor import LiftModel


class ConfigError(ValueError):
    """Configuration file missing, malformed or inconsistent."""


@dataclass(frozen=True)
class TapeGrade:
    """Tape properties that do not depend on how it is wound."""

    width_mm: float
    ic_ref_A: float
    reference_temperature_K: float = 20.0
    critical_temperature_K: float = 92.0


@dataclass(frozen=True)
class MagnetDesign:
    layers_mm: tuple[float, ...]
    tapes: tuple[TapeGrade, ...]
    tape_total_km: tuple[tuple[float, float], ...]
    count: int = 4
    pole_pitch_mm: float = 287.5
    inner_radius_mm: float = 71.6
    radial_build_mm: float = 22.4
    height_mm: float = 119.8
    insulation_plate_thickness_mm: float = 0.5
    cryostat_height_mm: float = 131.8
    cryostat_width_mm: float = 34.5

    def __post_init__(self) -> None:
        widths = {t.width_mm for t in self.tapes}
        if set(self.layers_mm) - widths:
            raise ConfigError(f"layers use widths {sorted(set(self.layers_mm))} but tapes define {sorted(widths)}")
        lengths = dict(self.tape_total_km)
        if set(self.layers_mm) != set(lengths):
            raise ConfigError("every layer width needs a tape length and vice versa")
        if self.count < 1:
            raise ConfigError("need at least one magnet")

    def tape_length_per_magnet_m(self, width_mm: float) -> float:
        return dict(self.tape_total_km)[width_mm] * 1e3 / self.count

    def build_pack(self) -> WindingPack:
        grades = {t.width_mm: t for t in self.tapes}
        specs = {}
        for w in sorted(set(self.layers_mm)):
            pancakes = 2 * sum(1 for x in self.layers_mm if x == w)
            n, pitch = fit_turns_to_length(
                self.tape_length_per_magnet_m(w), pancakes, self.inner_radius_mm, self.radial_build_mm
            )
            g = grades[w]
            specs[w] = (TapeSpec(w, pitch, g.ic_ref_A, g.reference_temperature_K, g.critical_temperature_K), n)
        return stack_pack(
            [specs[w] for w in self.layers_mm], self.inner_radius_mm, self.height_mm, self.insulation_plate_thickness_mm
        )

    def build_assembly(self) -> MagnetAssembly:
        return place_magnets(
            self.build_pack(), self.count, self.pole_pitch_mm, self.cryostat_height_mm, self.cryostat_width_mm
        )


@dataclass(frozen=True)
class CryoSettings:
    winding_density_kg_per_m3: float = 8900.0
    h_vaporization_J_per_kg: float = 446e3
    current_density_limit_A_per_mm2: float = 6.0
    duty_threshold: float = 0.05


@dataclass(frozen=True)
class SimulationSettings:
    dt_s: float = 1e-3
    cycles: int = 3

    def __post_init__(self) -> None:
        if self.dt_s <= 0:
            raise ConfigError("dt_s must be positive")
        if self.cycles < 1:
            raise ConfigError("cycles must be at least 1")


@dataclass(frozen=True)
class MachineConfig:
    magnet: MagnetDesign
    armature: ArmatureLayout = field(default_factory=ArmatureLayout)
    operating_current_A: float = 179.0
    operating_temperature_K: float = 20.0
    wave: WaveSpec = field(default_factory=WaveSpec)
    circuit: CircuitSpec = field(default_factory=CircuitSpec)
    iron_boost_factor: float = 1.0
    lift: LiftModel = field(default_factory=LiftModel)
    pole_array: str = "periodic"
    cryo: CryoSettings = field(default_factory=CryoSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)

    def __post_init__(self) -> None:
        if self.iron_boost_factor < 1.0:
            raise ConfigError("iron_boost_factor must be >= 1")
        if self.operating_current_A <= 0:
            raise ConfigError("operating current must be positive")
        if self.pole_array not in ("finite", "periodic"):
            raise ConfigError("pole_array must be 'finite' or 'periodic'")
        if self.armature.slot_count % 3 or self.magnet.count * self.armature.slots_per_pole != self.armature.slot_count:
            raise ConfigError("slot count must equal magnet count x slots per pole")

    @cached_property
    def assembly(self) -> MagnetAssembly:
        return self.magnet.build_assembly()

    @property
    def pack(self) -> WindingPack:
        return self.assembly.placements[0].pack

    def with_updates(self, **changes) -> "MachineConfig":
        return replace(self, **changes)


# ------------------------------------------------------------------ TOML


def _float_keys(d: dict) -> tuple[tuple[float, float], ...]:
    return tuple(sorted((float(k), float(v)) for k, v in d.items()))


def config_to_dict(cfg: MachineConfig) -> dict[str, Any]:
    mg = cfg.magnet
    magnet = {f.name: getattr(mg, f.name) for f in fields(mg) if f.name not in ("layers_mm", "tapes", "tape_total_km")}
    magnet["layers_mm"] = list(mg.layers_mm)
    magnet["tape_total_km"] = {_fmt_width(w): v for w, v in mg.tape_total_km}
    magnet["tape"] = [asdict(t) for t in mg.tapes]
    lift = asdict(cfg.lift)
    if cfg.lift.kind == "kim":
        for k in ("table_bperp_T", "table_bpar_T", "table_lift"):
            lift.pop(k)
    else:
        lift["table_lift"] = [list(r) for r in cfg.lift.table_lift]
        lift["table_bperp_T"] = list(cfg.lift.table_bperp_T)
        lift["table_bpar_T"] = list(cfg.lift.table_bpar_T)
    armature = {k: v for k, v in asdict(cfg.armature).items() if v is not None}
    circuit = {k: v for k, v in asdict(cfg.circuit).items() if v is not None}
    return {
        "machine": {
            "operating_current_A": cfg.operating_current_A,
            "operating_temperature_K": cfg.operating_temperature_K,
            "iron_boost_factor": cfg.iron_boost_factor,
            "pole_array": cfg.pole_array,
        },
        "magnet": magnet,
        "lift": lift,
        "armature": armature,
        "circuit": circuit,
        "wave": asdict(cfg.wave),
        "cryo": asdict(cfg.cryo),
        "simulation": asdict(cfg.simulation),
    }


def _fmt_width(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def _build(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(extra))}")
    try:
        return cls(**data)
    except (TypeError, ValueError, GeometryError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> MachineConfig:
    data = {k: dict(v) for k, v in data.items()}
    unknown = set(data) - {"machine", "magnet", "lift", "armature", "circuit", "wave", "cryo", "simulation"}
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    if "magnet" not in data:
        raise ConfigError("missing [magnet] section")
    mg = data["magnet"]
    try:
        tapes = tuple(_build(TapeGrade, t, "magnet.tape") for t in mg.pop("tape"))
        mg["layers_mm"] = tuple(float(x) for x in mg.pop("layers_mm"))
        mg["tape_total_km"] = _float_keys(mg.pop("tape_total_km"))
    except KeyError as exc:
        raise ConfigError(f"[magnet] missing key {exc}") from exc
    magnet = _build(MagnetDesign, {**mg, "tapes": tapes}, "magnet")
    lift_d = data.get("lift", {})
    if "table_lift" in lift_d:
        lift_d["table_lift"] = tuple(tuple(r) for r in lift_d["table_lift"])
        lift_d["table_bperp_T"] = tuple(lift_d["table_bperp_T"])
        lift_d["table_bpar_T"] = tuple(lift_d["table_bpar_T"])
    kw = dict(data.get("machine", {}))
    try:
        cfg = MachineConfig(
            magnet=magnet,
            armature=_build(ArmatureLayout, data.get("armature", {}), "armature"),
            wave=_build(WaveSpec, data.get("wave", {}), "wave"),
            circuit=_build(CircuitSpec, data.get("circuit", {}), "circuit"),
            lift=_build(LiftModel, lift_d, "lift"),
            cryo=_build(CryoSettings, data.get("cryo", {}), "cryo"),
            simulation=_build(SimulationSettings, data.get("simulation", {}), "simulation"),
            **kw,
        )
        cfg.assembly  # geometry errors surface at load time
    except TypeError as exc:
        raise ConfigError(f"[machine] {exc}") from exc
    except GeometryError as exc:
        raise ConfigError(f"[magnet] {exc}") from exc
    return cfg


def dumps(cfg: MachineConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def loads(text: str) -> MachineConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return config_from_dict(data)


def load_config(path: str | Path) -> MachineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return loads(p.read_text())


def save_config(cfg: MachineConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(cfg))


def config_hash(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()


def reference_toml_text() -> str:
    return resources.files("hts_wec").joinpath("data").joinpath("reference.toml").read_text()


# -------------------------------------------------------------- reference

REFERENCE_LAYERS = (6.0,) + (4.0,) * 11 + (6.0,)
# calibrated values, see hts_wec.calibration
REFERENCE_IRON_BOOST = 1.1331
REFERENCE_IC_REF_4MM = 852.32
REFERENCE_LIFT = LiftModel(kind="kim", k=0.1752, B0_T=0.06592, beta=0.4768)
REFERENCE_TURNS_PER_COIL = 350


def reference_magnet(layers_mm: tuple[float, ...] = REFERENCE_LAYERS, ic_ref_4mm: float = REFERENCE_IC_REF_4MM):
    """Reference magnet: 3.57 km of 4 mm and 2.38 km of 6 mm tape over four magnets.

    The 6 mm reference Ic scales with width.
    """
    tapes = tuple(TapeGrade(w, round(ic_ref_4mm * w / 4.0, 6)) for w in sorted(set(layers_mm)))
    total = {4.0: 3.57, 6.0: 2.38}
    if set(layers_mm) == {4.0}:
        total = {4.0: 3.57 + 2.38}
    return MagnetDesign(layers_mm=tuple(layers_mm), tapes=tapes, tape_total_km=_float_keys(total))


def build_reference_design() -> MachineConfig:
    """The reference operating point with the calibrated model parameters."""
    return MachineConfig(
        magnet=reference_magnet(),
        armature=ArmatureLayout(turns_per_coil=REFERENCE_TURNS_PER_COIL),
        operating_current_A=179.0,
        operating_temperature_K=20.0,
        wave=WaveSpec("sinusoidal", 1.25, 0.167, 0.0),
        circuit=CircuitSpec(L_source_H=0.15, R_load_ohm=4.2, L_smooth_H=2.7),
        iron_boost_factor=REFERENCE_IRON_BOOST,
        lift=REFERENCE_LIFT,
        pole_array="periodic",
    )


def single_width_variant(cfg: MachineConfig) -> MachineConfig:
    """Same total tape length wound entirely from 4 mm tape (13 double pancakes)."""
    mg = cfg.magnet
    g4 = next(t for t in mg.tapes if t.width_mm == 4.0)
    total = sum(v for _, v in mg.tape_total_km)
    single = replace(mg, layers_mm=(4.0,) * len(mg.layers_mm), tapes=(g4,), tape_total_km=((4.0, total),))
    return replace(cfg, magnet=single)

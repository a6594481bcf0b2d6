"""Coolant inventory, enthalpy stability margin and armature current density.

Material properties come from CSV tables shipped in ``hts_wec/data``;
values between samples use monotone cubic (PCHIP) interpolation and
queries outside a table are errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .geometry import MM, MagnetAssembly, WindingPack

H_VAPORIZATION_H2_J_PER_KG = 446e3
# Cu stabiliser and Ni-alloy substrate are both close to 8.9 g/cm^3
WINDING_DENSITY_KG_PER_M3 = 8900.0


class PropertyRangeError(ValueError):
    """Temperature outside the tabulated range."""


@dataclass(frozen=True)
class PropertyTable:
    T_K: tuple[float, ...]
    values: tuple[float, ...]
    name: str = ""
    units: str = ""

    def __post_init__(self) -> None:
        T = np.asarray(self.T_K, float)
        if len(T) < 2 or len(T) != len(self.values):
            raise ValueError("property table needs at least two (T, value) pairs of equal length")
        if np.any(np.diff(T) <= 0):
            raise ValueError("property table temperatures must be strictly increasing")

    @property
    def T_min(self) -> float:
        return self.T_K[0]

    @property
    def T_max(self) -> float:
        return self.T_K[-1]

    @property
    def _interp(self) -> PchipInterpolator:
        return PchipInterpolator(np.asarray(self.T_K), np.asarray(self.values))

    def check_range(self, lo: float, hi: float | None = None) -> None:
        hi = lo if hi is None else hi
        if lo < self.T_min - 1e-12 or hi > self.T_max + 1e-12:
            raise PropertyRangeError(
                f"{self.name or 'property'} table covers [{self.T_min}, {self.T_max}] K, requested [{lo}, {hi}] K"
            )

    def __call__(self, T):
        T = np.asarray(T, float)
        self.check_range(float(T.min()), float(T.max()))
        out = self._interp(T)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def from_csv(cls, path: str | Path, name: str = "") -> "PropertyTable":
        text = Path(path).read_text()
        return cls._parse(text, name or Path(path).stem)

    @classmethod
    def _parse(cls, text: str, name: str) -> "PropertyTable":
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header = rows[0].split(",")
        data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
        units = header[1].split("_", 1)[1] if "_" in header[1] else ""
        return cls(tuple(data[:, 0]), tuple(data[:, 1]), name, units)


def load_table(name: str) -> PropertyTable:
    """Embedded table by file stem: ``copper_enthalpy`` or ``winding_heat_capacity``."""
    text = resources.files("hts_wec").joinpath("data").joinpath(f"{name}.csv").read_text()
    return PropertyTable._parse(text, name)


def coolant_mass(
    magnet_mass_kg: float,
    copper_enthalpy: PropertyTable,
    h_vaporization_J_per_kg: float = H_VAPORIZATION_H2_J_PER_KG,
    T_warm: float = 300.0,
    T_cold: float = 20.0,
) -> float:
    """Liquid hydrogen boiled off cooling the magnets from ``T_warm`` to ``T_cold``."""
    if magnet_mass_kg < 0 or h_vaporization_J_per_kg <= 0:
        raise ValueError("magnet mass must be non-negative and latent heat positive")
    copper_enthalpy.check_range(T_cold, T_warm)
    dh = copper_enthalpy(T_warm) - copper_enthalpy(T_cold)
    return magnet_mass_kg * dh / h_vaporization_J_per_kg


def stability_margin(C: PropertyTable, T_op: float, T_cs: float, rtol: float = 1e-8) -> float:
    """Enthalpy margin: integral of the volumetric heat capacity from T_op to T_cs (J/m^3)."""
    if T_cs < T_op:
        raise ValueError("T_cs must not be below T_op")
    C.check_range(T_op, T_cs)
    if T_cs == T_op:
        return 0.0
    breaks = [t for t in C.T_K if T_op < t < T_cs]
    val, _ = quad(lambda T: C(T), T_op, T_cs, points=breaks or None, epsrel=rtol, epsabs=0.0, limit=200)
    return float(val)


def winding_volume_m3(obj: WindingPack | MagnetAssembly) -> float:
    """Conductor volume: each pancake is a full annulus of the tape width."""
    if isinstance(obj, MagnetAssembly):
        return sum(winding_volume_m3(pl.pack) for pl in obj.placements)
    vol = 0.0
    for dp in obj.pancakes:
        area = math.pi * (dp.outer_radius_mm**2 - dp.inner_radius_mm**2) * MM * MM
        vol += 2 * area * dp.tape.width_mm * MM
    return vol


def magnet_mass_kg(obj: WindingPack | MagnetAssembly, density_kg_per_m3: float = WINDING_DENSITY_KG_PER_M3) -> float:
    return winding_volume_m3(obj) * density_kg_per_m3


@dataclass(frozen=True)
class CryoReport:
    coolant_mass_kg: float
    magnet_mass_kg: float
    stability_margin_J_per_m3: float
    T_cs_K: float
    T_op_K: float
    T_C_K: float

    def __post_init__(self) -> None:
        if min(self.coolant_mass_kg, self.magnet_mass_kg, self.stability_margin_J_per_m3) < 0:
            raise ValueError("cryogenic quantities must be non-negative")
        if not self.T_op_K < self.T_cs_K < self.T_C_K:
            raise ValueError(f"need T_op < T_cs < T_C, got {self.T_op_K}, {self.T_cs_K}, {self.T_C_K}")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def cryo_report(
    assembly: MagnetAssembly,
    T_cs_K: float,
    T_op_K: float = 20.0,
    T_C_K: float = 92.0,
    density_kg_per_m3: float = WINDING_DENSITY_KG_PER_M3,
    h_vaporization_J_per_kg: float = H_VAPORIZATION_H2_J_PER_KG,
    copper_enthalpy: PropertyTable | None = None,
    heat_capacity: PropertyTable | None = None,
) -> CryoReport:
    mass = magnet_mass_kg(assembly, density_kg_per_m3)
    h = copper_enthalpy or load_table("copper_enthalpy")
    c = heat_capacity or load_table("winding_heat_capacity")
    return CryoReport(
        coolant_mass_kg=coolant_mass(mass, h, h_vaporization_J_per_kg, 300.0, T_op_K),
        magnet_mass_kg=mass,
        stability_margin_J_per_m3=stability_margin(c, T_op_K, T_cs_K),
        T_cs_K=T_cs_K,
        T_op_K=T_op_K,
        T_C_K=T_C_K,
    )


@dataclass(frozen=True)
class CurrentDensityReport:
    limit_A_per_mm2: float
    duty_threshold: float
    exceedance_fraction: tuple[float, ...]
    peak_density_A_per_mm2: float
    peak_current_A: float

    @property
    def passed(self) -> bool:
        return max(self.exceedance_fraction) < self.duty_threshold

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["exceedance_fraction"] = list(self.exceedance_fraction)
        d["passed"] = self.passed
        return d


def armature_current_density_check(
    i_phase: np.ndarray,
    conductor_area_mm2: float,
    limit_A_per_mm2: float = 6.0,
    duty_threshold: float = 0.05,
) -> CurrentDensityReport:
    """Fraction of samples, per phase, where |i| / area strictly exceeds the limit.

    ``i_phase`` is a (phases, n) array, typically the analysis window of a
    transient.
    """
    if conductor_area_mm2 <= 0:
        raise ValueError("conductor area must be positive")
    i = np.atleast_2d(np.asarray(i_phase, float))
    j = np.abs(i) / conductor_area_mm2
    frac = tuple(float(x) for x in (j > limit_A_per_mm2).mean(axis=1))
    return CurrentDensityReport(
        limit_A_per_mm2=limit_A_per_mm2,
        duty_threshold=duty_threshold,
        exceedance_fraction=frac,
        peak_density_A_per_mm2=float(j.max()) if j.size else 0.0,
        peak_current_A=float(np.abs(i).max()) if i.size else 0.0,
    )

"""Lorentz-force stress estimates for the field magnets.

Hoop stress per turn is the unconstrained-turn BJr estimate
sigma = J * B_z * r with J = I / (tape width x radial pitch).  Radial stress
is the magnetic pressure accumulated across the pancake from its inner
edge: sigma_r(k) = -sum_{j <= k} J B_z(j) t_j, negative meaning compression
of turn k against the turns outside it.  No elastic coupling between turns
is modelled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import MM, MagnetAssembly, TurnLoops
from .magnetostatics import TurnField, representative_magnets, winding_field

YOUNG_MODULUS_GPA = 160.0


@dataclass(frozen=True)
class StressMap:
    loops: TurnLoops
    sigma_hoop_MPa: np.ndarray
    sigma_radial_MPa: np.ndarray
    meta: dict = field(default_factory=lambda: {"young_modulus_GPa": YOUNG_MODULUS_GPA})

    @property
    def max_hoop_MPa(self) -> float:
        return float(self.sigma_hoop_MPa.max())

    @property
    def mean_hoop_MPa(self) -> float:
        return float(self.sigma_hoop_MPa.mean())

    @property
    def max_abs_radial_MPa(self) -> float:
        return float(np.abs(self.sigma_radial_MPa).max())

    def magnet(self, m: int) -> "StressMap":
        sel = self.loops.magnet == m
        return StressMap(self.loops.subset(sel), self.sigma_hoop_MPa[sel], self.sigma_radial_MPa[sel], self.meta)

    def pancake_mean_hoop_MPa(self) -> np.ndarray:
        """Mean hoop stress of each (magnet, pancake), in stack order."""
        key = self.loops.magnet * 100000 + self.loops.pancake
        return np.array([self.sigma_hoop_MPa[key == k].mean() for k in np.unique(key)])

    def summary(self) -> dict:
        return {
            "max_hoop_MPa": self.max_hoop_MPa,
            "mean_hoop_MPa": self.mean_hoop_MPa,
            "max_abs_radial_MPa": self.max_abs_radial_MPa,
            "max_pancake_mean_hoop_MPa": float(self.pancake_mean_hoop_MPa().max()),
            "young_modulus_GPa": self.meta.get("young_modulus_GPa"),
        }

    def to_csv(self, path: str | Path) -> None:
        lp = self.loops
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["magnet", "pancake", "turn", "r_mm", "z_mm", "sigma_hoop_MPa", "sigma_radial_MPa"])
            for k in range(len(lp)):
                w.writerow(
                    [
                        int(lp.magnet[k]),
                        int(lp.pancake[k]),
                        int(lp.turn[k]),
                        f"{lp.r_m[k] / MM:.6f}",
                        f"{lp.z_m[k] / MM:.6f}",
                        f"{self.sigma_hoop_MPa[k]:.9g}",
                        f"{self.sigma_radial_MPa[k]:.9g}",
                    ]
                )


def stress_from_field(tf: TurnField, current: float) -> StressMap:
    """Stress map from a turn field that is already evaluated at ``current``."""
    lp = tf.loops
    # current direction of each turn times its own field: J_signed * B_z
    J = current * lp.sign / (lp.width_m * lp.thickness_m)
    f = J * tf.B_z  # radial body force density, N/m^3 (outward positive)
    hoop = f * lp.r_m / 1e6
    radial = np.zeros(len(lp))
    key = lp.magnet * 100000 + lp.pancake
    for k in np.unique(key):
        idx = np.flatnonzero(key == k)
        idx = idx[np.argsort(lp.r_m[idx], kind="stable")]
        radial[idx] = -np.cumsum(f[idx] * lp.thickness_m[idx]) / 1e6
    return StressMap(lp, hoop, radial)


def hoop_stress_map(
    assembly: MagnetAssembly,
    current: float,
    iron_boost_factor: float = 1.0,
    magnets: Iterable[int] | None = None,
) -> StressMap:
    """Per-turn hoop and radial stress (default: the magnets representing the assembly)."""
    mags = representative_magnets(assembly) if magnets is None else tuple(magnets)
    tf = winding_field(assembly, current, iron_boost_factor, mags)
    return stress_from_field(tf, current)

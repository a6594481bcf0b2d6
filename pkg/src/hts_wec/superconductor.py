"""Critical current of the field magnets.

Local Ic depends on the field at each turn (anisotropic Kim form or a
tabulated lift grid) and linearly on temperature.  The magnet critical
current is the load-line fixed point I* = min over turns of Ic(B(I*)),
where B is proportional to I in the air-core model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import MagnetAssembly, TapeSpec
from .magnetostatics import FieldVector, TurnField, representative_magnets, winding_field


class TemperatureDomainError(ValueError):
    """Temperature outside [T_op, T_C]."""


class NegativeMarginError(ValueError):
    """Operating current at or above the magnet critical current."""


class LoadLineConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LiftModel:
    """Ic(B) / Ic_ref as a function of field perpendicular and parallel to the tape.

    ``kind="kim"``: 1 / (1 + sqrt(k^2 B_par^2 + B_perp^2) / B0)^beta.
    ``kind="table"``: bilinear interpolation on a (B_perp, B_par) grid; queries
    beyond the grid are clamped to its edge.
    In a pancake winding B_perp is the radial and B_par the axial component.
    """

    kind: str = "kim"
    k: float = 0.05
    B0_T: float = 0.05
    beta: float = 0.387
    table_bperp_T: tuple[float, ...] = ()
    table_bpar_T: tuple[float, ...] = ()
    table_lift: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "kim":
            if self.B0_T <= 0 or self.beta < 0 or self.k < 0:
                raise ValueError("Kim parameters need B0 > 0, beta >= 0, k >= 0")
        elif self.kind == "table":
            g = np.asarray(self.table_lift, float)
            bp, bl = np.asarray(self.table_bperp_T), np.asarray(self.table_bpar_T)
            if g.shape != (len(bp), len(bl)) or len(bp) < 2 or len(bl) < 2:
                raise ValueError("lift table shape must be (len(B_perp), len(B_par)), each axis >= 2")
            if np.any(np.diff(bp) <= 0) or np.any(np.diff(bl) <= 0):
                raise ValueError("lift table axes must be strictly increasing")
            if np.any(g <= 0):
                raise ValueError("lift values must be positive")
            if np.any(np.diff(g, axis=0) > 0) or np.any(np.diff(g, axis=1) > 0):
                raise ValueError("lift table must be non-increasing in both field components")
        else:
            raise ValueError(f"unknown lift model kind {self.kind!r}")

    @classmethod
    def field_independent(cls) -> "LiftModel":
        return cls(kind="kim", k=0.0, B0_T=1.0, beta=0.0)

    def __call__(self, B_perp, B_par) -> np.ndarray:
        bp = np.abs(np.asarray(B_perp, float))
        bl = np.abs(np.asarray(B_par, float))
        if self.kind == "kim":
            if self.beta == 0.0:
                return np.ones(np.broadcast(bp, bl).shape)
            return (1.0 + np.sqrt((self.k * bl) ** 2 + bp**2) / self.B0_T) ** (-self.beta)
        ax_p = np.asarray(self.table_bperp_T)
        ax_l = np.asarray(self.table_bpar_T)
        interp = RegularGridInterpolator((ax_p, ax_l), np.asarray(self.table_lift, float))
        bp, bl = np.broadcast_arrays(np.clip(bp, ax_p[0], ax_p[-1]), np.clip(bl, ax_l[0], ax_l[-1]))
        return interp(np.stack([bp.ravel(), bl.ravel()], axis=-1)).reshape(bp.shape)


def temperature_factor(T, T_op: float, T_C: float):
    """(T_C - T) / (T_C - T_op), the linear temperature scaling of Ic."""
    T = np.asarray(T, float)
    if np.any(T < T_op - 1e-12) or np.any(T > T_C + 1e-12):
        raise TemperatureDomainError(f"temperature outside [{T_op}, {T_C}] K")
    return (T_C - T) / (T_C - T_op)


def ic_local(tape: TapeSpec, lift: LiftModel, B: FieldVector, T: float) -> float:
    """Critical current of one turn of ``tape`` in field ``B`` at temperature ``T``."""
    ic0 = tape.ic_ref_A * float(lift(B.B_r, B.B_z))
    return ic0 * float(temperature_factor(T, tape.reference_temperature_K, tape.critical_temperature_K))


def turn_critical_currents(field: TurnField, lift: LiftModel, T: float, T_op: float = 20.0, T_C: float = 92.0):
    """Per-turn Ic for the turn field ``field`` (already at the current of interest)."""
    scale = temperature_factor(T, T_op, T_C)
    return field.loops.ic_ref_A * lift(field.B_r, field.B_z) * scale


@dataclass(frozen=True)
class LoadLineResult:
    critical_current_A: float
    limiting_magnet: int
    limiting_turn: tuple[int, int]  # (pancake, turn) inside the limiting magnet
    operating_current_A: float
    margin_A: float
    margin_percent: float
    iterations: int
    residual_A: float

    @property
    def negative_margin(self) -> bool:
        return self.margin_A <= 0


def _assembly_temperatures(assembly: MagnetAssembly) -> tuple[float, float]:
    tapes = {dp.tape for pl in assembly.placements for dp in pl.pack.pancakes}
    t_ref = {t.reference_temperature_K for t in tapes}
    t_c = {t.critical_temperature_K for t in tapes}
    if len(t_ref) != 1 or len(t_c) != 1:
        raise ValueError("all tapes must share reference and critical temperatures")
    return t_ref.pop(), t_c.pop()


def unit_turn_field(assembly: MagnetAssembly, iron_boost_factor: float = 1.0) -> TurnField:
    """Turn field per ampere for the magnets that represent the assembly."""
    return winding_field(assembly, 1.0, iron_boost_factor, representative_magnets(assembly))


def magnet_critical_current(
    assembly: MagnetAssembly,
    lift: LiftModel,
    T: float = 20.0,
    iron_boost_factor: float = 1.0,
    operating_current_A: float = 179.0,
    tol_A: float = 1e-3,
    max_iter: int = 200,
    unit_field: TurnField | None = None,
) -> LoadLineResult:
    """Load-line fixed point by bisection on I.

    g(I) = min_turn Ic(B(I)) - I is strictly decreasing (lift is
    non-increasing in |B| and |B| grows with I), positive at I = 0 and
    non-positive at I = max Ic_ref, so the bracket is always valid.
    """
    T_op, T_C = _assembly_temperatures(assembly)
    unit = unit_field if unit_field is not None else unit_turn_field(assembly, iron_boost_factor)
    scale = float(temperature_factor(T, T_op, T_C))
    ic_ref = unit.loops.ic_ref_A

    def min_ic(I: float) -> float:
        return float(np.min(ic_ref * lift(unit.B_r * I, unit.B_z * I))) * scale

    lo, hi = 0.0, float(ic_ref.max()) * scale
    if hi == 0.0:
        return _result(unit, lift, 0.0, scale, operating_current_A, 0, 0.0)
    it = 0
    while hi - lo > tol_A:
        it += 1
        if it > max_iter:
            raise LoadLineConvergenceError(f"load line not converged after {max_iter} iterations ([{lo}, {hi}] A)")
        mid = 0.5 * (lo + hi)
        if min_ic(mid) > mid:
            lo = mid
        else:
            hi = mid
    I_star = 0.5 * (lo + hi)
    return _result(unit, lift, I_star, scale, operating_current_A, it, min_ic(I_star) - I_star)


def _result(unit: TurnField, lift, I_star, scale, I_op, it, residual) -> LoadLineResult:
    ic = unit.loops.ic_ref_A * lift(unit.B_r * I_star, unit.B_z * I_star) * scale
    # turns are ordered (magnet, z, r); break exact ties by (magnet, pancake, turn)
    order = np.lexsort((unit.loops.turn, unit.loops.pancake, unit.loops.magnet))
    k = order[np.argmin(ic[order])]
    margin = I_star - I_op
    return LoadLineResult(
        critical_current_A=float(I_star),
        limiting_magnet=int(unit.loops.magnet[k]),
        limiting_turn=(int(unit.loops.pancake[k]), int(unit.loops.turn[k])),
        operating_current_A=float(I_op),
        margin_A=float(margin),
        margin_percent=float(100.0 * margin / I_op) if I_op > 0 else math.inf,
        iterations=it,
        residual_A=float(residual),
    )


def current_margin(I_op: float, result: LoadLineResult | float) -> tuple[float, float]:
    """(margin in A, margin in % of the operating current)."""
    ic = result.critical_current_A if isinstance(result, LoadLineResult) else float(result)
    if I_op >= ic:
        raise NegativeMarginError(f"operating current {I_op} A is not below the critical current {ic:.3f} A")
    return ic - I_op, 100.0 * (ic - I_op) / I_op


def ic_temperature_curve(Ic0: float, T_op: float, T_C: float, n_points: int = 73) -> np.ndarray:
    """(n, 2) array of (T, Ic) on the straight line from (T_op, Ic0) to (T_C, 0)."""
    if T_C <= T_op:
        raise ValueError("T_C must exceed T_op")
    if n_points < 2:
        raise ValueError("need at least two points")
    T = np.linspace(T_op, T_C, n_points)
    return np.column_stack([T, Ic0 * (T_C - T) / (T_C - T_op)])


def current_sharing_temperature(I_op: float, Ic0: float, T_op: float, T_C: float) -> float:
    """Temperature at which the linear Ic(T) falls to the operating current."""
    if not 0 < I_op <= Ic0:
        raise ValueError("need 0 < I_op <= Ic0")
    return T_C - (T_C - T_op) * I_op / Ic0


def load_line_curve(
    unit: TurnField, lift: LiftModel, currents: Iterable[float], T: float = 20.0, T_op: float = 20.0, T_C: float = 92.0
) -> np.ndarray:
    """(n, 2) array of (I, min-turn Ic at that current)."""
    scale = float(temperature_factor(T, T_op, T_C))
    rows = []
    for I in currents:
        rows.append((float(I), float(np.min(unit.loops.ic_ref_A * lift(unit.B_r * I, unit.B_z * I))) * scale))
    return np.array(rows)


def load_line_to_csv(curve: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["I_A", "min_Ic_A"])
        for I, ic in curve:
            w.writerow([f"{I:.6f}", f"{ic:.6f}"])

"""Machine geometry: tape, double pancakes, winding packs, magnet stack and armature.

Lengths are stored in millimetres (the unit the design tables use); every
physics routine converts to metres through the ``*_m`` helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

MM = 1e-3


class GeometryError(ValueError):
    """Raised when a geometric description violates its invariants."""


@dataclass(frozen=True)
class TapeSpec:
    """REBCO coated-conductor tape.

    ``thickness_mm`` is the radial pitch of one turn in a pancake, i.e. tape
    plus whatever co-wind/filler sits between turns.
    """

    width_mm: float
    thickness_mm: float
    ic_ref_A: float
    reference_temperature_K: float = 20.0
    critical_temperature_K: float = 92.0

    def __post_init__(self) -> None:
        if self.width_mm <= 0 or self.thickness_mm <= 0:
            raise GeometryError("tape width and thickness must be positive")
        if self.ic_ref_A <= 0:
            raise GeometryError("reference critical current must be positive")
        if self.critical_temperature_K <= self.reference_temperature_K:
            raise GeometryError("critical temperature must exceed reference temperature")

    @property
    def cross_section_m2(self) -> float:
        return self.width_mm * self.thickness_mm * MM * MM


@dataclass(frozen=True)
class DoublePancake:
    """Two pancakes wound from one tape, stacked axially around ``axial_center_mm``.

    ``pancake_gap_mm`` is the axial spacer between the two pancakes.
    """

    tape: TapeSpec
    inner_radius_mm: float
    turns_per_pancake: int
    axial_center_mm: float = 0.0
    polarity: int = 1
    pancake_gap_mm: float = 0.0

    def __post_init__(self) -> None:
        if self.inner_radius_mm <= 0:
            raise GeometryError("inner radius must be positive")
        if self.turns_per_pancake < 1:
            raise GeometryError("a pancake needs at least one turn")
        if self.polarity not in (1, -1):
            raise GeometryError("polarity must be +1 or -1")
        if self.pancake_gap_mm < 0:
            raise GeometryError("pancake gap must be non-negative")

    @property
    def outer_radius_mm(self) -> float:
        return self.inner_radius_mm + self.turns_per_pancake * self.tape.thickness_mm

    @property
    def height_mm(self) -> float:
        return 2 * self.tape.width_mm + self.pancake_gap_mm

    @property
    def bottom_mm(self) -> float:
        return self.axial_center_mm - self.height_mm / 2

    @property
    def top_mm(self) -> float:
        return self.axial_center_mm + self.height_mm / 2

    def pancake_centers_mm(self) -> tuple[float, float]:
        off = (self.tape.width_mm + self.pancake_gap_mm) / 2
        return (self.axial_center_mm - off, self.axial_center_mm + off)

    def turn_radii_mm(self) -> np.ndarray:
        n = np.arange(self.turns_per_pancake)
        return self.inner_radius_mm + (n + 0.5) * self.tape.thickness_mm

    def tape_length_m(self) -> float:
        # sum of 2*pi*r over an arithmetic sequence of radii, both pancakes
        n = self.turns_per_pancake
        mean_r = self.inner_radius_mm + n * self.tape.thickness_mm / 2
        return 2 * n * 2 * math.pi * mean_r * MM


@dataclass(frozen=True)
class WindingPack:
    """Axial stack of double pancakes separated by insulation plates."""

    pancakes: tuple[DoublePancake, ...]
    insulation_plate_thickness_mm: float = 0.5

    def __post_init__(self) -> None:
        if not self.pancakes:
            raise GeometryError("winding pack needs at least one double pancake")
        dps = self.pancakes
        for lower, upper in zip(dps, dps[1:]):
            spacing = upper.bottom_mm - lower.top_mm
            if spacing < self.insulation_plate_thickness_mm - 1e-9:
                raise GeometryError(
                    f"double pancakes overlap: spacing {spacing:.4f} mm "
                    f"< plate {self.insulation_plate_thickness_mm} mm"
                )

    @property
    def total_height_mm(self) -> float:
        return self.pancakes[-1].top_mm - self.pancakes[0].bottom_mm

    @property
    def total_width_mm(self) -> float:
        inner = min(dp.inner_radius_mm for dp in self.pancakes)
        outer = max(dp.outer_radius_mm for dp in self.pancakes)
        return outer - inner

    @property
    def axial_center_mm(self) -> float:
        return (self.pancakes[-1].top_mm + self.pancakes[0].bottom_mm) / 2

    @property
    def turn_count(self) -> int:
        return sum(2 * dp.turns_per_pancake for dp in self.pancakes)


@dataclass(frozen=True)
class PackPlacement:
    pack: WindingPack
    position_mm: float
    polarity: int

    def __post_init__(self) -> None:
        if self.polarity not in (1, -1):
            raise GeometryError("polarity must be +1 or -1")


@dataclass(frozen=True)
class MagnetAssembly:
    """Field magnets mounted along the actuator, alternating polarity."""

    placements: tuple[PackPlacement, ...]
    pole_pitch_mm: float
    cryostat_height_mm: float = 131.8
    cryostat_width_mm: float = 34.5

    def __post_init__(self) -> None:
        pos = [p.position_mm for p in self.placements]
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise GeometryError("magnet positions must be strictly increasing")
        for a, b in zip(self.placements, self.placements[1:]):
            if a.polarity * b.polarity != -1:
                raise GeometryError("adjacent magnets must have opposite polarity")
        if self.pole_pitch_mm <= 0:
            raise GeometryError("pole pitch must be positive")

    @property
    def magnet_count(self) -> int:
        return len(self.placements)


@dataclass(frozen=True)
class ArmatureCoil:
    """One stator bobbin, an annulus of ``turns`` copper turns."""

    phase: int
    sign: int
    z_center_mm: float
    inner_radius_mm: float
    radial_width_mm: float
    height_mm: float
    turns: int

    @property
    def outer_radius_mm(self) -> float:
        return self.inner_radius_mm + self.radial_width_mm

    @property
    def mean_turn_length_m(self) -> float:
        return 2 * math.pi * (self.inner_radius_mm + self.radial_width_mm / 2) * MM


@dataclass(frozen=True)
class ArmatureLayout:
    """Stator slots.

    ``coil_radial_width_mm`` is the 220 mm "armature coil width"; the coil
    annulus starts at actuator radius + air gap.
    """

    slot_count: int = 12
    phases: int = 3
    coils_per_phase: int = 4
    coil_height_mm: float = 50.0
    coil_radial_width_mm: float = 220.0
    turns_per_coil: int = 350
    air_gap_mm: float = 10.0
    actuator_radius_mm: float = 100.0
    conductor_area_mm2: float = 13.5
    slots_per_pole: int = 3
    slot_pitch_mm: float | None = None
    copper_resistivity_ohm_m: float = 1.72e-8

    def __post_init__(self) -> None:
        if self.slot_count != self.phases * self.coils_per_phase:
            raise GeometryError("slot_count must equal phases * coils_per_phase")
        if self.phases != 3:
            raise GeometryError("only three-phase armatures are supported")
        if self.slots_per_pole != 3:
            raise GeometryError("the winding layout assumes three slots per pole")
        if self.turns_per_coil < 1 or self.conductor_area_mm2 <= 0:
            raise GeometryError("invalid armature conductor description")

    @property
    def coil_inner_radius_mm(self) -> float:
        return self.actuator_radius_mm + self.air_gap_mm

    def coils(self, pole_pitch_mm: float) -> list[ArmatureCoil]:
        """Slot-by-slot coil list.

        Slots are 60 electrical degrees apart; the phase belt runs
        A, -C, B, -A, C, -B so phase B sits 2/3 of a pole pitch after A.
        """
        pitch = self.slot_pitch_mm or pole_pitch_mm / self.slots_per_pole
        phase_of = (0, 2, 1)
        out = []
        for j in range(self.slot_count):
            out.append(
                ArmatureCoil(
                    phase=phase_of[j % 3],
                    sign=1 if j % 2 == 0 else -1,
                    z_center_mm=(j - (self.slot_count - 1) / 2) * pitch,
                    inner_radius_mm=self.coil_inner_radius_mm,
                    radial_width_mm=self.coil_radial_width_mm,
                    height_mm=self.coil_height_mm,
                    turns=self.turns_per_coil,
                )
            )
        return out

    def phase_resistance_ohm(self) -> float:
        """Series resistance of one phase from copper geometry."""
        coil = self.coils(1.0)[0]
        length = self.coils_per_phase * self.turns_per_coil * coil.mean_turn_length_m
        return self.copper_resistivity_ohm_m * length / (self.conductor_area_mm2 * MM * MM)


# ---------------------------------------------------------------- builders


def stack_pack(
    layers: Sequence[tuple[TapeSpec, int]],
    inner_radius_mm: float,
    total_height_mm: float | None = None,
    insulation_plate_thickness_mm: float = 0.5,
    pancake_gap_mm: float | None = None,
) -> WindingPack:
    """Stack double pancakes bottom to top, centred on z = 0.

    ``layers`` lists (tape, turns per pancake) per double pancake. When
    ``total_height_mm`` is given the pancake gap is chosen so the stack
    tiles that height exactly.
    """
    n = len(layers)
    plates = (n - 1) * insulation_plate_thickness_mm
    tape_height = sum(2 * tape.width_mm for tape, _ in layers)
    if pancake_gap_mm is None:
        if total_height_mm is None:
            pancake_gap_mm = 0.0
        else:
            pancake_gap_mm = (total_height_mm - tape_height - plates) / n
    if pancake_gap_mm < 0:
        raise GeometryError(
            f"layers do not fit in {total_height_mm} mm (need {tape_height + plates:.2f} mm)"
        )
    height = tape_height + plates + n * pancake_gap_mm
    z = -height / 2
    dps = []
    for tape, turns in layers:
        h = 2 * tape.width_mm + pancake_gap_mm
        dps.append(
            DoublePancake(
                tape=tape,
                inner_radius_mm=inner_radius_mm,
                turns_per_pancake=int(turns),
                axial_center_mm=z + h / 2,
                pancake_gap_mm=pancake_gap_mm,
            )
        )
        z += h + insulation_plate_thickness_mm
    return WindingPack(tuple(dps), insulation_plate_thickness_mm)


def place_magnets(
    pack: WindingPack,
    count: int,
    pole_pitch_mm: float,
    cryostat_height_mm: float = 131.8,
    cryostat_width_mm: float = 34.5,
) -> MagnetAssembly:
    """Identical packs at pole-pitch spacing, centred on the actuator midpoint."""
    placements = tuple(
        PackPlacement(pack, (m - (count - 1) / 2) * pole_pitch_mm, 1 if m % 2 == 0 else -1)
        for m in range(count)
    )
    return MagnetAssembly(placements, pole_pitch_mm, cryostat_height_mm, cryostat_width_mm)


def fit_turns_to_length(
    tape_length_m: float, pancakes: int, inner_radius_mm: float, radial_build_mm: float
) -> tuple[int, float]:
    """Integer turn count and radial pitch that consume exactly ``tape_length_m``.

    The nominal radial build fixes the turn count; the pitch (and so the
    realised build) is then adjusted so the length is conserved exactly.
    Returns (turns per pancake, radial pitch in mm).
    """
    if pancakes < 1 or tape_length_m <= 0:
        raise GeometryError("need at least one pancake and a positive tape length")
    per_pancake = tape_length_m / pancakes
    mean_r = (inner_radius_mm + radial_build_mm / 2) * MM
    n = max(1, round(per_pancake / (2 * math.pi * mean_r)))
    # per_pancake = 2*pi*n*(r_in + n*t/2)
    pitch_mm = 2 * (per_pancake / (2 * math.pi * n) / MM - inner_radius_mm) / n
    if pitch_mm <= 0:
        raise GeometryError("tape too short for the requested inner radius")
    return n, pitch_mm


# ----------------------------------------------------------- derived views


def tape_length_of(pack: WindingPack | MagnetAssembly) -> dict[float, float]:
    """Tape length in metres per tape width (mm)."""
    out: dict[float, float] = {}
    if isinstance(pack, MagnetAssembly):
        for pl in pack.placements:
            for w, length in tape_length_of(pl.pack).items():
                out[w] = out.get(w, 0.0) + length
        return out
    for dp in pack.pancakes:
        out[dp.tape.width_mm] = out.get(dp.tape.width_mm, 0.0) + dp.tape_length_m()
    return out


@dataclass(frozen=True)
class TurnLoops:
    """Flat arrays describing every physical turn (one entry per turn).

    ``pancake`` indexes the single pancake (two per double pancake),
    ``turn`` the turn within it, ``magnet`` the placement.
    """

    r_m: np.ndarray
    z_m: np.ndarray
    sign: np.ndarray
    width_m: np.ndarray
    thickness_m: np.ndarray
    magnet: np.ndarray
    pancake: np.ndarray
    turn: np.ndarray
    ic_ref_A: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.r_m)

    def subset(self, mask: np.ndarray) -> "TurnLoops":
        return TurnLoops(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))


def _pack_loops(pack: WindingPack, offset_mm: float, polarity: int, magnet: int) -> list[tuple]:
    rows = []
    p_index = 0
    for dp in pack.pancakes:
        radii = dp.turn_radii_mm()
        for zc in dp.pancake_centers_mm():
            for t, r in enumerate(radii):
                rows.append(
                    (
                        r * MM,
                        (zc + offset_mm) * MM,
                        polarity * dp.polarity,
                        dp.tape.width_mm * MM,
                        dp.tape.thickness_mm * MM,
                        magnet,
                        p_index,
                        t,
                        dp.tape.ic_ref_A,
                    )
                )
            p_index += 1
    return rows


def turn_loops_of(obj: WindingPack | MagnetAssembly) -> TurnLoops:
    """One circular loop per physical turn, sorted by (magnet, axial, radius)."""
    if isinstance(obj, WindingPack):
        rows = _pack_loops(obj, 0.0, 1, 0)
    else:
        rows = []
        for m, pl in enumerate(obj.placements):
            rows.extend(_pack_loops(pl.pack, pl.position_mm, pl.polarity, m))
    arr = np.array(rows, dtype=float).reshape(-1, 9)
    order = np.lexsort((arr[:, 0], arr[:, 1], arr[:, 5]))
    arr = arr[order]
    return TurnLoops(
        r_m=arr[:, 0],
        z_m=arr[:, 1],
        sign=arr[:, 2],
        width_m=arr[:, 3],
        thickness_m=arr[:, 4],
        magnet=arr[:, 5].astype(int),
        pancake=arr[:, 6].astype(int),
        turn=arr[:, 7].astype(int),
        ic_ref_A=arr[:, 8],
    )


def with_reference_ic(pack: WindingPack, ic_ref_by_width: dict[float, float]) -> WindingPack:
    """Copy of ``pack`` with the reference Ic of each tape width replaced."""
    dps = []
    for dp in pack.pancakes:
        ic = ic_ref_by_width.get(dp.tape.width_mm)
        dps.append(dp if ic is None else replace(dp, tape=replace(dp.tape, ic_ref_A=float(ic))))
    return WindingPack(tuple(dps), pack.insulation_plate_thickness_mm)


def periodic_extension(assembly: MagnetAssembly, half_span_mm: float) -> MagnetAssembly:
    """Repeat the magnet train end to end until it covers +/- ``half_span_mm``.

    The train period is magnet_count x pole pitch, so the count must be even
    for the polarity to keep alternating across the seams.
    """
    n = assembly.magnet_count
    if n % 2:
        raise GeometryError("periodic extension needs an even magnet count")
    period = n * assembly.pole_pitch_mm
    k = math.ceil(half_span_mm / period) + 1
    placements = tuple(
        replace(pl, position_mm=pl.position_mm + j * period) for j in range(-k, k + 1) for pl in assembly.placements
    )
    return replace(assembly, placements=placements)

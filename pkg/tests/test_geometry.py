import math

import numpy as np
import pytest

from hts_wec.geometry import (
    ArmatureLayout,
    DoublePancake,
    GeometryError,
    TapeSpec,
    WindingPack,
    fit_turns_to_length,
    periodic_extension,
    place_magnets,
    stack_pack,
    tape_length_of,
    turn_loops_of,
)

TAPE4 = TapeSpec(4.0, 0.1, 500.0)


def one_dp(turns, r_in=100.0):
    return WindingPack((DoublePancake(TAPE4, r_in, turns, 0.0),), 0.5)


def test_tape_spec_rejects_nonphysical_values():
    with pytest.raises(GeometryError):
        TapeSpec(0.0, 0.1, 100.0)
    with pytest.raises(GeometryError):
        TapeSpec(4.0, 0.1, 100.0, reference_temperature_K=95.0, critical_temperature_K=92.0)


def test_single_turn_length_is_its_circumference():
    pack = one_dp(1, r_in=100.0 - 0.05)  # turn centre at 100 mm
    # one turn in each pancake of the double pancake
    assert tape_length_of(pack)[4.0] / 2 == pytest.approx(2 * math.pi * 0.1, rel=1e-12)


def test_outer_radius_follows_turn_count_and_thickness():
    dp = DoublePancake(TAPE4, 70.0, 30, 0.0)
    assert dp.outer_radius_mm == pytest.approx(70.0 + 30 * 0.1)


def test_zero_turns_rejected():
    with pytest.raises(GeometryError):
        one_dp(0)


def test_loop_count_is_two_per_turn():
    assert len(turn_loops_of(one_dp(10))) == 20


def test_loops_sorted_by_axial_then_radius():
    pack = stack_pack([(TAPE4, 5), (TAPE4, 5)], 50.0, 20.0)
    lp = turn_loops_of(pack)
    keys = list(zip(lp.z_m, lp.r_m))
    assert keys == sorted(keys)


def test_loop_count_times_mean_circumference_matches_tape_length():
    pack = stack_pack([(TapeSpec(6.0, 0.08, 700.0), 40), (TAPE4, 60), (TapeSpec(6.0, 0.08, 700.0), 40)], 71.6, 40.0)
    lp = turn_loops_of(pack)
    total = len(lp) * np.mean(2 * math.pi * lp.r_m)
    assert total == pytest.approx(sum(tape_length_of(pack).values()), rel=1e-9)


def test_stack_tiles_the_requested_height():
    pack = stack_pack([(TAPE4, 5)] * 3, 50.0, 30.0, 0.5)
    assert pack.total_height_mm == pytest.approx(30.0, abs=1e-12)
    tops = [dp.top_mm for dp in pack.pancakes]
    bottoms = [dp.bottom_mm for dp in pack.pancakes]
    gaps = np.array(bottoms[1:]) - np.array(tops[:-1])
    assert np.allclose(gaps, 0.5)


def test_stack_that_does_not_fit_is_rejected():
    with pytest.raises(GeometryError):
        stack_pack([(TAPE4, 5)] * 3, 50.0, 20.0)


def test_fit_turns_conserves_tape_length_exactly():
    n, pitch = fit_turns_to_length(892.5, 22, 71.6, 22.4)
    pack = stack_pack([(TapeSpec(4.0, pitch, 1.0), n)] * 11, 71.6, 119.8)
    assert tape_length_of(pack)[4.0] == pytest.approx(892.5, rel=1e-12)


def test_polarities_alternate_and_positions_increase():
    asm = place_magnets(one_dp(5), 4, 287.5)
    pol = [p.polarity for p in asm.placements]
    assert all(a * b == -1 for a, b in zip(pol, pol[1:]))
    pos = [p.position_mm for p in asm.placements]
    assert np.all(np.diff(pos) > 0)
    assert np.mean(pos) == pytest.approx(0.0)


def test_periodic_extension_keeps_pitch_and_alternation():
    asm = place_magnets(one_dp(5), 4, 100.0)
    ext = periodic_extension(asm, 1000.0)
    pos = np.array([p.position_mm for p in ext.placements])
    assert np.allclose(np.diff(pos), 100.0)
    assert pos.min() < -1000 and pos.max() > 1000
    # the original magnets are part of the extended train with their own polarity
    orig = {p.position_mm: p.polarity for p in asm.placements}
    for p in ext.placements:
        if p.position_mm in orig:
            assert p.polarity == orig[p.position_mm]


def test_armature_phase_b_lags_a_by_two_thirds_of_a_pole_pitch():
    coils = ArmatureLayout().coils(300.0)
    a = [c for c in coils if c.phase == 0]
    b = [c for c in coils if c.phase == 1]
    assert len(a) == len(b) == 4
    # same-sign coils of A and B are 2/3 pole pitch apart
    assert b[0].z_center_mm - a[0].z_center_mm == pytest.approx(200.0)
    assert b[0].sign == a[0].sign


def test_armature_slot_count_must_match_phases():
    with pytest.raises(GeometryError):
        ArmatureLayout(slot_count=10)


def test_reference_tape_usage(reference):
    lengths = tape_length_of(reference.assembly)
    assert lengths[4.0] == pytest.approx(3570.0, rel=1e-9)
    assert lengths[6.0] == pytest.approx(2380.0, rel=1e-9)


def test_reference_pack_dimensions(reference):
    pack = reference.pack
    assert pack.total_height_mm == pytest.approx(119.8, abs=1e-9)
    assert pack.total_width_mm == pytest.approx(22.4, rel=0.02)
    assert len(pack.pancakes) == 13
    widths = [dp.tape.width_mm for dp in pack.pancakes]
    assert widths[0] == widths[-1] == 6.0 and set(widths[1:-1]) == {4.0}

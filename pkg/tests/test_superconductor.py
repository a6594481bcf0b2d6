import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hts_wec.geometry import TapeSpec, place_magnets, stack_pack, with_reference_ic
from hts_wec.magnetostatics import FieldVector
from hts_wec.superconductor import (
    LiftModel,
    LoadLineResult,
    NegativeMarginError,
    TemperatureDomainError,
    current_margin,
    current_sharing_temperature,
    ic_local,
    ic_temperature_curve,
    load_line_curve,
    load_line_to_csv,
    magnet_critical_current,
    temperature_factor,
    unit_turn_field,
)

TAPE = TapeSpec(4.0, 0.1, 600.0)
B = FieldVector(0.8, 2.5)
LIFT = LiftModel("kim", 0.2, 0.07, 0.5)


def test_ic_is_linear_in_temperature():
    ic0 = ic_local(TAPE, LIFT, B, 20.0)
    assert ic0 == pytest.approx(600.0 * float(LIFT(0.8, 2.5)), rel=1e-15)
    assert ic_local(TAPE, LIFT, B, 56.0) == pytest.approx(ic0 / 2, rel=1e-12)
    assert ic_local(TAPE, LIFT, B, 92.0) == 0.0


@pytest.mark.parametrize("T", [19.9, 92.5])
def test_temperature_outside_domain_is_rejected(T):
    with pytest.raises(TemperatureDomainError):
        ic_local(TAPE, LIFT, B, T)


@settings(max_examples=50, deadline=None)
@given(bp=st.floats(0, 10), bl=st.floats(0, 10), dp=st.floats(0, 2), dl=st.floats(0, 2))
def test_kim_lift_is_bounded_and_non_increasing(bp, bl, dp, dl):
    here = float(LIFT(bp, bl))
    assert 0 < here <= 1
    assert float(LIFT(bp + dp, bl)) <= here + 1e-15
    assert float(LIFT(bp, bl + dl)) <= here + 1e-15


def test_lift_depends_only_on_field_magnitude_per_component():
    assert float(LIFT(-0.5, -1.0)) == float(LIFT(0.5, 1.0))


def test_table_lift_interpolates_bilinearly_and_clamps():
    table = LiftModel(
        "table", table_bperp_T=(0.0, 1.0), table_bpar_T=(0.0, 2.0), table_lift=((1.0, 0.8), (0.5, 0.4))
    )
    assert float(table(0.5, 1.0)) == pytest.approx((1.0 + 0.8 + 0.5 + 0.4) / 4)
    assert float(table(5.0, 5.0)) == pytest.approx(0.4)


def test_table_lift_must_be_non_increasing():
    with pytest.raises(ValueError):
        LiftModel("table", table_bperp_T=(0.0, 1.0), table_bpar_T=(0.0, 1.0), table_lift=((0.5, 0.6), (0.4, 0.3)))


@pytest.fixture(scope="module")
def small_assembly():
    pack = stack_pack([(TapeSpec(6.0, 0.1, 900.0), 40), (TAPE, 40), (TAPE, 40), (TapeSpec(6.0, 0.1, 900.0), 40)], 70.0, 42.0)
    return place_magnets(pack, 2, 150.0)


def test_field_independent_lift_returns_reference_ic(small_assembly):
    res = magnet_critical_current(small_assembly, LiftModel.field_independent(), 20.0)
    assert res.critical_current_A == pytest.approx(600.0, abs=1e-3)
    assert res.iterations <= 200


def test_load_line_fixed_point_residual(small_assembly):
    res = magnet_critical_current(small_assembly, LIFT, 20.0, operating_current_A=50.0)
    assert abs(res.residual_A) < 1e-3
    unit = unit_turn_field(small_assembly)
    ic = unit.loops.ic_ref_A * LIFT(unit.B_r * res.critical_current_A, unit.B_z * res.critical_current_A)
    assert abs(ic.min() - res.critical_current_A) < 1e-3
    assert res.margin_A == pytest.approx(res.critical_current_A - 50.0)


def test_load_line_is_non_increasing(small_assembly):
    unit = unit_turn_field(small_assembly)
    curve = load_line_curve(unit, LIFT, np.linspace(0, 800, 41))
    assert np.all(np.diff(curve[:, 1]) <= 1e-12)


def test_critical_current_falls_with_temperature(small_assembly):
    cold = magnet_critical_current(small_assembly, LIFT, 20.0).critical_current_A
    warm = magnet_critical_current(small_assembly, LIFT, 50.0).critical_current_A
    assert warm < cold


def test_limiting_turn_tie_breaks_to_lowest_index():
    # with a field-independent lift every turn of the weaker tape ties
    pack = stack_pack([(TAPE, 5), (TAPE, 5)], 70.0, 20.0)
    asm = place_magnets(pack, 2, 100.0)
    res = magnet_critical_current(asm, LiftModel.field_independent(), 20.0)
    assert (res.limiting_magnet, res.limiting_turn) == (0, (0, 0))


def test_limiting_turn_sits_in_the_high_field_region(reference, reference_unit_field, reference_loadline):
    tf = reference_unit_field
    sel = (tf.loops.magnet == reference_loadline.limiting_magnet) & (
        tf.loops.pancake == reference_loadline.limiting_turn[0]
    ) & (tf.loops.turn == reference_loadline.limiting_turn[1])
    assert sel.sum() == 1
    I = reference_loadline.critical_current_A
    ic = tf.loops.ic_ref_A * reference.lift(tf.B_r * I, tf.B_z * I)
    assert ic.max() >= ic.min()
    # the perpendicular (radial) component drives the lift; the limiting turn is in its top decile
    br = np.abs(tf.B_r)
    assert br[sel][0] >= np.quantile(br, 0.9)


def test_margin_arithmetic():
    assert current_margin(100.0, 200.0) == pytest.approx((100.0, 100.0))
    m_a, m_p = current_margin(179.0, 215.0)
    assert m_a == pytest.approx(36.0) and m_p == pytest.approx(20.11, abs=0.01)
    with pytest.raises(NegativeMarginError):
        current_margin(215.0, 215.0)


def test_ic_temperature_curve_is_a_straight_line():
    curve = ic_temperature_curve(215.0, 20.0, 92.0)
    assert tuple(curve[0]) == (20.0, 215.0) and tuple(curve[-1]) == (92.0, 0.0)
    (t1, i1), (t2, i2), (t3, i3) = curve[[3, 30, 60]]
    assert abs((t2 - t1) * (i3 - i1) - (t3 - t1) * (i2 - i1)) < 1e-12 * 215 * 72
    at32 = np.interp(32.0, curve[:, 0], curve[:, 1])
    assert at32 == pytest.approx(215.0 * 60 / 72, rel=1e-12)


def test_current_sharing_temperature():
    assert current_sharing_temperature(179.0, 215.0, 20.0, 92.0) == pytest.approx(32.06, abs=0.01)
    assert current_sharing_temperature(215.0, 215.0, 20.0, 92.0) == pytest.approx(20.0)
    assert current_sharing_temperature(1e-9, 215.0, 20.0, 92.0) == pytest.approx(92.0)
    with pytest.raises(ValueError):
        current_sharing_temperature(0.0, 215.0, 20.0, 92.0)


def test_temperature_factor_vectorises():
    assert np.allclose(temperature_factor(np.array([20.0, 56.0, 92.0]), 20.0, 92.0), [1.0, 0.5, 0.0])


def test_load_line_csv(tmp_path, small_assembly):
    unit = unit_turn_field(small_assembly)
    path = tmp_path / "ll.csv"
    load_line_to_csv(load_line_curve(unit, LIFT, [0.0, 100.0]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "I_A,min_Ic_A" and len(lines) == 3


def test_reference_ic_override_changes_the_answer(small_assembly):
    pack = with_reference_ic(small_assembly.placements[0].pack, {4.0: 300.0, 6.0: 450.0})
    asm = place_magnets(pack, 2, 150.0)
    assert magnet_critical_current(asm, LiftModel.field_independent()).critical_current_A == pytest.approx(300.0, abs=1e-3)


def test_negative_margin_is_flagged_not_raised(small_assembly):
    res = magnet_critical_current(small_assembly, LIFT, 20.0, operating_current_A=5000.0)
    assert isinstance(res, LoadLineResult) and res.negative_margin

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from hts_wec.cryogenics import (
    CryoReport,
    PropertyRangeError,
    PropertyTable,
    armature_current_density_check,
    coolant_mass,
    cryo_report,
    load_table,
    magnet_mass_kg,
    stability_margin,
    winding_volume_m3,
)
from hts_wec.geometry import TapeSpec, stack_pack
from hts_wec.superconductor import current_sharing_temperature

SYNTHETIC_H = PropertyTable((4.0, 20.0, 300.0), (0.0, 1000.0, 80000.0), "h", "J_per_kg")
CONSTANT_C = PropertyTable((4.0, 100.0), (1000.0, 1000.0), "C", "J_per_m3K")


def test_coolant_mass_hand_arithmetic():
    assert coolant_mass(10.0, SYNTHETIC_H, 446e3) == pytest.approx(10.0 * 79e3 / 446e3, rel=1e-12)
    assert coolant_mass(10.0, SYNTHETIC_H, 446e3) == pytest.approx(1.771, abs=5e-4)
    assert coolant_mass(0.0, SYNTHETIC_H) == 0.0


@settings(max_examples=30, deadline=None)
@given(m=st.floats(0.1, 1000.0), k=st.floats(0.01, 100.0))
def test_coolant_mass_is_homogeneous_in_magnet_mass(m, k):
    h = load_table("copper_enthalpy")
    assert coolant_mass(k * m, h) == pytest.approx(k * coolant_mass(m, h), rel=1e-12)


def test_coolant_mass_needs_table_coverage():
    short = PropertyTable((20.0, 200.0), (1.0, 2.0))
    with pytest.raises(PropertyRangeError):
        coolant_mass(1.0, short)


def test_stability_margin_constant_capacity():
    assert stability_margin(CONSTANT_C, 20.0, 32.0) == pytest.approx(12000.0, rel=1e-12)
    assert stability_margin(CONSTANT_C, 20.0, 20.0) == 0.0


@pytest.mark.parametrize("name", ["copper_enthalpy", "winding_heat_capacity"])
def test_quadrature_matches_dense_trapezoid_on_embedded_tables(name):
    table = load_table(name)
    lo, hi = 20.0, 32.06
    T = np.linspace(lo, hi, 10_001)
    oracle = trapezoid(table(T), T)
    assert stability_margin(table, lo, hi) == pytest.approx(oracle, rel=1e-6)


def test_embedded_tables_are_monotone_and_documented():
    for name in ("copper_enthalpy", "winding_heat_capacity"):
        t = load_table(name)
        assert np.all(np.diff(t.T_K) > 0)
        assert t.T_min <= 4.0 + 1e-9 and t.T_max >= 300.0
    h = load_table("copper_enthalpy")
    assert np.all(np.diff(h.values) > 0)
    # copper enthalpy rise 20 K -> 300 K is about 80 kJ/kg
    assert h(300.0) - h(20.0) == pytest.approx(80e3, rel=0.05)


def test_table_queries_outside_range_are_errors():
    with pytest.raises(PropertyRangeError):
        CONSTANT_C(200.0)


def test_table_rejects_unsorted_temperatures():
    with pytest.raises(ValueError):
        PropertyTable((10.0, 5.0), (1.0, 2.0))


def test_winding_volume_of_one_double_pancake():
    pack = stack_pack([(TapeSpec(4.0, 0.1, 1.0), 10)], 50.0)
    expected = 2 * np.pi * (51.0**2 - 50.0**2) * 4.0 * 1e-9
    assert winding_volume_m3(pack) == pytest.approx(expected, rel=1e-12)
    assert magnet_mass_kg(pack, 1000.0) == pytest.approx(expected * 1000.0, rel=1e-12)


def test_report_enforces_temperature_ordering(reference):
    with pytest.raises(ValueError):
        cryo_report(reference.assembly, 95.0)


def test_reference_cryogenic_report(reference, reference_loadline):
    T_cs = current_sharing_temperature(179.0, reference_loadline.critical_current_A, 20.0, 92.0)
    rep = cryo_report(reference.assembly, T_cs)
    assert isinstance(rep, CryoReport)
    assert rep.T_op_K < rep.T_cs_K < rep.T_C_K
    assert rep.coolant_mass_kg > 0 and rep.stability_margin_J_per_m3 > 0
    # Eq.-(1)-style consistency: coolant follows from the magnet mass and the copper table
    h = load_table("copper_enthalpy")
    assert rep.coolant_mass_kg == pytest.approx(rep.magnet_mass_kg * (h(300.0) - h(20.0)) / 446e3, rel=1e-12)


def test_current_density_check_boundaries():
    zero = armature_current_density_check(np.zeros((3, 100)), 13.5)
    assert zero.exceedance_fraction == (0.0, 0.0, 0.0) and zero.passed
    exact = armature_current_density_check(np.full((3, 100), 6.0 * 13.5), 13.5)
    assert exact.exceedance_fraction == (0.0, 0.0, 0.0)
    over = armature_current_density_check(np.full((3, 100), 6.0 * 13.5 + 1e-9), 13.5)
    assert over.exceedance_fraction == (1.0, 1.0, 1.0) and not over.passed


def test_current_density_exceedance_fraction_per_phase():
    i = np.zeros((3, 10))
    i[1, :3] = 100.0
    rep = armature_current_density_check(i, 10.0, 6.0, duty_threshold=0.5)
    assert rep.exceedance_fraction == (0.0, 0.3, 0.0)
    assert rep.peak_current_A == 100.0 and rep.passed

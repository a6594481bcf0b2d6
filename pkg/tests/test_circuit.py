import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from hts_wec.circuit import (
    AnalysisWindowError,
    CircuitSpec,
    ThdUndefinedError,
    analysis_window,
    emf_waveforms,
    metrics,
    run_case,
    simulate,
    spectrum_fundamental,
)
from hts_wec.excitation import WaveSpec

VM, F = 400.0, 2.0


def balanced(vm=VM, f=F):
    def src(t):
        w = 2 * math.pi * f * t
        return vm * np.array([np.sin(w), np.sin(w - 2 * math.pi / 3), np.sin(w + 2 * math.pi / 3)])

    return src


def diode_currents(ts):
    """Upper and lower diode currents per phase implied by the conduction states."""
    up = np.where(ts.states == 1, ts.i_phase, 0.0)
    lo = np.where(ts.states == -1, -ts.i_phase, 0.0)
    off = np.where(ts.states == 0, np.abs(ts.i_phase), 0.0)
    return up, lo, off


def assert_network_laws(ts, tol=1e-9):
    up, lo, off = diode_currents(ts)
    assert up.min() >= -tol and lo.min() >= -tol
    assert off.max() <= tol
    scale = max(1.0, np.abs(ts.i_dc).max())
    # Kirchhoff at both DC nodes and at the floating star point
    assert np.abs(up.sum(axis=0) - ts.i_dc).max() <= 1e-9 * scale
    assert np.abs(lo.sum(axis=0) - ts.i_dc).max() <= 1e-9 * scale
    assert np.abs(ts.i_phase.sum(axis=0)).max() <= 1e-9 * scale
    assert ts.v_out.min() >= -tol


def test_zero_emf_gives_zero_response():
    ts = simulate(lambda t: np.zeros((3, len(t))), CircuitSpec(), (0.0, 1.0), 1e-3, R_phase_ohm=1.0)
    for x in (ts.i_phase, ts.i_dc, ts.v_out):
        assert np.all(x == 0.0)


def test_six_pulse_mean_voltage_without_source_inductance():
    # 100 H smoothing with a 1 kOhm load: tiny ripple and a 0.1 s settling time
    spec = CircuitSpec(L_source_H=0.0, R_load_ohm=1000.0, L_smooth_H=100.0)
    ts = simulate(balanced(), spec, (0.0, 3.0), 1e-4)
    sel = ts.window(2.0, 3.0)
    mean = trapezoid(ts.v_out[sel], ts.t[sel]) / 1.0
    assert mean == pytest.approx(3 * math.sqrt(3) / math.pi * VM, rel=0.01)
    assert_network_laws(ts)


def test_commutation_overlap_and_energy_balance():
    spec = CircuitSpec(L_source_H=0.15, R_load_ohm=4.2, L_smooth_H=2.7)
    ts = simulate(balanced(300.0, 0.5), spec, (0.0, 12.0), 1e-3, R_phase_ohm=1.0)
    assert_network_laws(ts)
    conducting = np.count_nonzero(ts.states, axis=0)
    assert conducting.max() == 3  # overlap: three diodes conduct during commutation
    assert ts.energy_balance(4.0, 12.0)["relative_residual"] < 5e-3


def test_forward_drop_is_charged_as_diode_loss():
    spec = CircuitSpec(L_source_H=0.05, R_load_ohm=4.2, L_smooth_H=0.5, forward_drop_V=1.0)
    ts = simulate(balanced(300.0, 0.5), spec, (0.0, 8.0), 1e-3, R_phase_ohm=0.5)
    bal = ts.energy_balance(2.0, 8.0)
    assert bal["diode_J"] > 0 and bal["relative_residual"] < 5e-3
    assert ts.v_out.min() >= -1.0


def test_output_ripple_is_six_times_the_input_frequency():
    spec = CircuitSpec(L_source_H=0.0, R_load_ohm=10.0, L_smooth_H=0.01)
    ts = simulate(balanced(), spec, (0.0, 3.0), 1e-4)
    m = metrics(ts, 1.0, 3.0)
    assert m.f_in_Hz == pytest.approx(F)
    assert m.f_out_Hz == pytest.approx(6 * F)


def test_power_is_mean_output_voltage_squared_over_load():
    spec = CircuitSpec(L_source_H=0.05, R_load_ohm=4.2, L_smooth_H=0.5)
    ts = simulate(balanced(300.0, 0.5), spec, (0.0, 8.0), 1e-3, R_phase_ohm=0.5)
    m = metrics(ts, 2.0, 8.0)
    assert m.P_out_kW * 1e3 == pytest.approx(m.Vrms_out_V**2 / 4.2, rel=1e-12)
    assert 0 <= m.efficiency_pct <= 100
    assert m.P_source_kW == pytest.approx(m.P_out_kW + m.joule_loss_kW + m.diode_loss_kW, rel=5e-3)


def test_exponential_diode_model_agrees_with_ideal_switch():
    src = balanced(300.0, 0.5)
    common = dict(L_source_H=0.15, R_load_ohm=4.2, L_smooth_H=0.5)
    ideal = simulate(src, CircuitSpec(**common), (0.0, 4.0), 1e-3, R_phase_ohm=1.0)
    smooth = simulate(src, CircuitSpec(diode_model="exponential", **common), (0.0, 4.0), 1e-3, R_phase_ohm=1.0)
    p_ideal = metrics(ideal, 2.0, 4.0).P_out_kW
    p_smooth = metrics(smooth, 2.0, 4.0).P_out_kW
    assert p_smooth == pytest.approx(p_ideal, rel=0.01)


def test_time_step_halving_changes_power_little():
    spec = CircuitSpec(L_source_H=0.15, R_load_ohm=4.2, L_smooth_H=2.7)
    src = balanced(300.0, 0.5)
    p1 = metrics(simulate(src, spec, (0.0, 10.0), 1e-3, R_phase_ohm=1.0), 2.0, 10.0).P_out_kW
    p2 = metrics(simulate(src, spec, (0.0, 10.0), 5e-4, R_phase_ohm=1.0), 2.0, 10.0).P_out_kW
    assert p2 == pytest.approx(p1, rel=5e-3)


def test_thd_of_a_pure_sinusoid_is_zero():
    dt = 1e-3
    t = np.arange(6000) * dt
    f, thd = spectrum_fundamental(np.sin(2 * math.pi * 0.5 * t), dt)
    assert f == pytest.approx(0.5) and thd < 1e-3


def test_thd_follows_the_energy_ratio_definition():
    dt = 1e-3
    t = np.arange(4000) * dt
    x = np.sin(2 * math.pi * t) + 0.3 * np.sin(2 * math.pi * 3 * t)
    _, thd = spectrum_fundamental(x, dt)
    assert thd == pytest.approx(0.09, rel=1e-9)


def test_thd_of_a_constant_is_undefined():
    with pytest.raises(ThdUndefinedError):
        spectrum_fundamental(np.full(1000, 3.0), 1e-3)


def test_short_window_is_rejected():
    ts = simulate(balanced(), CircuitSpec(), (0.0, 1.0), 1e-3, R_phase_ohm=1.0)
    with pytest.raises(AnalysisWindowError):
        metrics(ts, 0.5, 2.0)
    with pytest.raises(AnalysisWindowError):
        metrics(ts, 0.5, 0.505)
    with pytest.raises(AnalysisWindowError):
        analysis_window(WaveSpec(), cycles=0)


def test_transient_csv_columns(tmp_path):
    ts = simulate(balanced(), CircuitSpec(), (0.0, 0.01), 1e-3, R_phase_ohm=1.0)
    path = tmp_path / "ts.csv"
    ts.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_s,e1_V,e2_V,e3_V,i1_A,i2_A,i3_A,vout_V,idc_A"
    assert len(lines) == 12


def test_still_actuator_induces_no_emf(reference):
    # at the crest of a sinusoid the actuator is momentarily at rest
    wave = WaveSpec(amplitude_m=1.0, frequency_Hz=0.25, phase_rad=math.pi / 2)
    e = emf_waveforms(reference, np.array([0.0]), wave=wave)
    assert np.all(np.abs(e) < 1e-9)


def test_reversing_velocity_flips_the_emf(reference):
    t = np.linspace(0.1, 2.0, 40)
    fwd = WaveSpec(amplitude_m=1.0, frequency_Hz=0.2, phase_rad=0.0)
    # the EMF is linear in magnet current and velocity; reversing the current flips it the same way
    e1 = emf_waveforms(reference, t, wave=fwd)
    e2 = emf_waveforms(reference, t, wave=fwd, current_A=-reference.operating_current_A)
    assert np.allclose(e2, -e1, rtol=1e-12, atol=1e-9)


def test_run_case_refuses_currents_above_critical(reference):
    with pytest.raises(ValueError):
        run_case(reference, 1.25, 250.0, critical_current_A=205.0)


def test_reference_run_satisfies_network_laws(reference_run):
    ts, m = reference_run
    assert_network_laws(ts)
    assert m.energy_residual < 5e-3
    assert 0 <= m.efficiency_pct <= 100 and m.THD_in >= 0 and m.THD_out >= 0

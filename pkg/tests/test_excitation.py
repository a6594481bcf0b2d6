import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hts_wec.excitation import WaveSpec, actuator_state, waveform_to_csv


def test_reference_wave_defaults():
    w = WaveSpec()
    assert (w.form, w.amplitude_m, w.frequency_Hz) == ("sinusoidal", 1.25, 0.167)
    assert w.period_s == pytest.approx(1 / 0.167)


@pytest.mark.parametrize("kw", [{"amplitude_m": 0.0}, {"frequency_Hz": -1.0}, {"form": "square"}])
def test_invalid_waves_rejected(kw):
    with pytest.raises(ValueError):
        WaveSpec(**kw)


def test_sinusoid_position_and_velocity():
    w = WaveSpec(amplitude_m=1.5, frequency_Hz=0.2)
    t = np.linspace(0, 10, 101)
    z, v = actuator_state(w, t)
    assert np.allclose(z, 1.5 * np.sin(2 * math.pi * 0.2 * t), rtol=0, atol=1e-15)
    assert np.allclose(v, 2 * math.pi * 0.2 * 1.5 * np.cos(2 * math.pi * 0.2 * t), rtol=0, atol=1e-14)


@pytest.mark.parametrize("form", ["sinusoidal", "triangular"])
def test_velocity_is_the_derivative_of_position(form):
    w = WaveSpec(form, 1.25, 0.167, 0.3)
    t = np.array([0.7, 2.2, 4.9])
    h = 1e-6
    z_p, _ = actuator_state(w, t + h)
    z_m, _ = actuator_state(w, t - h)
    _, v = actuator_state(w, t)
    assert np.allclose(v, (z_p - z_m) / (2 * h), rtol=1e-6)


def test_triangle_shares_extrema_and_zero_crossings():
    sin = WaveSpec("sinusoidal", 1.25, 0.167)
    tri = WaveSpec("triangular", 1.25, 0.167)
    T = sin.period_s
    t = np.array([0.0, T / 4, T / 2, 3 * T / 4])
    zs, _ = actuator_state(sin, t)
    zt, vt = actuator_state(tri, t)
    assert np.allclose(zs, zt, atol=1e-12)
    assert np.allclose(np.abs(vt), 4 * 1.25 * 0.167)


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0, 100), A=st.floats(0.1, 3), f=st.floats(0.05, 1))
def test_motion_stays_within_amplitude(t, A, f):
    for form in ("sinusoidal", "triangular"):
        z, _ = actuator_state(WaveSpec(form, A, f), t)
        assert abs(float(z)) <= A * (1 + 1e-12)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        actuator_state(WaveSpec(), -1.0)


def test_waveform_csv(tmp_path):
    p = tmp_path / "w.csv"
    waveform_to_csv(WaveSpec(), np.linspace(0, 1, 5), p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t_s,z_m,v_mps" and len(lines) == 6

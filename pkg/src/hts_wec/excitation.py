"""Prescribed buoy/actuator kinematics (rigid coupling, no hydrodynamics)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class WaveSpec:
    form: str = "sinusoidal"
    amplitude_m: float = 1.25
    frequency_Hz: float = 0.167
    phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.form not in ("sinusoidal", "triangular"):
            raise ValueError(f"unknown wave form {self.form!r}")
        if self.amplitude_m <= 0 or self.frequency_Hz <= 0:
            raise ValueError("wave amplitude and frequency must be positive")

    @property
    def period_s(self) -> float:
        return 1.0 / self.frequency_Hz


def actuator_state(wave: WaveSpec, t):
    """Actuator position (m) and velocity (m/s) at time(s) ``t``.

    The triangular form has the same zero crossings and extrema as the
    sinusoid with the same phase; at a vertex the velocity is the left limit.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    A, f = wave.amplitude_m, wave.frequency_Hz
    theta = 2 * math.pi * f * t + wave.phase_rad
    if wave.form == "sinusoidal":
        return A * np.sin(theta), 2 * math.pi * f * A * np.cos(theta)
    # phase in cycles, shifted so u = 0 is a rising zero crossing
    u = np.mod(theta / (2 * math.pi), 1.0)
    z = np.where(u < 0.25, 4 * A * u, np.where(u < 0.75, 2 * A - 4 * A * u, 4 * A * u - 4 * A))
    # left limit at vertices: u == 0.25 still rising, u == 0.75 still falling
    rising = (u <= 0.25) | (u > 0.75)
    v = np.where(rising | (u == 0.0), 4 * A * f, -4 * A * f)
    return z, v


def waveform_to_csv(wave: WaveSpec, t, path: str | Path) -> None:
    z, v = actuator_state(wave, t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "z_m", "v_mps"])
        for row in zip(np.asarray(t, float), z, v):
            w.writerow([f"{x:.9g}" for x in row])

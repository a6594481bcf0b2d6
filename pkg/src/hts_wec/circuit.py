"""Three-phase EMF -> six-pulse diode bridge -> R + smoothing-L load.

Each phase is an EMF in series with the armature resistance and the source
inductance; the three phases share a floating star point.  The DC side is
the smoothing inductor in series with the load resistor, and ``v_out`` is
the voltage across the load resistor.

Two diode models are provided.  ``ideal`` is a switch with a forward drop,
integrated mode by mode with the implicit trapezoidal rule and with
switching instants located by bisection.  ``exponential`` is a Shockley
diode integrated as a stiff DAE; it exists to cross-check the ideal
model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from dataclasses import replace as _replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .excitation import WaveSpec, actuator_state
from .geometry import MM, WindingPack, periodic_extension
from .magnetostatics import LinkageKernel, coil_linkage_from_kernel


class CircuitError(RuntimeError):
    """Solver failure (mode machine did not settle, stiff solver failed)."""


class AnalysisWindowError(ValueError):
    """Requested analysis window is not covered by the transient."""


class ThdUndefinedError(ValueError):
    """Signal has no AC content, so no fundamental exists."""


@dataclass(frozen=True)
class CircuitSpec:
    L_source_H: float = 0.15
    R_load_ohm: float = 4.2
    L_smooth_H: float = 2.7
    diode_model: str = "ideal"
    forward_drop_V: float = 0.0
    # None -> derived from the armature copper geometry
    R_phase_ohm: float | None = None
    saturation_current_A: float = 1e-3
    emission_voltage_V: float = 0.026
    leakage_conductance_S: float = 1e-6

    def __post_init__(self) -> None:
        if self.L_source_H < 0 or self.L_smooth_H < 0:
            raise ValueError("inductances must be non-negative")
        if self.R_load_ohm <= 0:
            raise ValueError("load resistance must be positive")
        if self.diode_model not in ("ideal", "exponential"):
            raise ValueError(f"unknown diode model {self.diode_model!r}")
        if self.R_phase_ohm is not None and self.R_phase_ohm < 0:
            raise ValueError("phase resistance must be non-negative")


@dataclass
class TransientResult:
    t: np.ndarray
    emf: np.ndarray  # (3, n) V
    i_phase: np.ndarray  # (3, n) A, into the bridge
    i_dc: np.ndarray  # A
    v_out: np.ndarray  # V across the load resistor
    states: np.ndarray  # (3, n): +1 upper diode, -1 lower diode, 0 blocked
    R_phase_ohm: float
    R_load_ohm: float
    L_source_H: float
    L_smooth_H: float
    forward_drop_V: float = 0.0
    switch_events: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def window(self, t0: float, t1: float) -> np.ndarray:
        half = 0.5 * self.dt
        if t0 < self.t[0] - half or t1 > self.t[-1] + half or t1 <= t0:
            raise AnalysisWindowError(
                f"window [{t0:.3f}, {t1:.3f}] s not inside simulated span "
                f"[{self.t[0]:.3f}, {self.t[-1]:.3f}] s"
            )
        # nearest samples to the window ends, end-inclusive
        k0 = int(np.argmin(np.abs(self.t - t0)))
        k1 = int(np.argmin(np.abs(self.t - t1)))
        sel = np.zeros(len(self.t), bool)
        sel[k0 : k1 + 1] = True
        return sel

    def energy_balance(self, t0: float | None = None, t1: float | None = None) -> dict:
        """Energy bookkeeping over [t0, t1] (trapezoid on the output grid)."""
        t0 = self.t[0] if t0 is None else t0
        t1 = self.t[-1] if t1 is None else t1
        sel = self.window(t0, t1)
        t = self.t[sel]
        e, i, idc = self.emf[:, sel], self.i_phase[:, sel], self.i_dc[sel]
        source = trapezoid((e * i).sum(axis=0), t)
        load = trapezoid(self.R_load_ohm * idc**2, t)
        joule = trapezoid(self.R_phase_ohm * (i**2).sum(axis=0), t)
        diode = trapezoid(self.forward_drop_V * 2 * idc, t)

        def stored(k):
            return 0.5 * self.L_source_H * (i[:, k] ** 2).sum() + 0.5 * self.L_smooth_H * idc[k] ** 2

        d_stored = stored(-1) - stored(0)
        residual = source - load - joule - diode - d_stored
        return {
            "source_J": float(source),
            "load_J": float(load),
            "joule_J": float(joule),
            "diode_J": float(diode),
            "stored_delta_J": float(d_stored),
            "residual_J": float(residual),
            "relative_residual": float(abs(residual) / max(abs(source), 1e-300)),
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "e1_V", "e2_V", "e3_V", "i1_A", "i2_A", "i3_A", "vout_V", "idc_A"])
            for k in range(len(self.t)):
                row = [self.t[k], *self.emf[:, k], *self.i_phase[:, k], self.v_out[k], self.i_dc[k]]
                w.writerow([f"{x:.9g}" for x in row])


# ------------------------------------------------------------ ideal model


class _IdealBridge:
    """Linear network per conduction mode; state x = (i1, i2, i3, i_dc)."""

    def __init__(self, R: float, L: float, RL: float, Ld: float, Vf: float):
        self.R, self.L, self.RL, self.Ld, self.Vf = R, L, RL, Ld, Vf
        self._cache: dict[tuple, tuple] = {}

    def _system(self, mode: tuple):
        """Affine maps for a mode.

        Returns (A, Be, c, Pot) with dx/dt = A x + Be e + c and
        potentials (V+, V-, v_n) = Pot @ [x, e, 1].
        """
        if mode in self._cache:
            return self._cache[mode]
        R, L, RL, Ld, Vf = self.R, self.L, self.RL, self.Ld, self.Vf
        # unknowns: di1 di2 di3 didc V+ V- vn
        M = np.zeros((7, 7))
        # rhs = G @ [x(4), e(3), 1]
        G = np.zeros((7, 8))
        row = 0
        for k, s in enumerate(mode):
            if s == 0:
                M[row, k] = 1.0
            else:
                # vn + e_k - R i_k - L di_k = V(+/-) +/- Vf
                M[row, k] = L
                M[row, 4 if s > 0 else 5] = 1.0
                M[row, 6] = -1.0
                G[row, 4 + k] = 1.0
                G[row, k] = -R
                G[row, 7] = -Vf if s > 0 else Vf
            row += 1
        M[row, 0:3] = 1.0  # star point KCL
        row += 1
        for k, s in enumerate(mode):  # + bus KCL
            if s > 0:
                M[row, k] = 1.0
        M[row, 3] = -1.0
        row += 1
        # V+ - V- - Ld didc = RL idc
        M[row, 4], M[row, 5], M[row, 3] = 1.0, -1.0, -Ld
        G[row, 3] = RL
        row += 1
        M[row, 5] = 1.0  # V- = 0
        sol = np.linalg.solve(M, G)
        A = sol[:4, :4]
        Be = sol[:4, 4:7]
        c = sol[:4, 7]
        Pot = sol[4:7, :]
        self._cache[mode] = (A, Be, c, Pot)
        return self._cache[mode]

    def potentials(self, mode, x, e):
        if not any(s > 0 for s in mode):
            return None
        _, _, _, Pot = self._system(mode)
        return Pot @ np.concatenate([x, e, [1.0]])

    def step(self, mode, x0, e0, e1, h):
        """Implicit trapezoidal step with e varying linearly over the step."""
        if not any(s != 0 for s in mode):
            return np.zeros(4)
        A, Be, c, _ = self._system(mode)
        I = np.eye(4)
        rhs = (I + 0.5 * h * A) @ x0 + 0.5 * h * (Be @ (e0 + e1) + 2 * c)
        return np.linalg.solve(I - 0.5 * h * A, rhs)


def _forward_bias(bridge: _IdealBridge, mode, x, e):
    """Forward voltage of each blocked diode under ``mode`` (positive = wants to conduct).

    Returns list of (voltage, phase, side).
    """
    out = []
    pots = bridge.potentials(mode, x, e)
    if pots is None:
        # nothing conducting: a pair turns on when the line voltage beats 2 Vf
        kmax, kmin = int(np.argmax(e)), int(np.argmin(e))
        out.append((e[kmax] - e[kmin] - 2 * bridge.Vf, (kmax, kmin), 0))
        return out
    Vp, Vm, vn = pots
    for k, s in enumerate(mode):
        if s != 0:
            continue
        u = vn + e[k]
        out.append((u - Vp - bridge.Vf, k, +1))
        out.append((Vm - bridge.Vf - u, k, -1))
    return out


def _resolve_mode(bridge: _IdealBridge, x, e, prev_mode, tol: float, max_iter: int = 12):
    """Consistent conduction mode for state x at EMF e."""
    if bridge.L == 0.0:
        if x[3] > tol or (e.max() - e.min() - 2 * bridge.Vf) > 0:
            kmax, kmin = int(np.argmax(e)), int(np.argmin(e))
            mode = [0, 0, 0]
            mode[kmax], mode[kmin] = 1, -1
            return tuple(mode)
        return (0, 0, 0)
    mode = [1 if x[k] > tol else (-1 if x[k] < -tol else 0) for k in range(3)]
    for _ in range(max_iter):
        m = tuple(mode)
        cand = _forward_bias(bridge, m, x, e)
        best = max(cand, key=lambda c: c[0]) if cand else None
        if best is None or best[0] <= 0:
            return m
        if best[2] == 0:
            kmax, kmin = best[1]
            mode[kmax], mode[kmin] = 1, -1
        else:
            mode[best[1]] = best[2]
        # a newly conducting diode must not force another to reverse
    raise CircuitError(f"diode mode did not settle (last mode {tuple(mode)}, previous {prev_mode})")


def _event_values(bridge, mode, x, e):
    """Signed quantities whose sign change marks a switching event."""
    vals = []
    for k, s in enumerate(mode):
        if s != 0:
            vals.append(s * x[k])  # conducting current must stay > 0
    if bridge.L == 0.0:
        if any(mode):
            kmax, kmin = int(np.argmax(e)), int(np.argmin(e))
            p = mode.index(1)
            n = mode.index(-1)
            vals.append(e[p] - e[kmax] + 1e-300 if kmax != p else 1.0)
            vals.append(e[kmin] - e[n] + 1e-300 if kmin != n else 1.0)
        return np.array(vals)
    for v, _, _ in _forward_bias(bridge, mode, x, e):
        vals.append(-v)  # blocked diode: must stay reverse biased
    return np.array(vals)


def _project_kirchhoff(x, mode):
    """Nearest state satisfying the current laws of ``mode``.

    Blocked phases carry no current, the conducting phase currents sum to
    zero at the star point and the upper-diode currents sum to i_dc.
    Zeroing a current that overshot at a switching instant would otherwise
    leave a small imbalance that the mode dynamics carry forward.
    """
    x = x.copy()
    for k, s in enumerate(mode):
        if s == 0:
            x[k] = 0.0
    if not any(mode):
        x[3] = 0.0
        return x
    C = np.array(
        [
            [1.0 if s != 0 else 0.0 for s in mode] + [0.0],
            [1.0 if s > 0 else 0.0 for s in mode] + [-1.0],
        ]
    )
    free = np.array([s != 0 for s in mode] + [True])
    Cf = C[:, free]
    x[free] -= np.linalg.lstsq(Cf, C @ x, rcond=None)[0]
    return x


def _simulate_ideal(e_grid, t, R, spec: CircuitSpec, event_tol: float):
    bridge = _IdealBridge(R, spec.L_source_H, spec.R_load_ohm, spec.L_smooth_H, spec.forward_drop_V)
    n = len(t)
    X = np.zeros((4, n))
    S = np.zeros((3, n), dtype=int)
    x = np.zeros(4)
    cur_tol = 1e-12
    mode = _resolve_mode(bridge, x, e_grid[:, 0], None, cur_tol)
    S[:, 0] = mode
    events = 0
    for j in range(n - 1):
        ta, tb = t[j], t[j + 1]
        ea, eb = e_grid[:, j], e_grid[:, j + 1]
        tc, ec = ta, ea
        guard = 0
        while tc < tb - 1e-15:
            guard += 1
            if guard > 50:
                raise CircuitError(f"switching chatter at t = {tc:.6f} s, mode {mode}")
            h = tb - tc
            x1 = bridge.step(mode, x, ec, eb, h)
            f0 = _event_values(bridge, mode, x, ec)
            f1 = _event_values(bridge, mode, x1, eb)
            if len(f1) == 0 or np.all(f1 > 0) or np.all(f0 <= 0):
                x, tc, ec = x1, tb, eb
                break
            # locate earliest crossing by bisection on the step fraction
            lo, hi = 0.0, 1.0
            while (hi - lo) * h > event_tol:
                mid = 0.5 * (lo + hi)
                em = ec + (eb - ec) * mid
                xm = bridge.step(mode, x, ec, em, mid * h)
                if np.all(_event_values(bridge, mode, xm, em) > 0):
                    lo = mid
                else:
                    hi = mid
            frac = hi
            em = ec + (eb - ec) * frac
            x = bridge.step(mode, x, ec, em, frac * h)
            tc, ec = tc + frac * h, em
            # currents that reached zero are switched off exactly
            for k, s in enumerate(mode):
                if s != 0 and s * x[k] <= cur_tol * 1e6 + abs(x[3]) * 1e-9:
                    x[k] = 0.0
            if bridge.L == 0.0:
                x[:3] = 0.0
            new_mode = _resolve_mode(bridge, x, ec, mode, cur_tol)
            if bridge.L == 0.0 and any(new_mode):
                x[new_mode.index(1)] = x[3]
                x[new_mode.index(-1)] = -x[3]
            x = _project_kirchhoff(x, new_mode)
            events += 1
            mode = new_mode
        X[:, j + 1] = x
        S[:, j + 1] = mode
    return X, S, events


# ------------------------------------------------------ exponential model


def _simulate_exponential(e_grid, t, R, spec: CircuitSpec, substeps: int = 10, max_newton: int = 100):
    """Shockley-diode bridge, integrated as a DAE with fixed-step BDF2.

    Each diode is i = Is (exp(v / Ve) - 1) + G_off v; the leakage term keeps
    the network solvable for any set of inductor currents.  Unknowns per
    step are z = (i1, i2, i_dc, u1, u2, u3, V+): the currents, the phase
    terminal potentials and the positive bus (negative bus is ground).
    Newton iterations limit the change of each forward junction voltage
    the way circuit simulators do, so cold starts converge.
    """
    Is, Ve, Goff = spec.saturation_current_A, spec.emission_voltage_V, spec.leakage_conductance_S
    L, RL, Ld = spec.L_source_H, spec.R_load_ohm, spec.L_smooth_H
    if L <= 0 or Ld <= 0:
        raise CircuitError("exponential diode model needs non-zero inductances")
    xmax = 60.0
    vcrit = Ve * math.log(Ve / (math.sqrt(2.0) * Is))
    P = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])

    def diode(v):
        x = v / Ve
        ex = np.exp(np.minimum(x, xmax))
        return Is * (ex * (1 + np.maximum(x - xmax, 0.0)) - 1) + Goff * v, Is / Ve * ex + Goff

    def junctions(z):
        u, vp = z[3:6], z[6]
        return np.concatenate([u - vp, -u])

    def residual(z, e, hist, gain):
        i = P @ z[:2]
        u, vp, idc = z[3:6], z[6], z[2]
        ia, ga = diode(u - vp)
        ib, gb = diode(-u)
        f = (e[:2] - R * i[:2] - u[:2] + u.mean() - e.mean()) / L
        r = np.empty(7)
        r[:2] = z[:2] - hist[:2] - gain * f
        r[2] = idc - hist[2] - gain * (vp - RL * idc) / Ld
        r[3:6] = ia - ib - i
        r[6] = ia.sum() - idc
        J = np.zeros((7, 7))
        J[0, 0] = J[1, 1] = 1 + gain * R / L
        J[:2, 3:6] = -gain * (np.eye(3)[:2] * -1 + 1.0 / 3) / L
        J[2, 2] = 1 + gain * RL / Ld
        J[2, 6] = -gain / Ld
        J[3:6, 3:6] = np.diag(ga + gb)
        J[3:6, 6] = -ga
        J[3:6, 0:2] = -P
        J[6, 3:6] = ga
        J[6, 6] = -ga.sum()
        J[6, 2] = -1.0
        return r, J

    def limit(v_old, v_new):
        # damping factor keeping forward junction steps on the log scale
        alpha = 1.0
        for vo, vn_ in zip(v_old, v_new):
            if vn_ > vcrit and abs(vn_ - vo) > 2 * Ve:
                if vo > 0:
                    arg = 1 + (vn_ - vo) / Ve
                    vl = vo + Ve * math.log(arg) if arg > 0 else vcrit
                else:
                    vl = Ve * math.log(vn_ / Ve)
                alpha = min(alpha, (vl - vo) / (vn_ - vo))
        return max(alpha, 1e-6)

    h = (t[1] - t[0]) / substeps
    n = len(t)
    X = np.zeros((4, n))
    z = np.zeros(7)
    x_prev = None
    for j in range(n - 1):
        for s_ in range(substeps):
            tt = t[j] + (s_ + 1) * h
            e = np.array([np.interp(tt, t, e_grid[k]) for k in range(3)])
            x_n = z[:3].copy()
            if x_prev is None:
                # backward Euler start, BDF2 afterwards
                hist, gain = x_n, h
            else:
                hist, gain = (4 * x_n - x_prev) / 3, 2 * h / 3
            w = z.copy()
            for _ in range(max_newton):
                r, J = residual(w, e, hist, gain)
                dz = np.linalg.solve(J, -r)
                alpha = limit(junctions(w), junctions(w + dz))
                w = w + alpha * dz
                if alpha == 1.0 and np.all(np.abs(dz) <= 1e-9 * (1 + np.abs(w))):
                    break
            else:
                raise CircuitError(f"diode network did not converge at t = {tt:.6f} s")
            x_prev, z = x_n, w
        X[:, j + 1] = [z[0], z[1], -z[0] - z[1], z[2]]
    S = np.where(X[:3] > 1e-6, 1, np.where(X[:3] < -1e-6, -1, 0))
    return X, S, 0


# ---------------------------------------------------------------- driver

EmfSource = Callable[[np.ndarray], np.ndarray]


def simulate(
    emf: EmfSource,
    circuit: CircuitSpec,
    t_span: tuple[float, float],
    dt: float = 1e-3,
    R_phase_ohm: float | None = None,
    event_tol: float = 1e-6,
) -> TransientResult:
    """Integrate the rectifier network on a uniform output grid.

    ``emf`` maps a time array to a (3, n) array of phase EMFs; between grid
    points the EMF is taken as linear.  ``R_phase_ohm`` overrides
    ``circuit.R_phase_ohm`` (the machine pipeline passes the copper value).
    """
    if dt <= 0 or t_span[1] <= t_span[0]:
        raise ValueError("need dt > 0 and a non-empty time span")
    n = int(round((t_span[1] - t_span[0]) / dt)) + 1
    t = t_span[0] + dt * np.arange(n)
    e_grid = np.asarray(emf(t), dtype=float)
    if e_grid.shape != (3, n):
        raise ValueError(f"emf source returned shape {e_grid.shape}, expected (3, {n})")
    R = R_phase_ohm if R_phase_ohm is not None else (circuit.R_phase_ohm or 0.0)
    if circuit.diode_model == "ideal":
        X, S, events = _simulate_ideal(e_grid, t, R, circuit, event_tol)
    else:
        X, S, events = _simulate_exponential(e_grid, t, R, circuit)
    return TransientResult(
        t=t,
        emf=e_grid,
        i_phase=X[:3],
        i_dc=X[3],
        v_out=circuit.R_load_ohm * X[3],
        states=S,
        R_phase_ohm=R,
        R_load_ohm=circuit.R_load_ohm,
        L_source_H=circuit.L_source_H,
        L_smooth_H=circuit.L_smooth_H,
        forward_drop_V=circuit.forward_drop_V if circuit.diode_model == "ideal" else 0.0,
        switch_events=events,
        meta={"diode_model": circuit.diode_model},
    )


# --------------------------------------------------------------- metrics


def _rms(x, t):
    return math.sqrt(trapezoid(x**2, t) / (t[-1] - t[0]))


def _mean(x, t):
    return trapezoid(x, t) / (t[-1] - t[0])


def spectrum_fundamental(x: np.ndarray, dt: float) -> tuple[float, float]:
    """(fundamental frequency, THD) of the AC part of ``x``.

    THD is the energy in all non-fundamental bins over the energy in the
    fundamental bin; the fundamental is the highest-energy bin.  The mean
    is removed first, so a constant signal has no fundamental.
    """
    x = np.asarray(x, float)
    ac = x - x.mean()
    X = np.fft.rfft(ac)
    energy = np.abs(X) ** 2
    energy[0] = 0.0
    total = energy.sum()
    if total <= 1e-24 * max(1.0, float(np.sum(x**2))) * len(x):
        raise ThdUndefinedError("signal has no AC content; fundamental would be the DC bin")
    k = int(np.argmax(energy))
    freqs = np.fft.rfftfreq(len(x), dt)
    return float(freqs[k]), float((total - energy[k]) / energy[k])


@dataclass(frozen=True)
class Metrics:
    Vrms_in_V: tuple[float, float, float]
    Vrms_out_V: float
    P_out_kW: float
    P_source_kW: float
    joule_loss_kW: float
    diode_loss_kW: float
    efficiency_pct: float
    power_factor: float
    THD_in: float
    THD_out: float
    f_in_Hz: float
    f_out_Hz: float
    Irms_phase_A: tuple[float, float, float]
    peak_phase_current_A: float
    energy_residual: float

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def metrics(ts: TransientResult, t0: float, t1: float) -> Metrics:
    """Performance figures over the analysis window [t0, t1].

    The window should span an integer number of wave periods so the
    spectral figures do not leak.
    """
    sel = ts.window(t0, t1)
    t = ts.t[sel]
    if len(t) < 16:
        raise AnalysisWindowError("analysis window too short")
    e, i, vout, idc = ts.emf[:, sel], ts.i_phase[:, sel], ts.v_out[sel], ts.i_dc[sel]
    vin = tuple(_rms(e[k], t) for k in range(3))
    irms = tuple(_rms(i[k], t) for k in range(3))
    vout_rms = _rms(vout, t)
    p_out = _mean(vout * idc, t)
    p_src = _mean((e * i).sum(axis=0), t)
    joule = sum(_mean(ts.R_phase_ohm * i[k] ** 2, t) for k in range(3))
    diode = _mean(ts.forward_drop_V * 2 * np.abs(idc), t)
    losses = joule + diode
    eff = 100.0 * p_out / (p_out + losses) if p_out + losses > 0 else 0.0
    va = sum(v * c for v, c in zip(vin, irms))
    pf = p_src / va if va > 0 else 0.0
    # spectra on the half-open window so it holds whole periods
    f_in, thd_in = spectrum_fundamental(e[0, :-1], ts.dt)
    f_out, thd_out = spectrum_fundamental(vout[:-1], ts.dt)
    bal = ts.energy_balance(t0, t1)
    return Metrics(
        Vrms_in_V=vin,
        Vrms_out_V=vout_rms,
        P_out_kW=p_out / 1e3,
        P_source_kW=p_src / 1e3,
        joule_loss_kW=joule / 1e3,
        diode_loss_kW=diode / 1e3,
        efficiency_pct=eff,
        power_factor=pf,
        THD_in=thd_in,
        THD_out=thd_out,
        f_in_Hz=f_in,
        f_out_Hz=f_out,
        Irms_phase_A=irms,
        peak_phase_current_A=float(np.abs(i).max()),
        energy_residual=bal["relative_residual"],
    )


# ------------------------------------------------------------ machine EMF


@lru_cache(maxsize=16)
def linkage_kernel(pack: WindingPack, r_in_m: float, r_out_m: float) -> LinkageKernel:
    """Per-pack linkage kernel for an armature annulus (cached)."""
    return LinkageKernel.build(pack, r_in_m, r_out_m, reach_m=_KERNEL_REACH_M)


_KERNEL_REACH_M = 3.2


def emf_waveforms(machine, t, current_A: float | None = None, wave: WaveSpec | None = None) -> np.ndarray:
    """Phase EMFs (3, n) for the actuator following ``wave``.

    e_k = -sum over the phase's coils of sign * dlambda/dz * v, with all
    coils of a phase in series.  With ``machine.pole_array == "periodic"``
    the magnet train is repeated end to end so the stator always faces
    alternating poles, whatever the stroke.
    """
    t = np.asarray(t, float)
    wave = machine.wave if wave is None else wave
    current = machine.operating_current_A if current_A is None else current_A
    asm, arm = machine.assembly, machine.armature
    coils = arm.coils(asm.pole_pitch_mm)
    r_in = coils[0].inner_radius_mm * MM
    r_out = coils[0].outer_radius_mm * MM
    z, v = actuator_state(wave, t)
    if getattr(machine, "pole_array", "finite") == "periodic":
        reach = float(np.max(np.abs(z))) / MM + abs(coils[0].z_center_mm) + arm.coil_height_mm
        asm = periodic_extension(asm, reach + _KERNEL_REACH_M / MM)
    e = np.zeros((arm.phases, len(t)))
    packs = {pl.pack for pl in asm.placements}
    for pack in sorted(packs, key=lambda p: repr(p)):
        kernel = linkage_kernel(pack, r_in, r_out)
        sub = _replace(asm, placements=tuple(pl for pl in asm.placements if pl.pack == pack))
        for c in coils:
            _, dlam = coil_linkage_from_kernel(kernel, sub, c, z, current, machine.iron_boost_factor)
            e[c.phase] -= c.sign * dlam * v
    return e


def analysis_window(wave: WaveSpec, cycles: int = 3, skip: int = 1) -> tuple[float, float]:
    """Start and end of the analysis window: ``cycles`` periods after ``skip``."""
    if cycles < 1:
        raise AnalysisWindowError("need at least one analysis cycle")
    return skip * wave.period_s, (skip + cycles) * wave.period_s


def run_machine(
    machine,
    amplitude_m: float | None = None,
    current_A: float | None = None,
    form: str | None = None,
    cycles: int = 3,
    dt: float = 1e-3,
    circuit: CircuitSpec | None = None,
) -> tuple[TransientResult, Metrics]:
    """End-to-end transient: field -> linkage -> EMF -> rectifier -> metrics."""
    wave = machine.wave
    if amplitude_m is not None or form is not None:
        wave = _replace(wave, amplitude_m=amplitude_m or wave.amplitude_m, form=form or wave.form)
    current = machine.operating_current_A if current_A is None else current_A
    circuit = machine.circuit if circuit is None else circuit
    r_phase = circuit.R_phase_ohm
    if r_phase is None:
        r_phase = machine.armature.phase_resistance_ohm()
    t0, t1 = analysis_window(wave, cycles)

    def source(t):
        return emf_waveforms(machine, t, current, wave)

    ts = simulate(source, circuit, (0.0, t1), dt, R_phase_ohm=r_phase)
    ts.meta.update({"amplitude_m": wave.amplitude_m, "current_A": current, "form": wave.form})
    return ts, metrics(ts, t0, t1)


def run_case(machine, amplitude_m: float, current_A: float, critical_current_A: float | None = None, **kw) -> Metrics:
    """Metrics for one (wave amplitude, magnet current) operating case.

    When ``critical_current_A`` is given the case must not exceed it.
    """
    if critical_current_A is not None and current_A > critical_current_A:
        raise ValueError(f"conduction current {current_A} A exceeds magnet critical current {critical_current_A:.1f} A")
    return run_machine(machine, amplitude_m=amplitude_m, current_A=current_A, **kw)[1]

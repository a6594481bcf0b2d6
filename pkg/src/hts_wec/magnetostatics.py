"""Axisymmetric magnetostatics of the magnet stack (air core).

Every turn is a circular filament evaluated with complete elliptic
integrals.  Turn-resolved maps inside the winding use the tape-width current
strip (a short cylindrical current sheet) for nearby turns, because a bare
filament has no meaningful field on itself or a fraction of a millimetre
away.  An iron yoke is represented only by the scalar ``iron_boost_factor``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import ellipe, ellipkm1

from .geometry import MM, ArmatureCoil, MagnetAssembly, TurnLoops, WindingPack, turn_loops_of

MU0 = 4e-7 * math.pi
SINGULAR_EPS_M = 1e-6
_CHUNK = 2_000_000


class SingularPointError(ValueError):
    """Evaluation point lies on (within epsilon of) a current filament."""


@dataclass(frozen=True)
class FieldVector:
    B_r: float
    B_z: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.B_r, self.B_z)


# ------------------------------------------------------------- primitives


def _series_flux_factor(m: np.ndarray) -> np.ndarray:
    # (2 - m) K(m) - 2 E(m) = pi m^2 / 16 * (1 + 3m/4 + 75m^2/128 + 245m^3/512 + ...)
    return math.pi * m**2 / 16 * (1 + 0.75 * m + 75 / 128 * m**2 + 245 / 512 * m**3 + 19845 / 65536 * m**4)


def loop_field_arrays(a, current, r, z, eps: float = SINGULAR_EPS_M):
    """(B_r, B_z) of a circular filament of radius ``a`` in the plane z = 0.

    All arguments broadcast.  Raises SingularPointError when a point is
    within ``eps`` of the filament.
    """
    a, current, r, z = np.broadcast_arrays(
        np.asarray(a, float), np.asarray(current, float), np.abs(np.asarray(r, float)), np.asarray(z, float)
    )
    d2 = (a - r) ** 2 + z**2
    if np.any(d2 < eps**2):
        raise SingularPointError("evaluation point within %.1e m of a filament" % eps)
    s2 = (a + r) ** 2 + z**2
    m1 = d2 / s2  # 1 - k^2
    m = 1.0 - m1
    K = ellipkm1(m1)
    E = ellipe(m)
    s = np.sqrt(s2)
    pref = MU0 * current / (2 * math.pi)
    Bz = pref / s * (K + (a**2 - r**2 - z**2) / d2 * E)
    small = r < 1e-9 * a
    r_safe = np.where(small, 1.0, r)
    Br = pref * z / (r_safe * s) * (-K + (a**2 + r**2 + z**2) / d2 * E)
    # near the axis the bracket cancels; use the leading series term
    near_axis = r < 1e-5 * a
    if np.any(near_axis):
        series = 3 * MU0 * current * a**2 * z * r / (4 * (a**2 + z**2) ** 2.5)
        Br = np.where(near_axis, series, Br)
    return Br, Bz


def loop_field(radius: float, current: float, point: tuple[float, float]) -> FieldVector:
    """Field of one filament loop (radius in m, point (r, z) in m relative to the loop)."""
    if radius <= 0:
        raise ValueError("loop radius must be positive")
    Br, Bz = loop_field_arrays(radius, current, point[0], point[1])
    return FieldVector(float(Br), float(Bz))


def loop_flux(a, current, r, z):
    """Flux of a filament loop through the disk of radius ``r`` at height ``z``.

    Equals mutual inductance times current; r = 0 gives zero.
    """
    a, current, r, z = np.broadcast_arrays(
        np.asarray(a, float), np.asarray(current, float), np.asarray(r, float), np.asarray(z, float)
    )
    d2 = (a - r) ** 2 + z**2
    s2 = (a + r) ** 2 + z**2
    m1 = d2 / s2
    m = 1.0 - m1
    with np.errstate(divide="ignore", invalid="ignore"):
        bracket = np.where(
            m < 1e-3,
            _series_flux_factor(m),
            (2 - m) * ellipkm1(m1) - 2 * ellipe(m),
        )
        k = np.sqrt(m)
        out = MU0 * current * np.sqrt(a * r) * bracket / np.where(k > 0, k, 1.0)
    return np.where(r > 0, out, 0.0)


def _cel(kc, p, c, s, tol: float = 1e-13):
    """Bulirsch's generalised complete elliptic integral, vectorised, p > 0."""
    kc, p, c, s = (np.array(x, dtype=float) for x in np.broadcast_arrays(kc, p, c, s))
    k = np.abs(kc)
    em = np.ones_like(k)
    pp = np.sqrt(p)
    s = s / pp
    f = c.copy()
    c = c + s / pp
    g = k / pp
    s = 2 * (s + f * g)
    pp = g + pp
    g = em.copy()
    em = k + em
    kk = k.copy()
    for _ in range(60):
        if np.all(np.abs(g - k) <= g * tol):
            break
        k = 2 * np.sqrt(kk)
        kk = k * em
        f = c
        c = c + s / pp
        g = kk / pp
        s = 2 * (s + f * g)
        pp = g + pp
        g = em
        em = k + em
    return (math.pi / 2) * (s + c * em) / (em * (em + pp))


def sheet_field_arrays(a, width, current, r, z):
    """(B_r, B_z) of a cylindrical current sheet: one tape turn of axial ``width``.

    The sheet is centred on z = 0 at radius ``a`` and carries ``current``
    spread uniformly over its width.  On the sheet itself (r == a) the mean
    of the inside and outside limits is returned.
    """
    a, width, current, r, z = np.broadcast_arrays(
        *(np.asarray(x, float) for x in (a, width, current, r, z))
    )
    on_sheet = np.abs(r - a) < 1e-9 * a
    if np.any(on_sheet):
        lo = sheet_field_arrays(a, width, current, np.where(on_sheet, a * (1 - 1e-7), r), z)
        hi = sheet_field_arrays(a, width, current, np.where(on_sheet, a * (1 + 1e-7), r), z)
        return 0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])
    b = width / 2
    B0 = MU0 * current / width / math.pi
    zp = z + b
    zm = z - b
    sp = np.sqrt(zp**2 + (r + a) ** 2)
    sm = np.sqrt(zm**2 + (r + a) ** 2)
    kp = np.sqrt(zp**2 + (a - r) ** 2) / sp
    km = np.sqrt(zm**2 + (a - r) ** 2) / sm
    gamma = (a - r) / (a + r)
    one = np.ones_like(a)
    Br = B0 * (a / sp * _cel(kp, one, one, -one) - a / sm * _cel(km, one, one, -one))
    Bz = B0 * a / (a + r) * (
        zp / sp * _cel(kp, gamma**2, one, gamma) - zm / sm * _cel(km, gamma**2, one, gamma)
    )
    return Br, Bz


# ------------------------------------------------------------ superposition


def _sum_loops(src_r, src_z, src_I, pts_r, pts_z):
    """Field at points from a set of filaments, chunked; fixed summation order."""
    pts_r = np.asarray(pts_r, float).ravel()
    pts_z = np.asarray(pts_z, float).ravel()
    Br = np.zeros_like(pts_r)
    Bz = np.zeros_like(pts_r)
    n_src = len(src_r)
    if n_src == 0 or len(pts_r) == 0:
        return Br, Bz
    step = max(1, _CHUNK // n_src)
    for i in range(0, len(pts_r), step):
        sl = slice(i, i + step)
        br, bz = loop_field_arrays(
            src_r[None, :], src_I[None, :], pts_r[sl, None], pts_z[sl, None] - src_z[None, :]
        )
        Br[sl] = br.sum(axis=1)
        Bz[sl] = bz.sum(axis=1)
    return Br, Bz


def loops_field(loops: TurnLoops, current: float, points_r, points_z, iron_boost_factor: float = 1.0):
    """Field of every loop in ``loops`` at the given points (arrays, metres)."""
    shape = np.shape(points_r)
    Br, Bz = _sum_loops(loops.r_m, loops.z_m, loops.sign * current, points_r, points_z)
    return (iron_boost_factor * Br).reshape(shape), (iron_boost_factor * Bz).reshape(shape)


def assembly_field(
    assembly: MagnetAssembly | WindingPack,
    current: float,
    point: tuple[float, float],
    iron_boost_factor: float = 1.0,
) -> FieldVector:
    """Field of the whole stack at one (r, z) point in metres."""
    loops = _loops(assembly)
    Br, Bz = loops_field(loops, current, np.array([point[0]]), np.array([point[1]]), iron_boost_factor)
    return FieldVector(float(Br[0]), float(Bz[0]))


@lru_cache(maxsize=64)
def _loops(obj) -> TurnLoops:
    return turn_loops_of(obj)


# ---------------------------------------------------- turn-resolved field


@dataclass(frozen=True)
class TurnField:
    """Field at the centre of every turn of the selected magnets."""

    loops: TurnLoops
    B_r: np.ndarray
    B_z: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.B_r, self.B_z)

    def scaled(self, factor: float) -> "TurnField":
        return TurnField(self.loops, self.B_r * factor, self.B_z * factor)


def _compress_far(loops: TurnLoops, order: int = 6):
    """Replace each pancake by Gauss-Legendre radial nodes (far-field use)."""
    x, w = leggauss(order)
    key = loops.magnet * 100000 + loops.pancake
    rows_r, rows_z, rows_I = [], [], []
    for k in np.unique(key):
        sel = key == k
        r = loops.r_m[sel]
        t = loops.thickness_m[sel][0]
        lo, hi = r.min() - t / 2, r.max() + t / 2
        n = sel.sum()
        rows_r.append(0.5 * (hi + lo) + 0.5 * (hi - lo) * x)
        rows_z.append(np.full(order, loops.z_m[sel][0]))
        rows_I.append(loops.sign[sel][0] * n * w / 2)
    return np.concatenate(rows_r), np.concatenate(rows_z), np.concatenate(rows_I)


def winding_field(
    assembly: MagnetAssembly,
    current: float = 1.0,
    iron_boost_factor: float = 1.0,
    magnets: Iterable[int] | None = None,
    near_mm: float = 12.0,
) -> TurnField:
    """Field at each turn centre of the chosen magnets (default: all).

    Sources in the same magnet within ``near_mm`` axially are tape strips,
    the rest of the same magnet are filaments, and other magnets are
    compressed to per-pancake radial quadrature (they sit a pole pitch away).
    """
    wanted = tuple(range(assembly.magnet_count)) if magnets is None else tuple(sorted(set(magnets)))
    return _unit_winding_field(assembly, wanted, near_mm).scaled(current * iron_boost_factor)


@lru_cache(maxsize=16)
def _unit_winding_field(assembly: MagnetAssembly, wanted: tuple[int, ...], near_mm: float) -> TurnField:
    loops = _loops(assembly)
    sel = np.isin(loops.magnet, wanted)
    ev = loops.subset(sel)
    Br = np.zeros(len(ev))
    Bz = np.zeros(len(ev))
    for m in wanted:
        own = loops.subset(loops.magnet == m)
        others = loops.subset(loops.magnet != m)
        far_r, far_z, far_I = _compress_far(others) if len(others) else (np.zeros(0),) * 3
        idx_m = np.flatnonzero(ev.magnet == m)
        for p in np.unique(ev.pancake[idx_m]):
            idx = idx_m[ev.pancake[idx_m] == p]
            pr, pz = ev.r_m[idx], ev.z_m[idx]
            z0 = pz[0]
            near = np.abs(own.z_m - z0) <= near_mm * MM
            n_src = own.subset(near)
            f_src = own.subset(~near)
            br_n, bz_n = sheet_field_arrays(
                n_src.r_m[None, :],
                n_src.width_m[None, :],
                n_src.sign[None, :],
                pr[:, None],
                pz[:, None] - n_src.z_m[None, :],
            )
            br_f, bz_f = _sum_loops(f_src.r_m, f_src.z_m, f_src.sign, pr, pz)
            br_o, bz_o = _sum_loops(far_r, far_z, far_I, pr, pz)
            Br[idx] = br_n.sum(axis=1) + br_f + br_o
            Bz[idx] = bz_n.sum(axis=1) + bz_f + bz_o
    return TurnField(ev, Br, Bz)


def _pack_is_mirror_symmetric(pack: WindingPack, tol_mm: float = 1e-9) -> bool:
    dps = pack.pancakes
    c = pack.axial_center_mm
    for a, b in zip(dps, reversed(dps)):
        if a.tape != b.tape or a.turns_per_pancake != b.turns_per_pancake or a.polarity != b.polarity:
            return False
        if a.inner_radius_mm != b.inner_radius_mm or a.pancake_gap_mm != b.pancake_gap_mm:
            return False
        if abs((a.axial_center_mm - c) + (b.axial_center_mm - c)) > tol_mm:
            return False
    return True


def representative_magnets(assembly: MagnetAssembly) -> tuple[int, ...]:
    """Smallest set of magnets whose winding maps cover the whole assembly.

    When every magnet uses the same mirror-symmetric pack and the train is
    symmetric about its centre, magnet m and magnet n-1-m see mirror-image
    fields (equal |B|, equal B_z x current), so only the first half is needed.
    """
    pls = assembly.placements
    n = len(pls)
    packs = {pl.pack for pl in pls}
    centre = (pls[0].position_mm + pls[-1].position_mm) / 2
    symmetric = (
        len(packs) == 1
        and _pack_is_mirror_symmetric(pls[0].pack)
        and all(abs((pls[i].position_mm - centre) + (pls[n - 1 - i].position_mm - centre)) < 1e-9 for i in range(n))
    )
    return tuple(range((n + 1) // 2)) if symmetric else tuple(range(n))


# ----------------------------------------------------------------- maps


@dataclass(frozen=True)
class FieldMap:
    """Field samples on an (r, z) set of points, with summary statistics."""

    r_m: np.ndarray
    z_m: np.ndarray
    B_r: np.ndarray
    B_z: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.B_r, self.B_z)

    @property
    def max(self) -> float:
        return float(self.magnitude.max())

    @property
    def mean(self) -> float:
        return float(self.magnitude.mean())

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r_mm", "z_mm", "Br_T", "Bz_T", "Bmag_T"])
            for row in zip(self.r_m / MM, self.z_m / MM, self.B_r, self.B_z, self.magnitude):
                w.writerow([f"{v:.6f}" for v in row])


def winding_field_map(
    assembly: MagnetAssembly,
    current: float,
    iron_boost_factor: float = 1.0,
    magnets: Iterable[int] | None = None,
) -> FieldMap:
    """Field at every turn location of the chosen magnets."""
    tf = winding_field(assembly, current, iron_boost_factor, magnets)
    return FieldMap(tf.loops.r_m, tf.loops.z_m, tf.B_r, tf.B_z)


def grid_field_map(
    assembly: MagnetAssembly | WindingPack,
    current: float,
    r_m: np.ndarray,
    z_m: np.ndarray,
    iron_boost_factor: float = 1.0,
) -> FieldMap:
    """Field on a tensor grid (r strictly increasing, z strictly increasing)."""
    r_m = np.asarray(r_m, float)
    z_m = np.asarray(z_m, float)
    if np.any(np.diff(r_m) <= 0) or np.any(np.diff(z_m) <= 0):
        raise ValueError("grid axes must be strictly increasing")
    R, Z = np.meshgrid(r_m, z_m, indexing="ij")
    Br, Bz = loops_field(_loops(assembly), current, R, Z, iron_boost_factor)
    return FieldMap(R.ravel(), Z.ravel(), Br.ravel(), Bz.ravel())


# --------------------------------------------------------- flux linkage


def _gl(n: int, lo: float, hi: float):
    x, w = leggauss(n)
    return 0.5 * (hi + lo) + 0.5 * (hi - lo) * x, 0.5 * w / 1.0


def _radial_flux(loops: TurnLoops, b_nodes, b_weights, zeta):
    """Average over coil radii of the flux from unit-current loops.

    ``zeta`` is an array of coil-plane heights (m) in the loops' frame.
    Returns an array shaped like ``zeta``.
    """
    zeta = np.asarray(zeta, float)
    flat = zeta.ravel()
    out = np.zeros_like(flat)
    n_src = len(loops) * len(b_nodes)
    step = max(1, _CHUNK // n_src)
    for i in range(0, len(flat), step):
        zz = flat[i : i + step]
        phi = loop_flux(
            loops.r_m[None, :, None],
            loops.sign[None, :, None],
            b_nodes[None, None, :],
            zz[:, None, None] - loops.z_m[None, :, None],
        )
        out[i : i + step] = (phi * b_weights[None, None, :]).sum(axis=(1, 2))
    return out.reshape(zeta.shape)


def _coil_radial_nodes(coil: ArmatureCoil, n: int):
    nodes, w = _gl(n, coil.inner_radius_mm * MM, coil.outer_radius_mm * MM)
    return nodes, w  # weights sum to 1 -> radial average


def flux_linkage(
    assembly: MagnetAssembly,
    coil: ArmatureCoil,
    displacement: float,
    current: float,
    iron_boost_factor: float = 1.0,
    rtol: float = 1e-8,
) -> tuple[float, float]:
    """Flux linkage of one armature coil and its derivative w.r.t. displacement.

    The actuator (magnet stack) is shifted by ``displacement`` metres.  Turns
    are spread uniformly over the coil cross-section; the average is taken
    with Gauss-Legendre nodes whose order is doubled until the linkage moves
    by less than ``rtol``.  The derivative is exact in z (difference of the
    radially averaged flux at the coil's top and bottom planes).
    Returns (Wb-turns, Wb-turns per metre); ``coil.sign`` is not applied.
    """
    loops = _loops(assembly)
    scale = coil.turns * current * iron_boost_factor
    z_lo = coil.z_center_mm * MM - coil.height_mm * MM / 2 - displacement
    z_hi = z_lo + coil.height_mm * MM
    prev = None
    n = 8
    while True:
        bn, bw = _coil_radial_nodes(coil, n)
        zn, zw = _gl(n, z_lo, z_hi)
        vals = _radial_flux(loops, bn, bw, zn)
        lam = scale * float(np.dot(vals, zw))
        ends = _radial_flux(loops, bn, bw, np.array([z_lo, z_hi]))
        dlam = -scale * float(ends[1] - ends[0]) / (coil.height_mm * MM)
        if prev is not None:
            tol = rtol * max(abs(lam), abs(prev[0]), 1e-300)
            dtol = rtol * max(abs(dlam), 1e-300) * 1e2
            if abs(lam - prev[0]) <= tol and abs(dlam - prev[1]) <= max(dtol, 1e-12 * abs(scale)):
                return lam, dlam
        if n >= 128:
            return lam, dlam
        prev = (lam, dlam)
        n *= 2


@dataclass
class LinkageKernel:
    """Tabulated radially-averaged flux of one pack (unit current, +polarity).

    ``G(zeta)`` is the mean over the coil annulus radii of the flux through
    a turn at axial offset ``zeta`` from the pack centre.  A cubic spline
    and its antiderivative give the coil linkage and its derivative for any
    displacement cheaply.
    """

    zeta: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self._spline = CubicSpline(self.zeta, self.values)
        self._anti = self._spline.antiderivative()

    @classmethod
    def build(
        cls,
        pack: WindingPack,
        inner_radius_m: float,
        outer_radius_m: float,
        radial_order: int = 16,
        reach_m: float = 3.2,
    ) -> "LinkageKernel":
        loops = turn_loops_of(pack)
        nodes, w = _gl(radial_order, inner_radius_m, outer_radius_m)
        grid = np.unique(
            np.concatenate(
                [
                    np.arange(0.0, 0.4, 1e-3),
                    np.arange(0.4, 1.0, 4e-3),
                    np.arange(1.0, reach_m + 1e-9, 2e-2),
                ]
            )
        )
        symmetric = np.allclose(np.sort(loops.z_m), np.sort(-loops.z_m), atol=1e-12)
        if symmetric:
            half = _radial_flux(loops, nodes, w, grid)
            zeta = np.concatenate([-grid[:0:-1], grid])
            vals = np.concatenate([half[:0:-1], half])
        else:
            zeta = np.concatenate([-grid[:0:-1], grid])
            vals = _radial_flux(loops, nodes, w, zeta)
        return cls(zeta, vals)

    def value(self, zeta):
        z = np.asarray(zeta, float)
        inside = np.abs(z) <= self.zeta[-1]
        return np.where(inside, self._spline(np.clip(z, self.zeta[0], self.zeta[-1])), 0.0)

    def integral(self, lo, hi):
        lo = np.clip(np.asarray(lo, float), self.zeta[0], self.zeta[-1])
        hi = np.clip(np.asarray(hi, float), self.zeta[0], self.zeta[-1])
        return self._anti(hi) - self._anti(lo)


def coil_linkage_from_kernel(
    kernel: LinkageKernel,
    assembly: MagnetAssembly,
    coil: ArmatureCoil,
    displacement,
    current: float,
    iron_boost_factor: float = 1.0,
):
    """Vectorised (linkage, d linkage/d displacement) using a pack kernel.

    Assumes every placement uses the pack the kernel was built from.
    """
    d = np.asarray(displacement, float)
    h = coil.height_mm * MM
    z_lo = coil.z_center_mm * MM - h / 2
    lam = np.zeros_like(d)
    dlam = np.zeros_like(d)
    for pl in assembly.placements:
        c = pl.position_mm * MM + d
        lam = lam + pl.polarity * kernel.integral(z_lo - c, z_lo + h - c) / h
        dlam = dlam - pl.polarity * (kernel.value(z_lo + h - c) - kernel.value(z_lo - c)) / h
    scale = coil.turns * current * iron_boost_factor
    return scale * lam, scale * dlam

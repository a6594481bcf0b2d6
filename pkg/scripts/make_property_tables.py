"""Regenerate the embedded cryogenic property tables.

Specific heats come from the NIST cryogenic material property fits
(log10 polynomial in log10 T, valid 4-300 K):
  OFHC copper (RRR 100) and AISI 304 stainless steel.
Enthalpy is the integral of c_p from 4 K.  The winding heat capacity is a
volume-fraction mix of copper (stabiliser + silver, lumped) and a
nickel-alloy substrate represented by the 304 stainless fit.
"""

from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

COPPER = (-1.91844, -0.15973, 8.61013, -18.996, 21.9661, -12.7328, 3.54322, -0.3797)
SS304 = (22.0061, -127.5528, 303.647, -381.0098, 274.0328, -112.9212, 24.7593, -2.239153)
RHO_CU, RHO_SUB = 8960.0, 7900.0
F_CU = 0.45

DATA = Path(__file__).resolve().parents[1] / "src" / "hts_wec" / "data"


def cp(coeffs, T):
    x = np.log10(T)
    return 10 ** sum(c * x**i for i, c in enumerate(coeffs))


def main() -> None:
    fine = np.linspace(4.0, 300.0, 296001)
    h = cumulative_trapezoid(cp(COPPER, fine), fine, initial=0.0)
    grid = np.concatenate([np.arange(4.0, 40.0, 1.0), np.arange(40.0, 100.0, 5.0), np.arange(100.0, 300.01, 10.0)])
    h_grid = np.interp(grid, fine, h)
    with open(DATA / "copper_enthalpy.csv", "w") as fh:
        fh.write("# copper specific enthalpy relative to 4 K\n")
        fh.write("# source: NIST cryogenic property fit for OFHC copper c_p(T), integrated numerically\n")
        fh.write("# regenerate with scripts/make_property_tables.py\n")
        fh.write("T_K,h_J_per_kg\n")
        for T, v in zip(grid, h_grid):
            fh.write(f"{T:.1f},{v:.6g}\n")
    grid_c = np.concatenate([np.arange(4.0, 60.0, 1.0), np.arange(60.0, 300.01, 10.0)])
    c_vol = F_CU * RHO_CU * cp(COPPER, grid_c) + (1 - F_CU) * RHO_SUB * cp(SS304, grid_c)
    with open(DATA / "winding_heat_capacity.csv", "w") as fh:
        fh.write("# volumetric heat capacity of the REBCO winding\n")
        fh.write(f"# mix: {F_CU:.2f} copper (NIST OFHC fit) + {1 - F_CU:.2f} substrate (NIST 304 stainless fit)\n")
        fh.write("# regenerate with scripts/make_property_tables.py\n")
        fh.write("T_K,C_J_per_m3K\n")
        for T, v in zip(grid_c, c_vol):
            fh.write(f"{T:.1f},{v:.6g}\n")


if __name__ == "__main__":
    main()

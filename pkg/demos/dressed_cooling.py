"""
Dressed-state cooling at the band edge
======================================

A drive below the edge puts the upper Mollow sideband into the band and
the lower one into the gap. Emission is then lopsided and the atom is
pumped into one dressed state. The closed-form populations are checked
against the full two-level master equation.
"""

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bandgap_qed.config import load_config
from bandgap_qed.driven_qubit import (
    cooling_rates, dressed_bound_state, dressed_lindblad_terms, dressed_steady_state,
    lindblad_steady_state, mixing_angle,
)

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

run = load_config()
device = run.device
omega_l = run.cooling["omega_l"]
g = device.qubit.g

rates = cooling_rates(device.band, omega_l, run.cooling["omega"], g)
rho_mm, rho_pp = dressed_steady_state(rates)
rho = lindblad_steady_state(*dressed_lindblad_terms(rates))
print(f"gamma+ / gamma- = {rates.gamma_plus / rates.gamma_minus:.1f}, "
      f"rho-- = {rho_mm:.5f} (master equation {rho[1, 1].real:.5f})")

split = dressed_bound_state(device.band, g, math.pi / 4, device.band.omega0)
print(f"sideband on the edge: bound-state splitting {1e3 * split:.1f} MHz")

# map over detuning and drive strength
detuning = np.linspace(-0.15, 0.15, 61)
rabi = np.linspace(0.02, 0.3, 57)
pop = np.full((detuning.size, rabi.size), np.nan)
for i, d in enumerate(detuning):
    for j, r in enumerate(rabi):
        theta, omega = mixing_angle(d, r)
        pop[i, j] = dressed_steady_state(cooling_rates(device.band, omega_l, omega, g,
                                                       theta=theta))[0]

fig, ax = plt.subplots(figsize=(5.5, 4))
mesh = ax.pcolormesh(rabi * 1e3, detuning * 1e3, pop, shading="nearest", vmin=0, vmax=1)
fig.colorbar(mesh, ax=ax, label="rho--")
ax.set_xlabel("bare Rabi rate (MHz)")
ax.set_ylabel("atom detuning (MHz)")
fig.tight_layout()
fig.savefig(out / "dressed_cooling.png", dpi=120)

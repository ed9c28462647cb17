"""
Bound state below the band edge
===============================

Sweep the bare qubit frequency through the edge. The bound state follows
the qubit deep in the gap and stays pinned below the edge once the qubit
enters the band. The finite crystal shows it as a transmission peak whose
width grows as the photon cloud spreads towards the ports.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bandgap_qed.bound_state import bound_state_sweep, solve_bound_state
from bandgap_qed.config import load_config
from bandgap_qed.spectra import fit_pipeline_length, qubit_sweep_s21, to_db

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

device = load_config().device
band, g = device.band, device.qubit.g

sol = solve_bound_state(device.qubit.with_frequency(band.omega0), band)
print(f"qubit on the edge: shift {1e3 * sol.detuning_edge:.3f} MHz, "
      f"qubit weight {sol.qubit_weight:.6f}, L = {sol.loc_length:.1f} mm")

omega_q = np.linspace(6.9, 8.1, 121)
rows = bound_state_sweep(omega_q, g, band, device.d_eff, device.gamma_ext)

probe = np.linspace(6.9, 8.1, 601)
tmap = qubit_sweep_s21(device, omega_q, probe)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
mesh = ax1.pcolormesh(omega_q, probe, to_db(tmap.values).T, shading="nearest", vmin=-60, vmax=0)
ax1.plot(omega_q, rows[:, 1], "w--", lw=0.8, label="bound state")
ax1.axhline(band.omega0, color="w", lw=0.5)
ax1.set_xlabel("bare qubit frequency (GHz)")
ax1.set_ylabel("probe (GHz)")
fig.colorbar(mesh, ax=ax1, label="|t| (dB)")

# linewidth against inverse localization length: the slope gives the device length
(d_fit, gamma_ext, r2), samples = fit_pipeline_length(device, np.linspace(7.5, 8.1, 13))
print(f"effective length {d_fit:.1f} mm (device {device.d0:.0f} mm), r2 = {r2:.4f}")
x = np.linspace(samples[:, 1].min(), samples[:, 1].max(), 50)
ax2.semilogy(samples[:, 1], 1e3 * samples[:, 0], "o", label="peak FWHM")
ax2.semilogy(x, 1e3 * gamma_ext * np.exp(-0.5 * d_fit * x), label=f"fit, d = {d_fit:.0f} mm")
ax2.set_xlabel("1/L (1/mm)")
ax2.set_ylabel("linewidth (MHz)")
ax2.legend()

fig.tight_layout()
fig.savefig(out / "bound_state.png", dpi=120)

"""
Pump-probe spectroscopy of the driven bound state
=================================================

Drive the bound state on its 0-1 line and then on the 1-2 line, and probe
the transmission as the drive grows. The dressed-state lines are drawn on
top of the maps.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bandgap_qed.bound_state import bare_frequency
from bandgap_qed.config import load_config
from bandgap_qed.spectra import pump_probe_ladder, pump_probe_map, to_db

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

run = load_config()
device = run.device
omega01 = run.pumpprobe["omega01"]
device = device.with_qubit(omega_q=bare_frequency(omega01, device.qubit.g, device.band))
ladder = pump_probe_ladder(device)
f01, f12 = ladder.transition_freqs[:2]
print(f"ladder {np.round(ladder.transition_freqs, 4)} GHz, "
      f"decay {np.round(1e3 * np.array(ladder.decay_rates), 2)} MHz")

power = np.linspace(0.0, 0.06, 61)
probe = np.linspace(f12 - 0.1, f01 + 0.1, 801)

fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
for ax, pump, title in zip(axes, (f01, f12), ("pump at 0-1", "pump at 1-2")):
    tmap = pump_probe_map(device, pump, power, probe, ladder=ladder)
    ax.pcolormesh(power * 1e3, probe, to_db(tmap.values).T, shading="nearest", vmin=-50, vmax=0)
    lines = np.array(tmap.overlay)
    strong = lines[lines[:, 0] > 0.005]
    ax.plot(strong[:, 0] * 1e3, strong[:, 1], "w.", ms=1)
    ax.set_xlabel("bare Rabi rate (MHz)")
    ax.set_title(title)
axes[0].set_ylabel("probe (GHz)")
fig.tight_layout()
fig.savefig(out / "pump_probe.png", dpi=120)

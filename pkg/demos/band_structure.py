"""
Band structure of the stepped-impedance crystal
===============================================

Compare the Bloch dispersion of the bilayer line with a uniform line, show
the band gap in the finite crystal's transmission and plot the two Bloch
modes that meet at the lower edge of the second band.
"""

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bandgap_qed.band_structure import band_table, bare_transmission, bloch_modes, find_edge
from bandgap_qed.config import load_config

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

device = load_config().device
geom = device.geometry
edge = find_edge(geom)
print(f"second band starts at {edge.frequency:.6f} GHz")

fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(12, 4))

# dispersion, folded into the first zone
for g, style, label in ((geom, "-", "crystal"), (geom.uniform(), ":", "uniform line")):
    k, idx, f = band_table(g, 16.0, 4001)
    for b in np.unique(idx):
        sel = idx == b
        ax1.plot(k[sel] * geom.period / math.pi, f[sel], style, color="C0" if g is geom else "C1",
                 label=label if b == 1 else None)
ax1.axhline(edge.frequency, color="k", lw=0.5)
ax1.set_xlabel("k d / pi")
ax1.set_ylabel("frequency (GHz)")
ax1.legend()

# the 14-cell crystal between 50 ohm ports
f = np.linspace(4.0, 10.0, 3001)
ax2.plot(f, 20 * np.log10(np.abs(bare_transmission(geom, f))))
ax2.set_xlabel("frequency (GHz)")
ax2.set_ylabel("|t| (dB)")

# Bloch modes at the zone boundary; the qubit sits at the cell centre
k = math.pi / geom.period
for b in (1, 2):
    mode = bloch_modes(geom, k, b)
    ax3.plot(mode.x, np.abs(mode.profile), label=f"band {b}, {mode.frequency:.3f} GHz")
ax3.axvline(geom.period / 2, color="k", lw=0.5)
ax3.set_xlabel("x (mm)")
ax3.set_ylabel("|V|")
ax3.legend()

fig.tight_layout()
fig.savefig(out / "band_structure.png", dpi=120)

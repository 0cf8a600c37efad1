"""Untreated growth: metastatic index over 15 days for three colonization rates.

Run: python3 demos/01_metastatic_index.py
"""
from dataclasses import replace

import numpy as np

from angiometa import TABLE1, Discretization, Model, emission_split, simulate
from angiometa.pkpd import carrying_capacity
from angiometa.transport import HAHNFELDT_PRIMARY_X0

print(f"carrying capacity b = {carrying_capacity(TABLE1):.1f} mm^3")

disc = Discretization(T=15.0, dt=0.01)
print(f"\n{'m':>8} {'MI(1.5)':>10} {'MI(7.5)':>10} {'MI(15)':>10}")
for m in (1e-4, 1e-3, 1e-2):
    model = Model.tumor(replace(TABLE1, m=m), primary_x0=HAHNFELDT_PRIMARY_X0)
    s = simulate(model, disc).series
    print(f"{m:8.0e} " + " ".join(f"{s.MI[s.at(t)]:10.4g}" for t in (1.5, 7.5, 15.0)))

# who emits: with a small primary the metastases soon out-seed it
run = simulate(Model.tumor(TABLE1), Discretization(T=100.0, dt=0.05))
prim, meta = emission_split(run.series)
print("\nprimary starting at x0 = 1e-6 mm^3, m = 1e-3")
for t in (20.0, 50.0, 100.0):
    k = run.series.at(t)
    print(f"  t={t:5.0f}  x_p={run.series.x_p[k]:9.1f}  from primary {prim[k]:9.3g}  "
          f"from metastases {meta[k]:9.3g}  visible {run.series.visible[k]:8.3g}")
print("  ratio meta/primary at t=100:", np.round(meta[-1] / prim[-1], 1))

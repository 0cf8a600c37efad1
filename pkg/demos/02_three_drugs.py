"""Three anti-angiogenic drugs given daily on days 5-10, then stopped.

The vascular capacity theta drops under treatment and recovers once the
drug clears. Run: python3 demos/02_three_drugs.py
"""
import pathlib

import numpy as np

from angiometa import simulate
from angiometa.config import load_config

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"

untreated = load_config(CONFIGS / "table1.cfg")
runs = {"none": simulate(untreated.build_model(), untreated.disc).series}
for name in ("tnp470", "endostatin", "angiostatin"):
    cfg = load_config(CONFIGS / f"{name}.cfg")
    d = cfg.drugs[0].schedule
    print(f"{name:12s} e={d.efficacy:<6g} clr={d.clearance:<6g} e/clr={d.efficacy / d.clearance:.2f} "
          f"dose={d.dose:g} mg x {len(d.admin_times)}")
    runs[name] = simulate(cfg.build_model(), cfg.disc).series

print(f"\n{'drug':12s} {'x_p(15)':>9} {'min theta':>10} {'theta(15)':>10} {'MI(15)':>8}")
for name, s in runs.items():
    print(f"{name:12s} {s.x_p[-1]:9.1f} {s.theta_p.min():10.1f} {s.theta_p[-1]:10.1f} {s.MI[-1]:8.3f}")

s = runs["endostatin"]
k = int(np.argmin(s.theta_p))
print(f"\nendostatin: theta bottoms at t={s.t[k]:.2f} ({s.theta_p[k]:.0f} mm^3) and climbs back "
      f"to {s.theta_p[-1]:.0f} mm^3 by day 15")

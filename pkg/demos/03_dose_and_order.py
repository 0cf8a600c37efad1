"""Endostatin dose response and the order of a cytotoxic / anti-angiogenic pair.

Run: python3 demos/03_dose_and_order.py
"""
import pathlib

from angiometa import simulate
from angiometa.config import load_config, with_override

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def final(cfg):
    s = simulate(cfg.build_model(), cfg.disc).series
    return s.MI[-1], s.x_p[-1]


sweep = load_config(CONFIGS / "endostatin_dose_sweep.cfg")
print(f"{'dose mg':>8} {'MI(15)':>8} {'x_p(15)':>9}")
for v in sweep.sweep_values:
    mi, x = final(with_override(sweep, sweep.sweep_key, v))
    print(f"{v:>8} {mi:8.3f} {x:9.1f}")

print()
for name in ("ct_first", "aa_first"):
    mi, x = final(load_config(CONFIGS / f"{name}.cfg"))
    print(f"{name:9s} MI(15)={mi:.3f}  x_p(15)={x:.1f}")

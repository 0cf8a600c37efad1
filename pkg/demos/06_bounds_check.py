"""Discrete a priori estimates on the untreated 15-day run.

Run: python3 demos/06_bounds_check.py
"""
from dataclasses import replace

from angiometa import TABLE1, Discretization, Model, simulate
from angiometa.transport import HAHNFELDT_PRIMARY_X0
from angiometa.verify import check_bounds

model = Model.tumor(replace(TABLE1, m=1e-2), primary_x0=HAHNFELDT_PRIMARY_X0)
rep = check_bounds(simulate(model, Discretization(T=15.0, dt=0.01)).state)
print(rep.table(every=150))

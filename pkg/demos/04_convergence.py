"""Observed order of the two quadratures against an h/32 reference.

Takes about half a minute. Run: python3 demos/04_convergence.py
"""
from angiometa import TABLE1
from angiometa.transport import Quadrature
from angiometa.verify import convergence_study, smooth_convergence_setup

for q in (Quadrature.RECTANGLE, Quadrature.TRAPEZOID):
    model, disc = smooth_convergence_setup(TABLE1, q)
    rep = convergence_study(model, disc, levels=4, ref_factor=32, label=q.value)
    print(rep.table(), "\n")

"""Capacity upper bounds under grid refinement.

A point has zero capacity, but on a grid of spacing h the best the program
can do is load one cell, which costs about h^{n - alpha q}.  With
alpha = 1 + 2/n and q = n/2 that exponent is 1/2 for every n, so each
halving of h only divides the bound by sqrt(2).  A 2-patch in R^4 has
positive capacity and its bounds settle.

    python demos/capacity_refinement.py
"""
import numpy as np

from scalarflat.capacity import capacity_upper, patch_set, point_set
from scalarflat.potential import CapacityParams
from scalarflat.measure import make_kplane_measure

P = CapacityParams(3)
print(f"point in R^3, predicted factor per halving 2^{P.n - P.alpha * P.q:.2f} = "
      f"{2 ** (P.n - P.alpha * P.q):.3f}")
prev = None
for h in (0.1, 0.05, 0.025):
    b = capacity_upper(point_set(np.zeros(3)), h=h)
    ratio = "" if prev is None else f"  factor {prev / b.upper:.3f}"
    print(f"  h = {h:<6} upper {b.upper:.5f}  KKT {b.kkt_residual:.1e}{ratio}")
    prev = b.upper

side = 0.9 / np.sqrt(2)
mu = make_kplane_measure(2, side, 8, 4)
print("\n2-patch in R^4")
for h in (0.1, 0.075, 0.05):
    b = capacity_upper(patch_set(mu, h / 2), h=h)
    print(f"  h = {h:<6} upper {b.upper:.4f}  constraints {b.constraints}  min G*psi {b.min_constraint:.6f}")

"""Scalar-flat metrics on the sphere are harmonic functions on the plane.

The conformal factor U of stereographic projection turns u on R^n into
v = u/U on the sphere, and v solves the conformal Laplace equation exactly
when u is harmonic.  A finite-difference residual shrinks like h^2 for the
Newtonian kernel and stalls for a non-harmonic u.

    python demos/conformal_check.py
"""
import numpy as np

from scalarflat.geometry import newtonian_kernel, verify_conformal_covariance

samples = np.array([[1.5, 0.0, 0.0], [-1.0, 1.2, 0.0], [3.0, 1.0, 0.0]])
center = [0.2, -0.1, 0.0]
cases = {
    "Newtonian kernel": newtonian_kernel(center, 3),
    "1 + |x|^2": lambda x: 1.0 + np.sum(np.asarray(x) ** 2, axis=-1),
}
for label, u in cases.items():
    rep = verify_conformal_covariance(u, samples, 3, h=0.05, levels=4, singular_points=[center])
    res = ", ".join(f"{r:.2e}" for r in rep.max_residuals)
    print(f"{label:>17}: residuals {res}  orders {np.round(rep.orders, 2)}  charts {rep.charts}")

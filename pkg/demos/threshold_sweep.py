"""Where does divergence of the Wolff potential switch off?

For a set carrying a measure with mu(B(x, r)) ~ r^s the dyadic Wolff sums
at points of the set diverge exactly when s <= (n - 2)/2.  The sweep below
checks the growth class of the sums against that rule for flat k-patches
and for middle-gap Cantor sets.

    python demos/threshold_sweep.py
"""
import numpy as np

from scalarflat.capacity import selfsimilar_polarity
from scalarflat.measure import make_cantor_measure, make_kplane_measure, normalize
from scalarflat.potential import dyadic_wolff_profile

print(f"{'set':>14} {'n':>2} {'s':>6} {'slope':>7} {'class':>10} {'rule':>9}")
for n in range(3, 7):
    for k in range(1, n):
        side = 0.9 / np.sqrt(k)
        mu = normalize(make_kplane_measure(k, side, 8, n))
        p = dyadic_wolff_profile(mu, np.zeros(n), 16)
        rule = "diverges" if selfsimilar_polarity(k, n) else "bounded"
        print(f"{f'{k}-patch':>14} {n:2d} {k:6.3f} {p.slope:+7.3f} {p.tail_trend:>10} {rule:>9}")
for ratio, depth in ((1 / 3, 13), (1 / 4, 11)):
    for n in range(3, 7):
        mu = make_cantor_measure(ratio, depth, 1, n, scale=0.9, offset=np.r_[-0.45, np.zeros(n - 1)])
        x = mu.cantor_samples(4)[3]
        p = dyadic_wolff_profile(mu, x, 16)
        rule = "diverges" if selfsimilar_polarity(mu.dimension, n) else "bounded"
        print(f"{f'Cantor 1/{round(1 / ratio)}':>14} {n:2d} {mu.dimension:6.3f} {p.slope:+7.3f} "
              f"{p.tail_trend:>10} {rule:>9}")

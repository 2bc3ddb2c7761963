"""Two boundary sets in S^4, one removable for completeness and one not.

A single puncture: the Newtonian metric blows up fast enough that every
ray into the point has infinite length.  A flat 2-dimensional patch: the
mass near each point is too thin, and some ray reaches the patch in
finite length.

    python demos/puncture_vs_patch.py
"""
import numpy as np

from scalarflat.capacity import patch_set, point_set
from scalarflat.measure import dirac, make_kplane_measure, normalize
from scalarflat.metric import completeness_verdict
from scalarflat.potential import dyadic_wolff_profile


def show(label, mu, K):
    prof = dyadic_wolff_profile(mu, K.samples[0], 16)
    print(f"\n{label}")
    print(f"  Wolff terms t_k, k = 10..16: {np.array2string(prof.terms[10:], precision=3)}")
    print(f"  growth {prof.tail_trend} (slope {prof.slope:+.3f} per level)")
    rep = completeness_verdict(mu, K)
    print(f"  verdict: {rep.verdict}")
    for p in rep.probes[:2]:
        L = p.ray.shell_lengths
        print(f"    probe shells 10..12: {np.array2string(L[10:13], precision=4)}  sound={p.sound}")
    if rep.witness is not None:
        w = rep.witness
        print(f"    finite ray of length {w.value:.6f} (halved panels change it by {w.refinement_change:.1e})")


n = 4
show("puncture in R^4", dirac(np.zeros(n)), point_set(np.zeros(n)))
side = 0.9 / np.sqrt(2)
patch = normalize(make_kplane_measure(2, side, 8, n))
show("flat 2-patch in R^4", patch, patch_set(patch, side / 14))

"""Trapping detection for a strong metric bump.

Above the critical amplitude a stable circular orbit appears.  Random seeds
are traced, and those that never escape cluster at the orbit radius predicted
by the one-dimensional effective-potential oracle.
"""

from conicscat import build_manifold, detect_trapping
from conicscat.oracle import effective_potential_trapping

for amp in (2.0, 3.0):
    m = build_manifold("bump-metric", 2, amplitude=amp)
    orc = effective_potential_trapping(m, 1.0)
    rep = detect_trapping(m, 1.0, n_seeds=200, seed=0)
    print(f"amplitude {amp}: oracle stable orbits {orc.stable}  trapped {rep.n_trapped}/{rep.n_seeds}"
          f"  radius {rep.trapped_radius}")

"""Near-diagonal WKB propagator on a metric bump.

The leading amplitude a0 equals 1 on the diagonal and departs from 1 as the
endpoints straddle the bump.  On the flat model the kernel is the free one.
"""

import numpy as np

from conicscat import build_manifold, geodesic_distance, wkb_amplitude, wkb_kernel
from conicscat.oracle import free_propagator

bump = build_manifold("bump-metric", 2, amplitude=0.5)
zp = np.array([-0.8, 0.0])
for x in (-0.7, -0.3, 0.2, 0.8):
    z = np.array([x, 0.1])
    d = geodesic_distance(z, zp, bump).d
    a0 = wkb_amplitude(z, zp, bump)[0]
    print(f"z=({x:+.1f}, 0.1)  distance {d:.6f}  euclidean {np.linalg.norm(z - zp):.6f}  a0 {a0:.6f}")

flat = build_manifold("flat", 2)
z, zp, t = np.array([0.4, 0.3]), np.array([-0.2, 0.1]), 0.6
k = wkb_kernel(z, zp, t, flat)
print("flat kernel", k.value, " free propagator", free_propagator(z, zp, t))

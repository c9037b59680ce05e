"""Sojourn data of the inverse-square potential against its closed form.

A ray with impact parameter b is launched at perihelion.  The total sojourn
time from the extrapolated escape data is compared with -pi c / sqrt(b^2 + c).
"""

import numpy as np

from conicscat import PhasePoint, build_manifold, total_sojourn
from conicscat.oracle import inverse_square_sojourn

c = 1.0
m = build_manifold("inverse-square", 2, c=c)
for b in (0.5, 1.0, 2.0, 4.0):
    r = np.sqrt(b * b + c)        # perihelion radius at unit energy
    ts = total_sojourn(None, PhasePoint([0.0, r], [b / r, 0.0]), m, 1.0)
    exact = inverse_square_sojourn(b, c)
    print(f"b={b:4.1f}  tau={ts.tau:+.10f}  closed form {exact:+.10f}  diff {abs(ts.tau - exact):.1e}")

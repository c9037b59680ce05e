"""Diagnostics for the flow-out Legendrian on the product space.

Points of the flow-out are sampled from a few seeds.  The product symplectic
form vanishes on their tangent vectors.  A perturbed momentum scale breaks
this, which serves as a negative control.
"""

from conicscat import PhasePoint, build_manifold, check_lagrangian, sample_flowout

m = build_manifold("inverse-square", 2, c=1.0)
seeds = [PhasePoint([0.3, 2.0], [1.0, 0.2]), PhasePoint([-1.0, 1.5], [0.3, 1.0])]
fo = sample_flowout(m, 1.0, seeds, [(1.0, -1.0), (2.5, 0.7), (4.0, 3.0)])
print(f"{len(fo)} leaf points")
print("lagrangian residual:      ", check_lagrangian(fo).max_residual)
print("with 1% momentum scaling: ", check_lagrangian(fo, momentum_scale=1.01).max_residual)

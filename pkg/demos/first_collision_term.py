"""The first term of the tree expansion against the Boltzmann collision operator.

For spatially homogeneous data the one-collision term T(1,1) grows linearly in
time with slope Q(f0, f0)(v).  We estimate it by Monte Carlo over the creation
time, impact vector and velocity of the new particle, and compare with a direct
quadrature of the collision integral.
"""

import numpy as np

from boltzgrad import DensitySpec, VelocityGridFunction, eval_series_term, lanford_time, q_hardsphere

f0 = DensitySpec.two_temperature()
t0 = lanford_time(1, 1.0, 1.0, f0.effective_beta())
t = 0.1 * t0
grid = VelocityGridFunction.from_spec(f0, 32, 8.0)
x = np.array([[0.5, 0.5, 0.5]])

for v in ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.5, 0.0]):
    v = np.array([v])
    est = eval_series_term(1, 1, f0, (x, v), t, 200_000, seed=1, exact_sigma=True)
    q = q_hardsphere(grid, v[0], sphere_order=31)
    print(f"v = {v[0]}:  T(1,1)/t = {est.estimate / t:+.5f} +- {est.stderr / t:.5f}   Q = {q:+.5f}")

# the next term is smaller by roughly t/t0
roots = (x, np.zeros((1, 3)))
T1 = eval_series_term(1, 1, f0, roots, 0.2 * t0, 400_000, seed=2)
T2 = eval_series_term(1, 2, f0, roots, 0.2 * t0, 400_000, seed=3)
print(f"|T(1,2)| / |T(1,1)| at t = 0.2 t0: {abs(T2.estimate / T1.estimate):.3f}")

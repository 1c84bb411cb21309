"""Going there and coming back cost different amounts.

With a constant wind b = (0.2, 0) the metric is a Minkowski norm, so straight
lines are shortest and both directions can be written down by hand. We
compare the solver against that closed form and against a brute-force
shortest path on a grid graph, then check that the difference of the two
one-way distances is exactly twice the potential difference.

    python demos/asymmetric_distance.py
"""

import numpy as np

from finsler_quartic import catalog_patch, distance, distance_oracle_grid, potential_from_closed

p = catalog_patch("euclidean-exact")
x, y = np.array([0.0, 0.0]), np.array([1.0, 0.0])

there = distance(p, x, y)
back = distance(p, y, x)
exact = (1 + 0.2**4) ** 0.25
print(f"d(x, y) = {there.value:.9f}   closed form {exact + 0.2:.9f}   ({there.method})")
print(f"d(y, x) = {back.value:.9f}   closed form {exact - 0.2:.9f}")
print(f"grid oracle, 64 per axis: {distance_oracle_grid(p, x, y, 64):.6f}")

w = there.value - back.value
print(f"weight w_x(y) = {w:.9f}; 2 (V(y) - V(x)) = {2 * potential_from_closed(p, x, y):.9f}")

# A curved example: the same comparison on the patch with b = d(0.2 x1 x2).
q = catalog_patch("exact-mixed")
a, b = np.array([-1.0, 0.5]), np.array([1.5, -1.0])
fwd, bwd = distance(q, a, b), distance(q, b, a)
print(f"exact-mixed: d(a,b) - d(b,a) = {fwd.value - bwd.value:.9f}, 2 dV = {2 * potential_from_closed(q, a, b):.9f}")

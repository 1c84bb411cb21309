"""Which patches have reversible geodesics?

For each catalog patch we look at the curl of the one-form b and at what
happens when a geodesic is shot back from its endpoint. A closed b gives a
return trace on top of the outgoing one; the rotational patch does not.

    python demos/reversibility_tour.py
"""

import numpy as np

from finsler_quartic import catalog_names, catalog_patch, closedness_report, trace_reversibility_defect

rng = np.random.default_rng(0)
starts = rng.uniform(-2, 2, size=(3, 2))
dirs = rng.normal(size=(3, 2))

print(f"{'patch':18s} {'max |db|':>10s} {'trace defect':>14s}")
for name in catalog_names():
    p = catalog_patch(name)
    curl = closedness_report(p).max_residual
    defect = trace_reversibility_defect(p, list(zip(starts, dirs)), t_end=2.0, steps=512).max_residual
    print(f"{name:18s} {curl:10.3g} {defect:14.3g}")

# The two columns vanish together: reversibility is decided by d(beta) alone.

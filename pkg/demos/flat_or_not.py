"""Projective flatness on the catalog.

Hamel's relation vanishes identically for a projectively flat metric. We
evaluate it for F and for the reverse metric on random samples: the two
verdicts always agree. The conformal patch has a nonzero projective factor
but its spray is not proportional to y, so it is not flat.

    python demos/flat_or_not.py
"""

import numpy as np

from finsler_quartic import DirectionPoint, catalog_names, catalog_patch, hamel_batch, projective_factor

rng = np.random.default_rng(1)
X = rng.uniform(-2, 2, size=(40, 2))
Y = rng.normal(size=(40, 2))

for name in catalog_names():
    p = catalog_patch(name)
    hf = np.abs(hamel_batch(p, X, Y)).max()
    hr = np.abs(hamel_batch(p, X, Y, use_reverse=True)).max()
    print(f"{name:18s} hamel F {hf:9.2e}   hamel reverse {hr:9.2e}")

c = catalog_patch("conformal")
print("P at origin, y = (1, 0):", projective_factor(c, DirectionPoint(np.zeros(2), np.array([1.0, 0.0]))))

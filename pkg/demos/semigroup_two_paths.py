"""
The Ornstein-Uhlenbeck semigroup two ways
==========================================

Hermite coefficients decay like exp(-t|beta|); the Mehler kernel gives the
same flow in physical space.  Both paths are compared on a random input.
"""

import numpy as np

from gausshardy.chaos import ChaosExpansion, random_expansion
from gausshardy.semigroup import GaussianBump, SemigroupQuery, apply_semigroup, heat_values

rng = np.random.default_rng(0)
u = random_expansion(2, 6, rng)
print("input: %d Hermite coefficients in dimension %d" % (len(u), u.dimension))

# h_2 is an eigenfunction: one unit of time multiplies it by e^{-2}
out = apply_semigroup(ChaosExpansion.basis((2,)), SemigroupQuery(1.0))
print("e^{L} h_2 coefficient:", out[(2,)], "vs", np.exp(-2))

for t in (0.01, 0.3, 2.0):
    res = apply_semigroup(u, SemigroupQuery(t, path="both"))
    print("t = %-5g spectral vs Mehler quadrature, L2(gamma) gap %.2e" % (t, res.discrepancy))

# the mean is conserved along the flow
for t in (0.1, 1.0, 10.0):
    print("t = %-5g mean %.15f" % (t, apply_semigroup(u, SemigroupQuery(t)).mean()))

# Gaussian bumps have a closed-form flow: a check on the kernel path away from chaos inputs
bump = GaussianBump(np.array([0.5]), 0.3)
x = np.linspace(-3, 3, 7)[:, None]
kernel = apply_semigroup(bump, SemigroupQuery(0.4, path="kernel"), x).values
print("bump flow, max gap to closed form: %.2e" % np.max(np.abs(kernel - heat_values(bump, 0.4, x))))

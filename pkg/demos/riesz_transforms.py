"""
Riesz transforms on Hermite expansions
======================================

R = d M and S = d* M with M = |beta|^{-1/2}.  Both act as weighted index
shifts, so their L2 norms can be read off exactly.  S is not the adjoint of
R; the adjoint is M d*.
"""

import math

import numpy as np

from gausshardy.chaos import ChaosExpansion, random_expansion
from gausshardy.riesz import RieszQuery, riesz_adjoint_pairing, riesz_apply, riesz_pairing

for k in (1, 2, 5):
    r = riesz_apply(ChaosExpansion.basis((k,)), RieszQuery(0, "R"))
    s = riesz_apply(ChaosExpansion.basis((k,)), RieszQuery(0, "S"))
    print("k=%d  R h_k = %s   S h_k = %s" % (k, dict(r.coeffs), dict(s.coeffs)))
print("sup of R weights sqrt(2) = %.6f, S weight at k=1 is 2" % math.sqrt(2))

# the pairing with S fails already on h_2, h_1
print("<R h_2, h_1>, <h_2, S h_1> =", riesz_pairing(ChaosExpansion.basis((2,)), ChaosExpansion.basis((1,)), 0))

rng = np.random.default_rng(3)
f, g = random_expansion(1, 6, rng), random_expansion(1, 6, rng)
print("<R f, g>, <f, M d* g> =", riesz_adjoint_pairing(f, g, 0))

# the t-integral representation reproduces the spectral multiplier
u = random_expansion(1, 6, rng)
a = riesz_apply(u, RieszQuery(0, "R"))
b = riesz_apply(u, RieszQuery(0, "R", "integral"))
print("spectral vs integral path: %.2e" % a.max_abs_difference(b))

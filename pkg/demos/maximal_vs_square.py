"""
Two norms on the Gaussian Hardy space
=====================================

The non-tangential maximal function and the conical square function are
evaluated over the fixed test family.  Their L1 norms stay comparable.
"""

import numpy as np

from gausshardy.functionals import default_grid, h1_norms, maximal_function, test_family
from gausshardy.geometry import ConeSpec

grid = default_grid(1)
spec = ConeSpec()

# the maximal function of a constant is that constant
one = [m for m in test_family(1) if m.function_id == "h0"][0].function
print("T* of 1, min and max:", maximal_function(one, spec, grid).values.min(),
      maximal_function(one, spec, grid).values.max())

print("%-10s %12s %12s %8s" % ("function", "h1_quad", "h1_max", "ratio"))
ratios = []
for member in test_family(1)[:8]:
    r = h1_norms(member.function, 2.0, 1.0, spec, grid)
    ratios.append(r.ratio)
    print("%-10s %12.5g %12.5g %8.4f" % (member.function_id, r.quad, r.max, r.ratio))
print("spread max/min over these members: %.3f" % (max(ratios) / min(ratios)))

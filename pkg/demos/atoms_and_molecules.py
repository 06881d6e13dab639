"""
From tent atoms to molecules
============================

A seeded atom on an admissible ball is pushed through the reproducing
integral.  The result f equals L^N of a second function, and both decay
super-exponentially on the dyadic annuli around the ball.
"""

import numpy as np

from gausshardy.atoms import atom_to_molecule, make_atom, tent_norm
from gausshardy.geometry import AdmissibleBall

ball = AdmissibleBall(np.array([0.7]), 0.4, 2.0)
atom = make_atom(ball, seed=1)
print("ball measure %.4f, atom tent norm %.4f" % (ball.measure(), tent_norm(atom)))

f, f_tilde, report = atom_to_molecule(atom, 1, 36.0)
print("relation f = L f~, coefficient error %.2e" % report.relation_error)
print("fitted decay rate %.3g, normalising constant %.3g" % (report.fitted_decay_rate, report.k0_constant))

# norms on far annuli fall below double range, so they are kept as natural logs
print("%3s %14s %14s" % ("k", "log |f|", "log |f~|"))
for k, (a, b) in enumerate(zip(report.log_annulus_norms, report.log_tilde_annulus_norms)):
    print("%3d %14.4g %14.4g" % (k, a, b))

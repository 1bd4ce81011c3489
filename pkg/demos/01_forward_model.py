"""
The lining model and what convergence can see
=============================================

A segmental tunnel lining is modelled as a ring of Euler beams on normal
soil springs. This script solves it under a few pressure fields and shows
the two facts that shape every later inversion: a uniform pressure shortens
every baseline by the same amount, and any load that changes sign across
the ring (q(theta + 180) = -q(theta)) leaves all baselines untouched.
"""

import numpy as np

from liningbayes import fem
from liningbayes.parameterization import PressureField
from liningbayes.response import ResponseOperator, convergence, full_baselines

# The reference lining: D = 6.2 m, E = 3.5e7 kPa, 0.35 m thick, k_f = 1000 kN/m^3.
model = fem.LiningModel.from_section(6.2, 3.5e7, 0.35, k_f=1000.0, n_elements=100)
mesh = fem.build_mesh(model)
baselines = full_baselines(mesh)
print(f"{mesh.n_elements} elements of {mesh.length:.4f} m, {len(baselines)} baselines")

# Uniform 200 kPa: the hoop force should be close to q R = 620 kN everywhere.
res = fem.solve(model, mesh, PressureField.constant(200.0))
hoop = fem.hoop_forces(res.element_forces)
d = convergence(res, mesh, baselines)
print(f"uniform 200 kPa: hoop {hoop.min():.2f} to {hoop.max():.2f} kN, "
      f"convergence {d.min():.4f} to {d.max():.4f} mm")

# An oval load: more at crown and invert than at the springlines.
oval = PressureField.from_function(lambda t: 400 + 150 * np.cos(2 * np.radians(t)), 360)
d_oval = convergence(fem.solve(model, mesh, oval), mesh, baselines)
print(f"oval load: vertical baseline {d_oval[0]:+.3f} mm, horizontal {d_oval[25]:+.3f} mm")

# Adding 200 kPa everywhere shifts every baseline by one constant.
shifted = convergence(fem.solve(model, mesh, oval + PressureField.constant(200.0, 360)), mesh,
                      baselines)
gap = shifted - d_oval
print(f"+200 kPa uniform: every baseline moves by {gap.mean():.4f} mm "
      f"(spread {np.ptp(gap):.1e} mm)")

# A load with q(theta + 180) = -q(theta) pushes the ring sideways but keeps
# every diameter's length: convergence is blind to it.
odd = PressureField.from_function(lambda t: 100 * np.cos(np.radians(t))
                                  + 60 * np.sin(3 * np.radians(t)), 360)
blind = convergence(fem.solve(model, mesh, odd), mesh, baselines)
print(f"odd load: largest convergence {np.abs(blind).max():.1e} mm")

# Counting the blind directions of a 22-knot parameterization.
op = ResponseOperator.build(model, mesh, 22)
G = op.convergence_matrix(baselines)
s = np.linalg.svd(G, compute_uv=False)
print(f"convergence map of 22 knots: rank {np.sum(s > 1e-10 * s[0])}; "
      f"the crown hoop force adds one more direction")

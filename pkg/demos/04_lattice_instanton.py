# A constant-curvature instanton on the lattice four-torus
#
# Constant U(1) flux through the (1,2) and (3,4) planes with opposite signs
# is anti-self-dual.  Its action saturates the topological bound, and
# gradient flow brings a perturbed copy back to it.

import numpy as np

from nahm_workbench.gauge_torus import (
    asd_defect,
    constant_flux_u1,
    curvature,
    perturb,
    topological_charge,
    ym_action,
    ym_gradient_flow,
)

field = constant_flux_u1(8, {(0, 1): 1, (2, 3): -1})
print("charge:", topological_charge(field))
print("action / 8 pi^2:", ym_action(field) / (8 * np.pi**2))
print("self-dual fraction:", asd_defect(curvature(field)))

# A self-dual field has the same action with the opposite charge.

sd = constant_flux_u1(8, {(0, 1): 1, (2, 3): 1})
print("self-dual charge:", topological_charge(sd), "defect:", asd_defect(curvature(sd)))

# Perturb each link angle by about one percent and flow.

rng = np.random.default_rng(0)
flow = ym_gradient_flow(perturb(field, 0.01, rng), 0.05, 100)
print("action before:", flow.actions[0], "after:", flow.actions[-1], "bound:", 8 * np.pi**2)
print("monotone:", bool(np.all(np.diff(flow.actions) <= 0)))

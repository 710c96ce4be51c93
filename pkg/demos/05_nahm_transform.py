# The lattice Nahm transform
#
# Twist the Wilson-Dirac operator of the instanton by flat connections rho.
# For every rho one chiral block has a one-dimensional near-kernel, and these
# lines form a bundle over the dual torus.  Its Berry curvature is again
# constant and anti-self-dual.

import numpy as np

from nahm_workbench.gauge_torus import constant_flux_u1
from nahm_workbench.nahm import (
    DiracFamily,
    PicardGrid,
    kernel_frame,
    nahm_bundle,
    nahm_connection,
    nahm_curvature,
    periodicity_check,
)

field = constant_flux_u1(6, {(0, 1): 1, (2, 3): -1})

# A Wilson parameter of 0.5 keeps the near-kernel well separated from the
# rest of the spectrum at this lattice size.

family = DiracFamily(field, 0.5)
kf = kernel_frame(family.operator((0.2, 0.4, 0.0, 0.0), "-"))
print("kernel rank:", kf.q, "lowest singular values:", np.round(kf.singular_values, 4))

# Sweep a 6 x 6 slice of the dual torus in the (rho_1, rho_2) plane.

bundle = nahm_bundle(field, PicardGrid.plane(0, 1, 6), 0.5)
print("rank everywhere:", bundle.q, "smallest gap ratio:", bundle.gap_ratios.min())

curv = nahm_curvature(nahm_connection(bundle))
print("Chern number of the slice:", curv.chern[(0, 1)])
F01 = curv.field.components[0, 1, ..., 0, 0]
print("curvature spread over the slice:", np.ptp(F01.imag))

# Moving rho by a full period is undone by the gauge transformation
# exp(-2 pi i x_j / L), so the frames match up to a unitary.

print("periodicity defect:", periodicity_check(bundle, 0).defect)

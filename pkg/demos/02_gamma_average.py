# Averaging over twisted Laplacians
#
# Twisting the Laplacian by a flat U(1) connection shifts the lattice by a
# vector alpha in the unit cell.  Averaging the twisted spectra over alpha
# gives a measure with real weights, whose Dixmier trace agrees with the
# untwisted one.

import numpy as np

from nahm_workbench.dixmier import dixmier_estimate, gamma_spectral_measure
from nahm_workbench.spectral_lattice import averaged_ball_count, ball_volume, midpoint_alpha_grid, twisted_spectrum

# The average over alpha of the number of shifted lattice points in a ball
# is exactly the ball's area.  A midpoint grid reproduces it quickly.

for p in [4, 16, 32]:
    print(p, "x", p, "grid:", averaged_ball_count(2, 10, p), "area:", ball_volume(2, 10))

# Now the averaged spectral measure on an 8 x 8 grid of twists.

nodes, weights = midpoint_alpha_grid(2, 8)
G = gamma_spectral_measure([twisted_spectrum(2, 2, a, 300) for a in nodes], weights)
print("atoms:", len(G.values), "total weight:", G.total_weight)
print("averaged estimate:", dixmier_estimate(G).extrapolated_limit, "pi:", np.pi)

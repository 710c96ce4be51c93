# Dixmier traces on the flat torus
#
# The operator (1 + Laplacian)^(-n/2) on the n-torus has eigenvalues
# (1 + |m|^2)^(-n/2) indexed by lattice points m.  Its partial sums grow
# like log N, and the coefficient is the volume of the unit sphere divided
# by n.  We count lattice points shell by shell and read off that
# coefficient.

import numpy as np

from nahm_workbench.dixmier import delta, dixmier_estimate, norm_1infty
from nahm_workbench.spectral_lattice import enumerate_shells, sphere_area, twisted_spectrum

# Shell tables fold the lattice by |m|^2, so only a few thousand distinct
# eigenvalues are stored even for millions of lattice points.

table = enumerate_shells(2, 3000)
print("shells:", len(table.radius_squared), "lattice points:", table.total)

# The spectral measure keeps (eigenvalue, multiplicity) pairs.  delta(A, r)
# is the sum of the r largest eigenvalues, interpolated linearly between
# integers.

A = twisted_spectrum(2, 2, None, 3000)
for r in [10, 1000, 100000]:
    print(f"delta_{r} / log(1+r) = {delta(A, r) / np.log1p(r):.4f}")

# The ratio approaches its limit slowly, with a 1/log r correction.  The
# estimator fits that correction over a window of large r and extrapolates.

est = dixmier_estimate(A)
print("extrapolated:", est.extrapolated_limit, "expected:", sphere_area(2) / 2)
print("converged:", est.converged, "oscillation:", est.oscillation)

# In four dimensions the lattice grows quickly, and a radius of 60 already
# gives the right answer to about one percent.

A4 = twisted_spectrum(4, 4, None, 60)
print("n=4:", dixmier_estimate(A4).extrapolated_limit, "expected:", sphere_area(4) / 4)

# The (1, infinity) norm is the supremum of delta_t / log(1+t).  For the
# harmonic sequence it is attained at t = 1.

H = twisted_spectrum(1, 2, None, 10)
print("norm of the n=1 spectrum:", norm_1infty(H).value)

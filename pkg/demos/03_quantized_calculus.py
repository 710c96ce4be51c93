# Quantized differential forms on the torus
#
# With F the sign of the Dirac operator, the quantized differential of a
# function a is i[F, a].  Its principal symbol recovers da, and the
# antisymmetric part of the symbol of a quantized curvature recovers the
# classical curvature.

import warnings

import numpy as np

from nahm_workbench.quantized_calculus import (
    FourierTensor,
    TorusSymbol,
    TrigPolynomial,
    TruncationWarning,
    antisymmetrize,
    build_sign_dirac,
    classical_part,
    connes_check,
    dhat,
    quantized_curvature,
    quantized_d,
)

cos, sin = TrigPolynomial.cos, TrigPolynomial.sin

# F acts on spinor-valued Fourier modes in a box.  It is an involution.

F = build_sign_dirac(2, 6)
M = F.matrix.toarray()
print("F^2 = 1:", np.abs(M @ M - np.eye(M.shape[0])).max())

# The quantized differential of a quantized differential vanishes.

da = dhat(cos(2, 0) + sin(2, 1), F)
dd = quantized_d(da).operator.matrix
print("d(da) =", abs(dd).max() if dd.nnz else 0.0)

# In four dimensions the curvature of the quantized connection a d^b has
# antisymmetric symbol da ^ db.

F4 = build_sign_dirac(4, 4)
a, b = cos(4, 0), sin(4, 1)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", TruncationWarning)
    theta = quantized_curvature([(a, b)], F4)
Ac = antisymmetrize(classical_part(theta))
target = FourierTensor.exterior_derivative(a).wedge(FourierTensor.exterior_derivative(b))
print("Ac(c(Theta)) - da^db:", Ac.max_abs_difference(target))

# The Connes trace formula: the Dixmier trace of an order -2 operator on the
# two-torus is its Wodzicki residue divided by 2.

check = connes_check(TorusSymbol.scalar(2, -2, cos(2, 0) + 1), r_max=400)
print("estimate:", check.estimate.extrapolated_limit, "residue / n:", check.residue_over_n)

import warnings
from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nahm_workbench.quantized_calculus import (
    FourierTensor,
    GammaFiber,
    TorusSymbol,
    TrigPolynomial,
    TruncationWarning,
    antisymmetrize,
    build_sign_dirac,
    classical_curvature,
    classical_part,
    connes_check,
    dhat,
    dixmier_of_form_square,
    finite_difference_symbol,
    gamma_residue,
    multiplication,
    quantized_curvature,
    quantized_d,
    sample_grid,
    sphere_monomial_integral,
    wedge,
    wodzicki_residue,
)
from nahm_workbench._clifford import PAULI
from nahm_workbench.spectral_lattice import midpoint_alpha_grid

cos, sin, exp = TrigPolynomial.cos, TrigPolynomial.sin, TrigPolynomial.exp


def test_sphere_monomials():
    assert sphere_monomial_integral((0, 0)) == pytest.approx(2 * pi)
    assert sphere_monomial_integral((2, 0)) == pytest.approx(pi)
    assert sphere_monomial_integral((1, 1)) == 0
    assert sphere_monomial_integral((0, 0, 0, 0)) == pytest.approx(2 * pi**2)
    # average of x1^2 over S^3 is 1/4
    assert sphere_monomial_integral((2, 0, 0, 0)) == pytest.approx(2 * pi**2 / 4)


def test_residue_examples():
    assert wodzicki_residue(TorusSymbol.scalar(2, -2)) == pytest.approx(2 * pi)
    assert wodzicki_residue(TorusSymbol.scalar(2, -2, cos(2, 0) + 1)) == pytest.approx(2 * pi)
    assert wodzicki_residue(TorusSymbol.scalar(2, -2, fiber=np.diag([1, 3]))) == pytest.approx(8 * pi)
    with pytest.raises(ValueError):
        wodzicki_residue(TorusSymbol.scalar(2, -1))


def test_gamma_residue_averages_fibre():
    nodes, w = midpoint_alpha_grid(2, 4)
    gf = GammaFiber(nodes, w, 1 + np.cos(2 * pi * nodes[:, 0]))
    s = TorusSymbol.scalar(2, -2, gamma_fiber=gf)
    assert gamma_residue(s) == pytest.approx(2 * pi)


def test_connes_examples():
    r1 = connes_check(TorusSymbol.scalar(2, -2), r_max=400)
    assert r1.residue_over_n == pytest.approx(pi)
    assert r1.estimate.extrapolated_limit == pytest.approx(pi, rel=0.05)
    r2 = connes_check(TorusSymbol.scalar(2, -2, cos(2, 0) + 1), r_max=400)
    assert r2.relative_gap < 0.05
    r3 = connes_check(TorusSymbol.scalar(2, -2) * 2.5, r_max=400)
    assert r3.estimate.extrapolated_limit == pytest.approx(2.5 * r1.estimate.extrapolated_limit, rel=1e-12)
    assert r3.residue_over_n == pytest.approx(2.5 * pi)


def test_connes_twisted_family():
    nodes, w = midpoint_alpha_grid(2, 2)
    r = connes_check(TorusSymbol.scalar(2, -2), r_max=300, twist_grid=(nodes, w))
    assert r.relative_gap < 0.05


def test_connes_rejects_non_positive():
    with pytest.raises(ValueError):
        connes_check(TorusSymbol.scalar(2, -2) * -1.0, r_max=50)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_sign_operator(n):
    F = build_sign_dirac(n, 3 if n < 4 else 2)
    assert F.is_self_adjoint(1e-12)
    assert (F.matrix @ F.matrix - np.eye(F.size)).max() < 1e-12
    assert F.operator_norm() == pytest.approx(1, abs=1e-12)


def test_sign_examples():
    F1 = build_sign_dirac(1, 3)
    assert np.allclose(F1.matrix.diagonal(), [-1, -1, -1, 1, 1, 1, 1])
    F2 = build_sign_dirac(2, 2)
    assert np.allclose(F2.block((1, 0), (1, 0)), PAULI[0])


def test_dhat_examples():
    F1 = build_sign_dirac(1, 5)
    m = dhat(exp((1,)), F1).operator.matrix.tocoo()
    assert m.nnz == 1
    assert (F1.modes[m.row[0]][0], F1.modes[m.col[0]][0]) == (0, -1) and m.data[0] == 2j
    assert dhat(TrigPolynomial.constant(2, 3.0), build_sign_dirac(2, 4)).is_zero
    F2 = build_sign_dirac(2, 4)
    blk = dhat(exp((1, 0)), F2).operator.block((1, 1), (0, 1))
    expect = 1j * ((PAULI[0] + PAULI[1]) / np.sqrt(2) - PAULI[1])
    assert np.allclose(blk, expect, atol=1e-15)


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        dhat(exp((3, 0)), build_sign_dirac(2, 4))


def _interior_max(A, B, width):
    idx = A.interior(width)
    D = (A.matrix - B.matrix)[idx][:, idx]
    return float(abs(D).max()) if D.nnz else 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dhat_squared_and_leibniz(seed):
    rng = np.random.default_rng(seed)
    F = build_sign_dirac(2, 7)
    a = TrigPolynomial.random(2, rng, terms=3, max_freq=2)
    b = TrigPolynomial.random(2, rng, terms=3, max_freq=2)
    dd = quantized_d(dhat(a, F)).operator
    assert (abs(dd.matrix).max() if dd.matrix.nnz else 0) <= 1e-12
    lhs = quantized_d(multiplication(a * b, F)).operator
    rhs = wedge(dhat(a, F), multiplication(b, F)).operator + wedge(multiplication(a, F), dhat(b, F)).operator
    assert _interior_max(lhs, rhs, 4) <= 1e-12


def test_wedge_zero_and_mismatch():
    F = build_sign_dirac(2, 5)
    z = multiplication(TrigPolynomial(2), F)
    assert wedge(z, dhat(cos(2, 0), F)).is_zero
    with pytest.raises(ValueError):
        wedge(dhat(cos(2, 0), F), dhat(cos(2, 1), build_sign_dirac(2, 6)))


def test_graded_commutator_matches_words():
    F = build_sign_dirac(2, 6)
    w = wedge(multiplication(cos(2, 0), F), dhat(sin(2, 1), F))
    via_commutator = quantized_d(w).operator
    words = wedge(dhat(cos(2, 0), F), dhat(sin(2, 1), F)).operator
    assert _interior_max(via_commutator, words, 3) <= 1e-12


def test_truncated_matrix_matches_lazy_operator_inside():
    F = build_sign_dirac(2, 6)
    theta = quantized_curvature([(cos(2, 0), sin(2, 1) + exp((1, 1), 0.3))], F)
    op = theta.operator
    band = theta.band()
    for row, col in [((0, 0), (1, 0)), ((1, -1), (0, 0)), ((2, 1), (1, 0))]:
        assert np.allclose(op.block(row, col), band.element(row, col), atol=1e-14)


def test_symbol_matches_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        n = int(rng.choice([2, 4]))
        a = TrigPolynomial.random(n, rng, terms=3, max_freq=2)
        F = build_sign_dirac(n, 3 if n == 4 else 5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            sym = dhat(a, F).symbol
        for k in a.coeffs:
            v = rng.integers(-5, 6, size=n)
            if not v.any():
                v[0] = 1
            vh = v / np.linalg.norm(v)
            fd = finite_difference_symbol(a, k, v)
            worst = max(worst, float(np.max(np.abs(fd - sym.coefficient(k, vh)))))
    assert worst <= 1e-10


def test_classical_part_one_form():
    F = build_sign_dirac(2, 5)
    c = classical_part(dhat(exp((1, 0)), F))
    expect = FourierTensor(2, 1, {(1, 0): [1j, 0]})
    assert c.max_abs_difference(expect) <= 1e-12
    with pytest.raises(ValueError):
        classical_part(dhat(exp((1,)), build_sign_dirac(1, 4)))


def test_antisymmetrize_kills_symmetric_part():
    da = FourierTensor.exterior_derivative(cos(4, 0))
    db = FourierTensor.exterior_derivative(sin(4, 2))
    T = da.tensor(db) + (da.tensor(da) + db.tensor(db))
    assert antisymmetrize(T).max_abs_difference(da.wedge(db)) <= 1e-15
    A = antisymmetrize(T)
    assert antisymmetrize(A).max_abs_difference(A) == 0


pairs_4d = [
    (cos(4, 0), sin(4, 1)),
    (exp((1, 0, 0, 0), 0.5) + exp((0, 1, 1, 0), 0.2j), sin(4, 2) + cos(4, 3)),
    (TrigPolynomial.constant(4, 2.0) + cos(4, 1), exp((0, 0, 1, -1))),
]


@pytest.mark.parametrize("pair", pairs_4d)
def test_curvature_antisymmetric_part_is_classical(pair):
    F = build_sign_dirac(4, 4)
    theta = quantized_curvature([pair], F)
    Ac = antisymmetrize(classical_part(theta))
    assert Ac.max_abs_difference(classical_curvature([pair], 4)) <= 1e-12
    # also d[c(omega)] for the connection form, with a, b swapped roles
    assert Ac.max_abs_difference(FourierTensor.exterior_derivative(pair[0]).wedge(FourierTensor.exterior_derivative(pair[1]))) <= 1e-12


def test_curvature_zero_and_flat():
    F = build_sign_dirac(4, 4)
    assert quantized_curvature([(TrigPolynomial(4), sin(4, 0))], F).is_zero
    flat = quantized_curvature([(exp((-1, 0, 0, 0), 0.7), exp((1, 0, 0, 0)))], F)
    assert antisymmetrize(classical_part(flat)).max_abs_difference(FourierTensor(4, 2)) <= 1e-12


def test_norm_inequality_on_grid():
    F = build_sign_dirac(4, 4)
    theta = quantized_curvature([pairs_4d[1]], F)
    c = classical_part(theta)
    x = sample_grid(4, 16)
    full = np.sum(np.abs(c(x)) ** 2, axis=(1, 2))
    anti = np.sum(np.abs(antisymmetrize(c)(x)) ** 2, axis=(1, 2))
    assert np.all(full >= anti - 1e-12)


def test_form_square_examples():
    F = build_sign_dirac(4, 4)
    zero = dixmier_of_form_square(quantized_curvature([(TrigPolynomial(4), sin(4, 0))], F))
    assert zero.estimate.extrapolated_limit == 0
    theta = quantized_curvature([(cos(4, 0), sin(4, 1))], F)
    r = dixmier_of_form_square(theta, r_max=12, energy_grid=None)
    assert r.relative_gap < 0.10
    r2 = dixmier_of_form_square(theta * 3.0, r_max=12, energy_grid=None)
    assert r2.estimate.extrapolated_limit == pytest.approx(9 * r.estimate.extrapolated_limit, rel=1e-12)


def test_form_square_gamma_twists():
    F = build_sign_dirac(4, 4)
    theta = quantized_curvature([(cos(4, 0), sin(4, 1))], F)
    nodes, w = midpoint_alpha_grid(4, 1)
    r = dixmier_of_form_square(theta, r_max=10, twist_grid=(nodes, w), energy_grid=None)
    assert r.relative_gap < 0.10

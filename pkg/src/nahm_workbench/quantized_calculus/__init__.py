"""Symbols, Fourier-basis operators and quantized forms on flat tori."""

from .forms import (
    Factor,
    QuantizedForm,
    TruncationWarning,
    classical_curvature,
    classical_part,
    connection_form,
    dhat,
    factor_symbol,
    multiplication,
    quantized_curvature,
    quantized_d,
    wedge,
)
from .operators import (
    AdjointBand,
    BandOperator,
    DhatBand,
    ModeOperator,
    MultiplicationBand,
    SignBand,
    SymbolBand,
    box_modes,
    build_sign_dirac,
    sign_matrix,
)
from .symbols import (
    FourierTensor,
    GammaFiber,
    TorusSymbol,
    TrigPolynomial,
    antisymmetrize,
    gamma_residue,
    sample_grid,
    sphere_monomial_integral,
    wodzicki_residue,
)
from .traces import (
    TraceComparison,
    classical_energy,
    connes_check,
    dixmier_of_form_square,
    finite_difference_symbol,
    partial_traces,
)

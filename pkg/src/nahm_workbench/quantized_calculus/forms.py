"""Quantized differential forms ``a^0 d^a^1 ... d^a^k`` with ``d^a = i[F, a]``.

A form is a linear combination of words; each word is a product of factors
that are either multiplication by a trigonometric polynomial or its
quantized differential.  The words give three realizations:

* the truncated sparse matrix on the box ``|m|_inf <= M``,
* the exact lazy operator on the full mode lattice,
* the principal symbol of order ``-k``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .._clifford import clifford_generators
from .operators import (
    BandOperator,
    DhatBand,
    ModeOperator,
    MultiplicationBand,
    SignBand,
    SumBand,
    ProductBand,
)
from .symbols import FourierTensor, TorusSymbol, TrigPolynomial

BOUNDARY_SHELLS = 2


class TruncationWarning(UserWarning):
    """A polynomial's band reaches the edge of the mode box."""


@dataclass(frozen=True)
class Factor:
    kind: str  # "mul" or "d"
    poly: TrigPolynomial

    def __post_init__(self):
        if self.kind not in ("mul", "d"):
            raise ValueError("factor kind must be 'mul' or 'd'")

    @property
    def degree(self) -> int:
        return int(self.kind == "d")

    @property
    def vanishes(self) -> bool:
        return self.poly.is_zero or (self.kind == "d" and self.poly.is_constant)

    def describe(self) -> str:
        return "a" if self.kind == "mul" else "d^a"


Word = tuple[Factor, ...]


def _warn_band(a: TrigPolynomial, M: int):
    if a.band >= M - BOUNDARY_SHELLS:
        warnings.warn(
            f"polynomial band {a.band} is within {BOUNDARY_SHELLS} shells of the cutoff M={M}",
            TruncationWarning,
            stacklevel=3,
        )


def factor_symbol(f: Factor, n: int) -> TorusSymbol:
    g = clifford_generators(n)
    d = g.shape[1]
    eye = np.eye(d)
    zero = (0,) * n
    terms = {}
    if f.kind == "mul":
        for k, c in f.poly.coeffs.items():
            terms[(k, zero)] = c * eye
        return TorusSymbol(n, 0, d, terms)
    # sigma_{-1}(d^a) = |xi|^{-1} r(da - <xihat, da> xihat), da = sum_j i k_j a_k dx_j
    for k, c in f.poly.coeffs.items():
        if k == zero:
            continue
        kv = np.asarray(k, dtype=float)
        terms[(k, zero)] = terms.get((k, zero), 0) + 1j * c * np.einsum("j,jab->ab", kv, g)
        for j in range(n):
            for l in range(n):
                p = [0] * n
                p[j] += 1
                p[l] += 1
                key = (k, tuple(p))
                terms[key] = terms.get(key, 0) - 1j * c * kv[j] * g[l]
    return TorusSymbol(n, -1, d, terms)


class QuantizedForm:
    """Element of the quantized forms of fixed degree over the sign operator ``F``."""

    def __init__(self, F: ModeOperator, degree: int, words, matrix=None):
        self.F = F
        self.degree = int(degree)
        cleaned = []
        for c, w in words:
            w = tuple(w)
            if c == 0 or any(f.vanishes for f in w):
                continue
            if sum(f.degree for f in w) != self.degree:
                raise ValueError("word degree does not match form degree")
            cleaned.append((complex(c), w))
        self.words: list[tuple[complex, Word]] = cleaned
        self._matrix = matrix

    @property
    def n(self) -> int:
        return self.F.n

    @property
    def cutoff(self) -> int:
        return self.F.M

    @property
    def is_zero(self) -> bool:
        return not self.words

    @property
    def factors(self) -> list[list[str]]:
        return [[f.describe() for f in w] for _, w in self.words]

    @property
    def bandwidth(self) -> int:
        """Largest total mode shift of any word (for interior checks)."""
        return max((sum(f.poly.band for f in w) for _, w in self.words), default=0)

    def band(self, twist=None) -> BandOperator:
        """Exact lazy operator; ``twist`` re-evaluates ``F`` at ``m + alpha``."""
        sign = self.F.band if twist is None else SignBand(self.n, twist)
        parts = []
        for c, w in self.words:
            ops = [
                MultiplicationBand(f.poly, sign.d) if f.kind == "mul" else DhatBand(f.poly, sign)
                for f in w
            ]
            if not ops:
                ops = [MultiplicationBand(TrigPolynomial.constant(self.n), sign.d)]
            parts.append((c, ops[0] if len(ops) == 1 else ProductBand(ops)))
        if not parts:
            return BandOperator(self.n, sign.d, {})
        return SumBand(parts)

    @cached_property
    def operator(self) -> ModeOperator:
        """Truncated realization on the box of ``F``."""
        if self._matrix is not None:
            return ModeOperator(self.n, self.cutoff, self.F.d, self._matrix, self.band())
        mats = {}
        total = 0 * self.F.matrix
        for c, w in self.words:
            prod = None
            for f in w:
                key = (f.kind, id(f.poly))
                if key not in mats:
                    if f.kind == "mul":
                        mats[key] = MultiplicationBand(f.poly, self.F.d).materialize(self.cutoff).matrix
                    else:
                        mats[key] = DhatBand(f.poly, self.F.band).materialize(self.cutoff).matrix
                prod = mats[key] if prod is None else prod @ mats[key]
            if prod is None:
                prod = self.F.matrix @ self.F.matrix  # identity, since F^2 = 1
            total = total + c * prod
        return ModeOperator(self.n, self.cutoff, self.F.d, total, self.band())

    @cached_property
    def symbol(self) -> TorusSymbol:
        """Principal symbol of order ``-degree``."""
        d = self.F.d
        out = TorusSymbol(self.n, -self.degree, d, {})
        for c, w in self.words:
            s = TorusSymbol(self.n, 0, d, {((0,) * self.n, (0,) * self.n): np.eye(d)})
            for f in w:
                s = s * factor_symbol(f, self.n)
            out = out + s * c
        return out

    def __add__(self, other: "QuantizedForm") -> "QuantizedForm":
        _compatible(self, other)
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        return QuantizedForm(self.F, self.degree, self.words + other.words)

    def __mul__(self, c: complex) -> "QuantizedForm":
        return QuantizedForm(self.F, self.degree, [(c * a, w) for a, w in self.words])

    __rmul__ = __mul__


def _compatible(a: QuantizedForm, b: QuantizedForm):
    if a.F is b.F:
        return
    if (a.F.n, a.F.M, a.F.d) != (b.F.n, b.F.M, b.F.d) or (a.F.matrix != b.F.matrix).nnz:
        raise ValueError(f"cutoff mismatch between forms (M={a.F.M} vs M={b.F.M})")


def multiplication(a: TrigPolynomial, F: ModeOperator) -> QuantizedForm:
    _warn_band(a, F.M)
    return QuantizedForm(F, 0, [(1.0, (Factor("mul", a),))])


def dhat(a: TrigPolynomial, F: ModeOperator) -> QuantizedForm:
    """Quantized differential ``d^a = i[F, a]``."""
    if a.n != F.n:
        raise ValueError("polynomial and operator dimensions differ")
    _warn_band(a, F.M)
    return QuantizedForm(F, 1, [(1.0, (Factor("d", a),))])


def wedge(w1: QuantizedForm, w2: QuantizedForm) -> QuantizedForm:
    """Product of forms; degrees add."""
    _compatible(w1, w2)
    words = [(c1 * c2, a + b) for c1, a in w1.words for c2, b in w2.words]
    matrix = None
    if w1._matrix is not None or w2._matrix is not None:
        matrix = w1.operator.matrix @ w2.operator.matrix
    return QuantizedForm(w1.F, w1.degree + w2.degree, words, matrix)


def quantized_d(w: QuantizedForm) -> QuantizedForm:
    """``d^w = i(F w - (-1)^k w F)``; on words, the graded Leibniz rule with ``d^ d^ = 0``."""
    words = []
    for c, word in w.words:
        sign = 1
        for i, f in enumerate(word):
            if f.kind == "mul":
                words.append((sign * c, word[:i] + (Factor("d", f.poly),) + word[i + 1 :]))
            else:
                sign = -sign
    X = w.operator.matrix
    Fm = w.F.matrix
    matrix = 1j * (Fm @ X - (-1) ** w.degree * (X @ Fm))
    return QuantizedForm(w.F, w.degree + 1, words, matrix)


def connection_form(pairs, F: ModeOperator) -> QuantizedForm:
    """``omega = sum_i a_i d^b_i``."""
    words = []
    for a, b in pairs:
        _warn_band(a, F.M)
        _warn_band(b, F.M)
        words.append((1.0, (Factor("mul", a), Factor("d", b))))
    return QuantizedForm(F, 1, words)


def quantized_curvature(pairs, F: ModeOperator) -> QuantizedForm:
    """``Theta = d^omega + omega omega`` for ``omega = sum_i a_i d^b_i``.

    For a single pair this is ``d^a d^b + a d^b a d^b``, whose principal
    symbol agrees with ``d^a d^b + a^2 d^b d^b``.
    """
    pairs = list(pairs)
    omega = connection_form(pairs, F)
    return QuantizedForm(
        F,
        2,
        [(1.0, (Factor("d", a), Factor("d", b))) for a, b in pairs]
        + [(c1 * c2, w1 + w2) for c1, w1 in omega.words for c2, w2 in omega.words],
    )


def _sample_directions(n: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(12345)
    v = rng.normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _pi_one(n: int, xh: np.ndarray) -> np.ndarray:
    """Images of ``e_j`` under ``eta -> r(eta - <xihat, eta> xihat)``, shape ``(S, n, d, d)``."""
    g = clifford_generators(n)
    proj = np.eye(n)[None, :, :] - xh[:, :, None] * xh[:, None, :]
    return np.einsum("sjl,lab->sjab", proj, g)


def classical_part(w: QuantizedForm, samples: int = 48, tol: float = 1e-9) -> FourierTensor:
    """The map ``c`` recovering the classical tensor from the principal symbol.

    Degree 1 returns a one-form and degree 2 a two-tensor, each fitted per
    frequency by least squares against the symbol image and checked for
    consistency.  The degree-2 image is injective only for ``n >= 3``.
    """
    if w.degree not in (1, 2):
        raise ValueError("classical part is implemented for degrees 1 and 2")
    n = w.n
    if n == 1:
        raise ValueError("principal symbols of quantized forms vanish for n = 1")
    if w.degree == 2 and n < 3:
        raise ValueError("symbol map on two-tensors is not injective for n < 3")
    sym = w.symbol
    xh = _sample_directions(n, samples)
    R = _pi_one(n, xh)
    if w.degree == 1:
        basis = R  # (S, n, d, d)
    else:
        basis = np.einsum("sjab,slbc->sjlac", R, R).reshape(samples, n * n, sym.d, sym.d)
    A = np.moveaxis(basis, 1, -1).reshape(-1, basis.shape[1])
    rank = np.linalg.matrix_rank(A)
    if rank < A.shape[1]:
        raise ValueError("symbol image is degenerate on the sampled directions")
    coeffs = {}
    for k in sorted(sym.frequencies):
        rhs = sym.coefficient(k, xh).reshape(-1)
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        resid = np.linalg.norm(A @ sol - rhs)
        if resid > tol * max(1.0, np.linalg.norm(rhs)):
            raise ValueError(f"symbol at frequency {k} is not in the image of the symbol map")
        if np.max(np.abs(sol)) > 0:
            coeffs[k] = sol.reshape((n,) * w.degree)
    return FourierTensor(n, w.degree, coeffs)


def classical_curvature(pairs, n: int) -> FourierTensor:
    """``d(sum_i a_i db_i) = sum_i da_i ^ db_i``."""
    total = FourierTensor(n, 2, {})
    for a, b in pairs:
        total = total + FourierTensor.exterior_derivative(a).wedge(FourierTensor.exterior_derivative(b))
    return total

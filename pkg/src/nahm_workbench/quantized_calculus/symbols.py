"""Trigonometric polynomials, homogeneous symbols on ``T^n`` and classical tensor fields."""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi
from typing import Iterable, Mapping

import numpy as np

from .._clifford import clifford_generators, spinor_rank

Key = tuple[int, ...]


def _key(k) -> Key:
    return tuple(int(v) for v in k)


class TrigPolynomial:
    """Finite Fourier series ``sum_k a_k exp(i <k, x>)`` on ``T^n``."""

    def __init__(self, n: int, coeffs: Mapping[Iterable[int], complex] | None = None):
        self.n = int(n)
        self.coeffs: dict[Key, complex] = {}
        for k, c in (coeffs or {}).items():
            k = _key(k)
            if len(k) != self.n:
                raise ValueError(f"frequency {k} has wrong dimension for n={n}")
            c = complex(c)
            if c != 0:
                self.coeffs[k] = self.coeffs.get(k, 0) + c

    @classmethod
    def constant(cls, n: int, c: complex = 1.0) -> "TrigPolynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def exp(cls, k, c: complex = 1.0) -> "TrigPolynomial":
        k = _key(k)
        return cls(len(k), {k: c})

    @classmethod
    def cos(cls, n: int, j: int, freq: int = 1) -> "TrigPolynomial":
        e = [0] * n
        e[j] = freq
        return cls(n, {tuple(e): 0.5, tuple(-v for v in e): 0.5})

    @classmethod
    def sin(cls, n: int, j: int, freq: int = 1) -> "TrigPolynomial":
        e = [0] * n
        e[j] = freq
        return cls(n, {tuple(e): -0.5j, tuple(-v for v in e): 0.5j})

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, terms: int = 3, max_freq: int = 2):
        out = {}
        for _ in range(terms):
            k = tuple(rng.integers(-max_freq, max_freq + 1, size=n).tolist())
            out[k] = complex(rng.normal(), rng.normal())
        return cls(n, out)

    @property
    def band(self) -> int:
        return max((max(map(abs, k), default=0) for k in self.coeffs), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_constant(self) -> bool:
        return all(not any(k) for k in self.coeffs)

    def items(self):
        return sorted(self.coeffs.items())

    def __add__(self, other):
        if not isinstance(other, TrigPolynomial):
            other = TrigPolynomial.constant(self.n, other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return TrigPolynomial(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return TrigPolynomial(self.n, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TrigPolynomial):
            return TrigPolynomial(self.n, {k: c * other for k, c in self.coeffs.items()})
        out: dict[Key, complex] = {}
        for k1, c1 in self.coeffs.items():
            for k2, c2 in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + c1 * c2
        return TrigPolynomial(self.n, out)

    __rmul__ = __mul__

    def conj(self) -> "TrigPolynomial":
        """Pointwise complex conjugate."""
        return TrigPolynomial(self.n, {tuple(-v for v in k): np.conj(c) for k, c in self.coeffs.items()})

    def grad(self) -> list["TrigPolynomial"]:
        """Components ``d_j a = sum_k i k_j a_k e^{ikx}``."""
        return [
            TrigPolynomial(self.n, {k: 1j * k[j] * c for k, c in self.coeffs.items()})
            for j in range(self.n)
        ]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for k, c in self.coeffs.items():
            out += c * np.exp(1j * (x @ np.asarray(k, dtype=float)))
        return out

    def allclose(self, other: "TrigPolynomial", atol: float = 1e-12) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeffs.get(k, 0) - other.coeffs.get(k, 0)) <= atol for k in keys)

    def __repr__(self):
        return f"TrigPolynomial(n={self.n}, {dict(self.items())})"


def sphere_monomial_integral(p: Key) -> float:
    """``int_{S^{n-1}} xi^p dS`` (zero unless every exponent is even)."""
    if any(v % 2 for v in p):
        return 0.0
    n = len(p)
    num = 2.0
    for v in p:
        num *= gamma((v + 1) / 2)
    return num / gamma((sum(p) + n) / 2)


@dataclass(frozen=True)
class GammaFiber:
    """Scalar function on an alpha-grid; its trace is the quadrature average."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    def trace(self) -> float:
        return float(np.real(self.weights @ self.values))


class TorusSymbol:
    """Homogeneous symbol ``|xi|^order sum_{k,p} C_{k,p} e^{i<k,x>} xihat^p``.

    ``terms`` maps ``(k, p)`` (frequency, monomial exponent) to a ``d x d``
    fibre coefficient.
    """

    def __init__(self, n: int, order: int, d: int, terms: Mapping, gamma_fiber: GammaFiber | None = None):
        self.n, self.order, self.d = int(n), int(order), int(d)
        self.terms: dict[tuple[Key, Key], np.ndarray] = {}
        for (k, p), C in terms.items():
            C = np.asarray(C, dtype=complex).reshape(self.d, self.d)
            key = (_key(k), _key(p))
            if key in self.terms:
                self.terms[key] = self.terms[key] + C
            else:
                self.terms[key] = C
        self.gamma_fiber = gamma_fiber

    @classmethod
    def scalar(
        cls,
        n: int,
        order: int,
        f: TrigPolynomial | None = None,
        direction: Mapping | None = None,
        fiber=None,
        gamma_fiber: GammaFiber | None = None,
    ) -> "TorusSymbol":
        """``f(x) q(xihat) |xi|^order`` times a constant fibre matrix."""
        f = f if f is not None else TrigPolynomial.constant(n)
        direction = direction if direction is not None else {(0,) * n: 1.0}
        fiber = np.eye(1) if fiber is None else np.atleast_2d(np.asarray(fiber, dtype=complex))
        terms = {}
        for k, a in f.coeffs.items():
            for p, q in direction.items():
                terms[(k, _key(p))] = a * q * fiber
        return cls(n, order, fiber.shape[0], terms, gamma_fiber)

    @property
    def frequencies(self) -> set[Key]:
        return {k for k, _ in self.terms}

    def coefficient(self, k, xi_hat) -> np.ndarray:
        """``sum_p C_{k,p} xihat^p`` at directions of shape ``(..., n)``, returns ``(..., d, d)``."""
        k = _key(k)
        xi_hat = np.asarray(xi_hat, dtype=float)
        out = np.zeros(xi_hat.shape[:-1] + (self.d, self.d), dtype=complex)
        for (kk, p), C in self.terms.items():
            if kk == k:
                mono = np.prod(xi_hat ** np.asarray(p), axis=-1)
                out += mono[..., None, None] * C
        return out

    def __call__(self, x, xi) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi, axis=-1)
        xh = xi / r[..., None]
        out = 0
        for k in self.frequencies:
            out = out + np.exp(1j * (x @ np.asarray(k, float)))[..., None, None] * self.coefficient(k, xh)
        return (r**self.order)[..., None, None] * out

    def __mul__(self, other):
        if not isinstance(other, TorusSymbol):
            return TorusSymbol(self.n, self.order, self.d, {kp: C * other for kp, C in self.terms.items()}, self.gamma_fiber)
        if other.n != self.n or other.d != self.d:
            raise ValueError("symbol shapes differ")
        terms: dict = {}
        for (k1, p1), C1 in self.terms.items():
            for (k2, p2), C2 in other.terms.items():
                key = (tuple(a + b for a, b in zip(k1, k2)), tuple(a + b for a, b in zip(p1, p2)))
                terms[key] = terms.get(key, 0) + C1 @ C2
        return TorusSymbol(self.n, self.order + other.order, self.d, terms, _mul_fibers(self.gamma_fiber, other.gamma_fiber))

    __rmul__ = __mul__

    def __add__(self, other: "TorusSymbol") -> "TorusSymbol":
        if other.order != self.order or other.n != self.n or other.d != self.d:
            raise ValueError("can only add symbols of equal order and shape")
        terms = dict(self.terms)
        for kp, C in other.terms.items():
            terms[kp] = terms.get(kp, 0) + C
        return TorusSymbol(self.n, self.order, self.d, terms, self.gamma_fiber)

    def adjoint(self) -> "TorusSymbol":
        """Pointwise adjoint: conjugate-transpose fibres and reflect frequencies."""
        terms = {(tuple(-v for v in k), p): C.conj().T for (k, p), C in self.terms.items()}
        gf = self.gamma_fiber
        if gf is not None:
            gf = GammaFiber(gf.nodes, gf.weights, np.conj(gf.values))
        return TorusSymbol(self.n, self.order, self.d, terms, gf)

    def sphere_trace(self, k=None) -> complex:
        """``int_{S^{n-1}} tr C_k(xihat) dS`` for frequency ``k`` (default zero)."""
        k = (0,) * self.n if k is None else _key(k)
        return complex(sum(np.trace(C) * sphere_monomial_integral(p) for (kk, p), C in self.terms.items() if kk == k))

    def is_positive_on_sphere(self, samples: int = 64, seed: int = 0) -> bool:
        rng = np.random.default_rng(seed)
        xh = rng.normal(size=(samples, self.n))
        xh /= np.linalg.norm(xh, axis=1, keepdims=True)
        C = self.coefficient((0,) * self.n, xh)
        H = 0.5 * (C + np.conj(np.swapaxes(C, -1, -2)))
        return bool(np.all(np.linalg.eigvalsh(H) >= -1e-12))


def _mul_fibers(a: GammaFiber | None, b: GammaFiber | None) -> GammaFiber | None:
    if a is None:
        return b
    if b is None:
        return a
    if not np.array_equal(a.nodes, b.nodes):
        raise ValueError("gamma fibres live on different grids")
    return GammaFiber(a.nodes, a.weights, a.values * b.values)


def wodzicki_residue(sigma: TorusSymbol) -> float:
    """``(2 pi)^{-n} int_{T^n} int_{S^{n-1}} tr sigma`` for a symbol of order ``-n``.

    Only the zero frequency survives the ``x``-integral, and the
    ``(2 pi)^n`` torus volume cancels the prefactor.
    """
    if sigma.order != -sigma.n:
        raise ValueError(f"residue needs order -{sigma.n}, got {sigma.order}")
    return float(np.real(sigma.sphere_trace()))


def gamma_residue(sigma: TorusSymbol) -> float:
    """Residue with the alpha-grid fibre traced by its quadrature average."""
    if sigma.gamma_fiber is None:
        raise ValueError("symbol has no gamma fibre")
    return wodzicki_residue(sigma) * sigma.gamma_fiber.trace()


def dirac_symbol_basis(n: int) -> np.ndarray:
    """Clifford generators used for fibres of quantized forms."""
    return clifford_generators(n)


def fiber_rank(n: int) -> int:
    return spinor_rank(n)


class FourierTensor:
    """Classical covariant tensor field with Fourier coefficients.

    ``coeffs[k]`` has shape ``(n,)`` for one-forms and ``(n, n)`` for
    two-tensors; two-forms are antisymmetric two-tensors with
    ``alpha ^ beta = (alpha (x) beta - beta (x) alpha) / 2``.
    """

    def __init__(self, n: int, rank: int, coeffs: Mapping | None = None):
        self.n, self.rank = int(n), int(rank)
        shape = (self.n,) * self.rank
        self.coeffs: dict[Key, np.ndarray] = {}
        for k, C in (coeffs or {}).items():
            C = np.asarray(C, dtype=complex).reshape(shape)
            k = _key(k)
            self.coeffs[k] = self.coeffs.get(k, 0) + C

    @classmethod
    def exterior_derivative(cls, a: TrigPolynomial) -> "FourierTensor":
        return cls(a.n, 1, {k: 1j * np.asarray(k, float) * c for k, c in a.coeffs.items()})

    @classmethod
    def from_polynomials(cls, comps: list[TrigPolynomial]) -> "FourierTensor":
        n = len(comps)
        out: dict = {}
        for j, p in enumerate(comps):
            for k, c in p.coeffs.items():
                v = out.setdefault(k, np.zeros(n, complex))
                v[j] += c
        return cls(n, 1, out)

    def __add__(self, other: "FourierTensor") -> "FourierTensor":
        out = {k: C.copy() for k, C in self.coeffs.items()}
        for k, C in other.coeffs.items():
            out[k] = out.get(k, 0) + C
        return FourierTensor(self.n, self.rank, out)

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, other):
        if isinstance(other, TrigPolynomial):
            out: dict = {}
            for k1, C in self.coeffs.items():
                for k2, c in other.coeffs.items():
                    k = tuple(a + b for a, b in zip(k1, k2))
                    out[k] = out.get(k, 0) + C * c
            return FourierTensor(self.n, self.rank, out)
        return FourierTensor(self.n, self.rank, {k: C * other for k, C in self.coeffs.items()})

    __rmul__ = __mul__

    def tensor(self, other: "FourierTensor") -> "FourierTensor":
        if self.rank != 1 or other.rank != 1:
            raise ValueError("tensor product implemented for one-forms")
        out: dict = {}
        for k1, A in self.coeffs.items():
            for k2, B in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + np.outer(A, B)
        return FourierTensor(self.n, 2, out)

    def wedge(self, other: "FourierTensor") -> "FourierTensor":
        return antisymmetrize(self.tensor(other))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.n,) * self.rank, dtype=complex)
        for k, C in self.coeffs.items():
            ph = np.exp(1j * (x @ np.asarray(k, float)))
            out += ph.reshape(ph.shape + (1,) * self.rank) * C
        return out

    def max_abs_difference(self, other: "FourierTensor") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        zero = np.zeros((self.n,) * self.rank)
        return max((float(np.max(np.abs(self.coeffs.get(k, zero) - other.coeffs.get(k, zero)))) for k in keys), default=0.0)

    def squared_norm_integral(self) -> float:
        """``int_{T^n} |T|^2 dx`` by Parseval."""
        return float((2 * pi) ** self.n * sum(np.sum(np.abs(C) ** 2) for C in self.coeffs.values()))


def antisymmetrize(T: FourierTensor) -> FourierTensor:
    """Orthogonal projection ``T -> (T - T^t) / 2`` onto two-forms."""
    if T.rank != 2:
        raise ValueError("antisymmetrize needs a two-tensor")
    return FourierTensor(T.n, 2, {k: 0.5 * (C - C.T) for k, C in T.coeffs.items()})


def sample_grid(n: int, points: int) -> np.ndarray:
    """Uniform grid on ``T^n``, shape ``(points**n, n)``."""
    g = 2 * pi * np.arange(points) / points
    return np.stack(np.meshgrid(*([g] * n), indexing="ij"), axis=-1).reshape(-1, n)

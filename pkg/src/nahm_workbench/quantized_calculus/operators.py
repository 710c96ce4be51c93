"""Translation-structured operators on ``L^2(T^n) (x) C^d`` in the Fourier basis.

A :class:`BandOperator` is stored lazily on the whole lattice ``Z^n``: for each
mode shift ``k`` a function returns the ``d x d`` blocks
``P_k(m) = <m + k | P | m>`` at an array of modes ``m``.  Composition follows
``(PQ)_k(m) = sum_{k1 + k2 = k} P_{k1}(m + k2) Q_{k2}(m)``.

A :class:`ModeOperator` is the sparse matrix of an operator compressed to the
box ``|m|_inf <= M``.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .._clifford import clifford_generators, spinor_rank
from .symbols import Key, TorusSymbol, TrigPolynomial

BlockFn = Callable[[np.ndarray], np.ndarray]


def _add_keys(a: Key, b: Key) -> Key:
    return tuple(x + y for x, y in zip(a, b))


class BandOperator:
    """Lazy finite-band operator on the full mode lattice."""

    def __init__(self, n: int, d: int, blocks: Mapping[Key, BlockFn] | None = None):
        self.n, self.d = n, d
        self._blocks = dict(blocks or {})

    @property
    def shifts(self) -> set[Key]:
        return set(self._blocks)

    def blocks_at(self, m: np.ndarray) -> dict[Key, np.ndarray]:
        """All blocks at modes ``m`` (shape ``(N, n)``); arrays of shape ``(N, d, d)`` or ``(d, d)``."""
        return {k: f(m) for k, f in self._blocks.items()}

    def element(self, row, col) -> np.ndarray:
        row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        k = tuple(int(v) for v in np.rint(row - col))
        blocks = self.blocks_at(col[None, :])
        if k not in blocks:
            return np.zeros((self.d, self.d), dtype=complex)
        return np.broadcast_to(blocks[k], (1, self.d, self.d))[0].copy()

    def diagonal_trace(self, m: np.ndarray) -> np.ndarray:
        """``tr P_0(m)``."""
        b = self.blocks_at(m).get((0,) * self.n)
        if b is None:
            return np.zeros(len(m))
        return np.real(np.broadcast_to(np.trace(b, axis1=-2, axis2=-1), (len(m),)))

    def column_norms(self, m: np.ndarray) -> np.ndarray:
        """``sum_k |P_k(m)|_F^2``, the diagonal of ``P^* P`` traced over the fibre."""
        out = np.zeros(len(m))
        for b in self.blocks_at(m).values():
            b = np.broadcast_to(b, (len(m), self.d, self.d))
            out += np.sum(np.abs(b) ** 2, axis=(1, 2))
        return out

    def __matmul__(self, other: "BandOperator") -> "BandOperator":
        return ProductBand([self, other])

    def __add__(self, other: "BandOperator") -> "BandOperator":
        return SumBand([(1.0, self), (1.0, other)])

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        return SumBand([(1.0, self), (-1.0, other)])

    def __mul__(self, c: complex) -> "BandOperator":
        return SumBand([(c, self)])

    __rmul__ = __mul__

    def materialize(self, M: int) -> "ModeOperator":
        return ModeOperator.from_band(self, M)


class ProductBand(BandOperator):
    def __init__(self, factors: list[BandOperator]):
        flat: list[BandOperator] = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, ProductBand) else [f])
        super().__init__(flat[0].n, flat[0].d)
        self.factors = flat

    @property
    def shifts(self) -> set[Key]:
        acc = {(0,) * self.n}
        for f in self.factors:
            acc = {_add_keys(a, b) for a in acc for b in f.shifts}
        return acc

    def blocks_at(self, m):
        cur = self.factors[-1].blocks_at(m)
        for f in reversed(self.factors[:-1]):
            nxt: dict[Key, np.ndarray] = {}
            for k2, Q in cur.items():
                P = f.blocks_at(m + np.asarray(k2, dtype=float))
                for k1, Pb in P.items():
                    k = _add_keys(k1, k2)
                    term = Pb @ Q
                    nxt[k] = nxt[k] + term if k in nxt else term
            cur = nxt
        return cur


class SumBand(BandOperator):
    def __init__(self, parts: list[tuple[complex, BandOperator]]):
        super().__init__(parts[0][1].n, parts[0][1].d)
        self.parts = parts

    @property
    def shifts(self):
        return set().union(*(p.shifts for _, p in self.parts))

    def blocks_at(self, m):
        out: dict[Key, np.ndarray] = {}
        for c, p in self.parts:
            for k, b in p.blocks_at(m).items():
                out[k] = out[k] + c * b if k in out else c * b
        return out


class AdjointBand(BandOperator):
    """``(P^*)_k(m) = P_{-k}(m + k)^*``."""

    def __init__(self, op: BandOperator):
        super().__init__(op.n, op.d)
        self.op = op

    @property
    def shifts(self):
        return {tuple(-v for v in k) for k in self.op.shifts}

    def blocks_at(self, m):
        out = {}
        for k in self.shifts:
            b = self.op.blocks_at(m + np.asarray(k, dtype=float)).get(tuple(-v for v in k))
            if b is not None:
                out[k] = np.conj(np.swapaxes(b, -1, -2))
        return out


def sign_matrix(n: int, m: np.ndarray, twist=None) -> np.ndarray:
    """``F(m) = gamma . (m + alpha) / |m + alpha|`` with ``F := 1`` where ``m + alpha = 0``."""
    g = clifford_generators(n)
    d = g.shape[1]
    v = np.asarray(m, dtype=float)
    if twist is not None:
        v = v + np.asarray(twist, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    F = np.einsum("nj,jab->nab", v / safe[:, None], g)
    F[r == 0] = np.eye(d)
    return F


class SignBand(BandOperator):
    """Phase ``F = D |D|^{-1}`` of the flat Dirac operator (twist ``alpha`` optional)."""

    def __init__(self, n: int, twist=None):
        super().__init__(n, spinor_rank(n))
        self.twist = None if twist is None else tuple(float(a) for a in twist)
        self._blocks = {(0,) * n: lambda m: sign_matrix(n, m, self.twist)}


class MultiplicationBand(BandOperator):
    """Multiplication by a trigonometric polynomial, times the fibre identity."""

    def __init__(self, a: TrigPolynomial, d: int):
        super().__init__(a.n, d)
        eye = np.eye(d, dtype=complex)
        self._blocks = {k: (lambda m, c=c: c * eye) for k, c in a.coeffs.items()}


class DhatBand(BandOperator):
    """``i [F, a]``: blocks ``i a_k (F(m + k) - F(m))``."""

    def __init__(self, a: TrigPolynomial, sign: SignBand):
        super().__init__(a.n, sign.d)
        self.sign = sign
        zero = (0,) * a.n
        self._blocks = {}
        for k, c in a.coeffs.items():
            if k == zero:
                continue
            self._blocks[k] = lambda m, k=k, c=c: 1j * c * (
                self._F(m + np.asarray(k, dtype=float)) - self._F(m)
            )

    def _F(self, m):
        return self.sign.blocks_at(m)[(0,) * self.n]


def _bracket(m: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + np.sum(m * m, axis=-1))


class SymbolBand(BandOperator):
    """Left quantization of a homogeneous symbol with the smoothing ``|xi| -> <xi>``.

    The block for frequency ``k`` at mode ``m`` is
    ``sum_p C_{k,p} m^p <m>^{order - |p|}``, which agrees with the symbol up to
    lower order and is regular at ``m = 0``.
    """

    def __init__(self, sigma: TorusSymbol, twist=None):
        super().__init__(sigma.n, sigma.d)
        self.sigma = sigma
        self.twist = None if twist is None else np.asarray(twist, dtype=float)
        by_k: dict[Key, list] = {}
        for (k, p), C in sigma.terms.items():
            by_k.setdefault(k, []).append((np.asarray(p), C))
        self._blocks = {k: (lambda m, t=t: self._eval(m, t)) for k, t in by_k.items()}

    def _eval(self, m, terms):
        v = m if self.twist is None else m + self.twist
        br = _bracket(v)
        out = np.zeros((len(v), self.d, self.d), dtype=complex)
        for p, C in terms:
            w = np.prod(v**p, axis=-1) * br ** (self.sigma.order - p.sum())
            out += w[:, None, None] * C
        return out


def box_modes(n: int, M: int) -> np.ndarray:
    """Modes of the box ``|m|_inf <= M`` in lexicographic order."""
    g = np.arange(-M, M + 1)
    return np.stack(np.meshgrid(*([g] * n), indexing="ij"), axis=-1).reshape(-1, n)


class ModeOperator:
    """Sparse matrix of an operator compressed to the mode box ``|m|_inf <= M``.

    Rows and columns are indexed by ``(mode, spinor)`` with the mode index
    major.  ``band`` keeps the exact lazy operator when available.
    """

    def __init__(self, n: int, M: int, d: int, matrix, band: BandOperator | None = None, symbol=None):
        self.n, self.M, self.d = n, M, d
        self.matrix = sp.csr_matrix(matrix)
        self.band = band
        self.symbol = symbol
        self.modes = box_modes(n, M)
        size = len(self.modes) * d
        if self.matrix.shape != (size, size):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match box size {size}")

    @classmethod
    def from_band(cls, band: BandOperator, M: int, symbol=None) -> "ModeOperator":
        n, d = band.n, band.d
        modes = box_modes(n, M)
        side = 2 * M + 1
        rows, cols, vals = [], [], []
        blocks = band.blocks_at(modes.astype(float))
        base = np.arange(len(modes))
        for k, B in blocks.items():
            tgt = modes + np.asarray(k)
            ok = np.all(np.abs(tgt) <= M, axis=1)
            if not ok.any():
                continue
            B = np.broadcast_to(B, (len(modes), d, d))[ok]
            ridx = np.ravel_multi_index(tuple((tgt[ok] + M).T), (side,) * n)
            cidx = base[ok]
            r = (ridx[:, None, None] * d + np.arange(d)[None, :, None]) + 0 * np.arange(d)[None, None, :]
            c = (cidx[:, None, None] * d + np.arange(d)[None, None, :]) + 0 * np.arange(d)[None, :, None]
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(B.ravel())
        size = len(modes) * d
        if rows:
            mat = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
            ).tocsr()
            mat.eliminate_zeros()
        else:
            mat = sp.csr_matrix((size, size), dtype=complex)
        return cls(n, M, d, mat, band, symbol)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def mode_index(self, m) -> int:
        m = np.asarray(m)
        if np.any(np.abs(m) > self.M):
            raise IndexError(f"mode {tuple(m)} outside box M={self.M}")
        return int(np.ravel_multi_index(tuple(m + self.M), (2 * self.M + 1,) * self.n))

    def block(self, row_mode, col_mode) -> np.ndarray:
        i, j = self.mode_index(row_mode), self.mode_index(col_mode)
        d = self.d
        return self.matrix[i * d : (i + 1) * d, j * d : (j + 1) * d].toarray()

    def interior(self, width: int) -> np.ndarray:
        """Row/column indices of modes at sup-distance greater than ``width`` from the box edge."""
        ok = np.all(np.abs(self.modes) <= self.M - width, axis=1)
        idx = np.nonzero(ok)[0]
        return (idx[:, None] * self.d + np.arange(self.d)[None, :]).ravel()

    def interior_block(self, width: int) -> np.ndarray:
        idx = self.interior(width)
        return self.matrix[idx][:, idx]

    def _check(self, other: "ModeOperator"):
        if (self.n, self.M, self.d) != (other.n, other.M, other.d):
            raise ValueError(
                f"cutoff mismatch: (n, M, d)={(self.n, self.M, self.d)} vs {(other.n, other.M, other.d)}"
            )

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        self._check(other)
        band = self.band @ other.band if self.band is not None and other.band is not None else None
        return ModeOperator(self.n, self.M, self.d, self.matrix @ other.matrix, band)

    def __add__(self, other):
        self._check(other)
        band = self.band + other.band if self.band is not None and other.band is not None else None
        return ModeOperator(self.n, self.M, self.d, self.matrix + other.matrix, band)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, c):
        band = self.band * c if self.band is not None else None
        return ModeOperator(self.n, self.M, self.d, self.matrix * c, band)

    __rmul__ = __mul__

    def adjoint(self) -> "ModeOperator":
        band = AdjointBand(self.band) if self.band is not None else None
        return ModeOperator(self.n, self.M, self.d, self.matrix.conj().T, band)

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        diff = self.matrix - self.matrix.conj().T
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol

    def is_unitary(self, tol: float = 1e-12) -> bool:
        diff = self.matrix.conj().T @ self.matrix - sp.identity(self.size, format="csr")
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol

    def operator_norm(self) -> float:
        if self.size <= 2000:
            return float(np.linalg.norm(self.matrix.toarray(), 2))
        from scipy.sparse.linalg import ArpackError, svds

        v0 = np.ones(self.size, dtype=complex) / np.sqrt(self.size)
        try:
            return float(svds(self.matrix, k=1, v0=v0, return_singular_vectors=False)[0])
        except ArpackError:
            # degenerate top singular values (e.g. unitaries) can stall ARPACK; fall back to power iteration
            A, v, s = self.matrix, v0, 0.0
            for _ in range(1000):
                w = A.conj().T @ (A @ v)
                s_new = float(np.sqrt(np.vdot(v, w).real))
                v = w / np.linalg.norm(w)
                if abs(s_new - s) <= 1e-15 * max(s_new, 1.0):
                    return s_new
                s = s_new
            return s


def build_sign_dirac(n: int, M: int, twist=None) -> ModeOperator:
    """Phase ``F`` of the flat Dirac operator on the box ``|m|_inf <= M``.

    ``F(m) = gamma . m / |m|`` and ``F(0) := 1`` so that ``F`` is a
    self-adjoint involution.
    """
    if n not in (1, 2, 4):
        raise ValueError("sign operator is provided for n in {1, 2, 4}")
    if M < 1:
        raise ValueError("cutoff must be at least 1")
    return ModeOperator.from_band(SignBand(n, twist), M)

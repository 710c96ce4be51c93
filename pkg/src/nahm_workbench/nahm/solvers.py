"""Lowest singular values, kernel frames and kernel projectors of sparse blocks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 2048
CERTIFICATE_TOL = 1e-8
GAP_MIN = 5.0


class EigensolverError(RuntimeError):
    """Raised when the residual certificate cannot be met."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class NoStableKernelError(ValueError):
    """Raised when no singular-value gap identifies a kernel rank."""


@dataclass(frozen=True)
class LowestSingular:
    """The ``k`` smallest singular values of ``D`` with right singular vectors.

    ``residuals`` are ``||D^*D v - sigma^2 v||`` per vector, ``iterations``
    the eigensolver iterations used (0 on the dense path).
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int

    @property
    def value(self) -> float:
        return float(self.values[0])

    @property
    def vector(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def residual(self) -> float:
        return float(self.residuals.max())


def _finish(D, lam, V, iterations):
    order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    DV = D @ V
    H_V = D.conj().T @ DV
    res = np.linalg.norm(H_V - V * lam[None, :], axis=0)
    sig = np.linalg.norm(DV, axis=0)
    return LowestSingular(sig, V, res, iterations)


def lowest_singular(
    D,
    k: int = 1,
    X0: np.ndarray | None = None,
    tol: float = CERTIFICATE_TOL,
    maxiter: int = 4000,
    seed: int = 0,
) -> LowestSingular:
    """Smallest ``k`` singular values of the sparse matrix ``D`` with a residual certificate.

    Small problems are solved densely.  Larger ones run LOBPCG on ``D^*D``,
    warm started from ``X0`` when given, and fall back to shift-invert
    Lanczos; if the certificate ``max residual <= tol`` still fails an
    :class:`EigensolverError` reports the iteration count.
    """
    D = sp.csr_matrix(D)
    n = D.shape[1]
    if not 1 <= k <= n:
        raise ValueError("k out of range")
    H = (D.conj().T @ D).tocsr()
    if n <= DENSE_LIMIT:
        lam, V = np.linalg.eigh(H.toarray())
        out = _finish(D, lam[:k], V[:, :k], 0)
        if out.residual > tol * max(1.0, spla.norm(H, 1)):
            raise EigensolverError("dense eigensolver residual too large", 0, out.residual)
        return out
    rng = np.random.default_rng(seed)
    block = max(k, 2) if X0 is None else max(k, X0.shape[1])
    X = rng.standard_normal((n, block)) + 1j * rng.standard_normal((n, block))
    if X0 is not None:
        X[:, : X0.shape[1]] = X0
        X[:, X0.shape[1] :] *= 1e-3
    total = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam, V, hist = spla.lobpcg(H, X, largest=False, tol=tol / 10, maxiter=maxiter, retResidualNormsHistory=True)
    total += len(hist)
    out = _finish(D, lam[:k], V[:, :k], total)
    if out.residual <= tol:
        return out
    lam, V = spla.eigsh(H, k=k, sigma=-1e-3, which="LM", v0=V[:, 0], tol=tol / 100)
    out = _finish(D, lam, V, total)
    if out.residual > tol:
        raise EigensolverError("no certified lowest singular values", total, out.residual)
    return out


def min_singular(D, X0=None, tol: float = CERTIFICATE_TOL, seed: int = 0) -> LowestSingular:
    """Smallest singular value of ``D`` with its right singular vector and certificate."""
    return lowest_singular(D, 1, X0=X0, tol=tol, seed=seed)


def detect_rank(values: np.ndarray, gap_min: float = GAP_MIN) -> int | None:
    """Smallest ``q`` with ``s_{q+1} / s_q >= gap_min``; 0 if none exists but no cluster sits near zero.

    Returns ``None`` when the spectrum gives no decision (a ratio test is
    impossible because every listed value is zero).
    """
    v = np.asarray(values, dtype=float)
    tiny = np.finfo(float).tiny
    for j in range(len(v) - 1):
        if v[j + 1] >= gap_min * max(v[j], tiny):
            return j + 1
    if v[-1] <= tiny:
        return None
    return 0


@dataclass(frozen=True)
class KernelFrame:
    """Orthonormal frame for the numerical kernel of a chiral block."""

    frame: np.ndarray
    singular_values: np.ndarray
    residuals: np.ndarray
    q: int
    gap_ratio: float
    solver: LowestSingular

    @property
    def kernel_singular_values(self) -> np.ndarray:
        return self.singular_values[: self.q]


def kernel_frame(
    D,
    q: int | None = None,
    gap_min: float = GAP_MIN,
    q_max: int = 4,
    X0: np.ndarray | None = None,
    seed: int = 0,
) -> KernelFrame:
    """Numerical kernel of ``D`` selected by a singular-value gap.

    With ``q=None`` the rank is detected among the lowest ``q_max + 1``
    singular values.  A given ``q`` is checked against the gap; in both cases
    :class:`NoStableKernelError` is raised if no gap of ratio ``gap_min``
    identifies the rank.
    """
    k = (q_max + 1) if q is None else q + 2
    k = min(k, sp.csr_matrix(D).shape[1])
    low = lowest_singular(D, k, X0=X0, seed=seed)
    detected = detect_rank(low.values, gap_min)
    if detected is None or (q is not None and detected != q):
        raise NoStableKernelError(
            f"no stable kernel rank (expected {q}, detected {detected}); lowest singular values {low.values}"
        )
    q = detected
    if q < len(low.values):
        ratio = float(low.values[q] / max(low.values[q - 1], np.finfo(float).tiny)) if q > 0 else float("inf")
    else:
        ratio = float("nan")
    return KernelFrame(low.vectors[:, :q], low.values, low.residuals, q, ratio, low)


def kernel_projector(D, frame: KernelFrame | None = None, cutoff: float | None = None, method: str = "auto"):
    """Projector ``I - D^*(D D^*)^+_c D`` onto the numerical kernel of ``D``.

    The pseudo-inverse drops singular values at or below ``cutoff`` (the
    numerical kernel).  ``method='dense'`` forms it explicitly from
    ``D D^*``; ``'cg'`` returns a ``LinearOperator`` that deflates the
    kernel directions of ``frame`` and solves the consistent positive
    semidefinite system with conjugate gradients.
    """
    D = sp.csr_matrix(D)
    n = D.shape[1]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "cg"
    if method == "dense":
        A = D.toarray()
        lam, U = np.linalg.eigh(A @ A.conj().T)
        if cutoff is None:
            if frame is None:
                raise ValueError("need a cutoff or a kernel frame")
            cutoff = _cutoff_from(frame)
        keep = lam > cutoff**2
        W = U[:, keep] / np.sqrt(lam[keep])[None, :]
        B = A.conj().T @ W
        return np.eye(n) - B @ B.conj().T
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    if frame is None:
        raise ValueError("the iterative projector needs a kernel frame to deflate")
    Vk = frame.frame
    Uk = D @ Vk
    if Uk.shape[1]:
        Uk, _ = np.linalg.qr(Uk)
    DDs = spla.LinearOperator((D.shape[0],) * 2, matvec=lambda y: D @ (D.conj().T @ y), dtype=complex)

    def apply(x):
        x = np.asarray(x).ravel()
        b = D @ x
        if Uk.shape[1]:
            b = b - Uk @ (Uk.conj().T @ b)
        y, _ = spla.cg(DDs, b, rtol=1e-12, atol=1e-12 * np.linalg.norm(x), maxiter=5000)
        return x - D.conj().T @ y

    return spla.LinearOperator((n, n), matvec=apply, dtype=complex)


def _cutoff_from(frame: KernelFrame) -> float:
    vals = frame.singular_values
    if frame.q == 0:
        return 0.5 * float(vals[0])
    if frame.q < len(vals):
        return float(np.sqrt(vals[frame.q - 1] * vals[frame.q]))
    return 2.0 * float(vals[frame.q - 1])


def polar_unitary(M: np.ndarray) -> np.ndarray:
    """Unitary factor of the polar decomposition of a square matrix."""
    u, _ = sla.polar(M)
    return u

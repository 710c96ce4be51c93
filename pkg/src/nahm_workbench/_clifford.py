"""Euclidean Clifford generators shared by the symbol calculus and the lattice Dirac operator."""

from __future__ import annotations

import numpy as np

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# quaternion units sigma_mu = (-i s1, -i s2, -i s3, 1); gamma_mu = [[0, sigma], [sigma^*, 0]]
_SIGMA4 = tuple(-1j * s for s in PAULI) + (np.eye(2, dtype=complex),)


def _chiral(s: np.ndarray) -> np.ndarray:
    z = np.zeros((2, 2), dtype=complex)
    return np.block([[z, s], [s.conj().T, z]])


GAMMA4 = tuple(_chiral(s) for s in _SIGMA4)
GAMMA5 = GAMMA4[0] @ GAMMA4[1] @ GAMMA4[2] @ GAMMA4[3]


def spinor_rank(n: int) -> int:
    return {1: 1, 2: 2, 3: 2, 4: 4}[n]


def clifford_generators(n: int) -> np.ndarray:
    """Hermitian ``gamma_j`` with ``gamma_j gamma_k + gamma_k gamma_j = 2 delta_jk``, shape ``(n, d, d)``."""
    if n == 1:
        return np.ones((1, 1, 1), dtype=complex)
    if n in (2, 3):
        return np.stack(PAULI[:n])
    if n == 4:
        return np.stack(GAMMA4)
    raise ValueError(f"no Clifford generators for n={n}")


def clifford_two_form(omega: np.ndarray) -> np.ndarray:
    """``sum_{mu<nu} omega_{mu nu} gamma_mu gamma_nu`` for a real antisymmetric 4x4 ``omega``."""
    out = np.zeros((4, 4), dtype=complex)
    for m in range(4):
        for v in range(m + 1, 4):
            out += omega[m, v] * GAMMA4[m] @ GAMMA4[v]
    return out

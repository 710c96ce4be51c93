"""Twisted Wilson-Dirac operators on the lattice torus.

On ``C^4 (x) C^r`` valued fields the hopping operator in direction ``mu`` is
``(T_mu psi)(x) = U_mu(x) exp(2 pi i rho_mu / L) psi(x + mu)`` and

    D = sum_mu [ i gamma_mu (T_mu - T_mu^*) / 2i + w (1 - (T_mu + T_mu^*) / 2) ].

The first term is the naive (chirality-flipping) part, the second the
Wilson term, which preserves chirality.  The chiral blocks ``D+`` and ``D-``
are ``D`` restricted to the columns of ``S+`` and ``S-``; a constant
anti-self-dual curvature produces near-kernel vectors of ``D-``.

Unknowns are ordered ``(site, colour, spin)`` with the site index in
C order over ``(Z/L)^4``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import pi

import numpy as np
import scipy.sparse as sp

from .._clifford import GAMMA4, GAMMA5, clifford_two_form
from ..gauge_torus import SD_BASIS, GaugeField


def chirality_components(sign: int) -> np.ndarray:
    """Spin components of ``S+`` (``sign=+1``) or ``S-`` (``sign=-1``).

    ``S+`` is the chiral half on which anti-self-dual two-forms act trivially
    through Clifford multiplication (equivalently, where the self-dual ones
    act).
    """
    g5 = np.real(np.diag(GAMMA5))
    sd_action = np.abs(clifford_two_form(SD_BASIS[0])).sum(axis=1) > 0
    plus_g5 = g5[sd_action][0]
    target = plus_g5 if sign > 0 else -plus_g5
    return np.nonzero(g5 == target)[0]


def _hopping(field: GaugeField, mu: int) -> sp.csr_matrix:
    L, r = field.L, field.rank
    N = L**4
    sites = np.arange(N).reshape((L,) * 4)
    fwd = np.roll(sites, -1, axis=mu).ravel()
    U = field.links[mu].reshape(N, r, r)
    rows = (np.arange(N)[:, None, None] * r + np.arange(r)[None, :, None]) + 0 * np.arange(r)[None, None, :]
    cols = (fwd[:, None, None] * r + np.arange(r)[None, None, :]) + 0 * np.arange(r)[None, :, None]
    return sp.csr_matrix((U.ravel(), (rows.ravel(), cols.ravel())), shape=(N * r, N * r))


def _columns(N_r: int, comps: np.ndarray) -> np.ndarray:
    return (np.arange(N_r)[:, None] * 4 + comps[None, :]).ravel()


class DiracFamily:
    """The operators ``D(rho)`` of one gauge field, assembled cheaply for many twists.

    ``D(rho) = 4 w + sum_mu [e^{i phi} T_mu (x) (gamma_mu - w) / 2 + e^{-i phi} T_mu^* (x) (-gamma_mu - w) / 2]``
    with ``phi = 2 pi rho_mu / L``.
    """

    def __init__(self, field: GaugeField, wilson_r: float = 1.0):
        if not (0 < abs(wilson_r) <= 2):
            raise ValueError(f"Wilson parameter must satisfy 0 < |r| <= 2, got {wilson_r}")
        self.field = field
        self.wilson_r = float(wilson_r)
        self.L, self.rank = field.L, field.rank
        Nr = self.L**4 * self.rank
        self.size = 4 * Nr
        w = self.wilson_r
        eye4 = np.eye(4)
        self._fwd, self._bwd = [], []
        for mu in range(4):
            T = _hopping(field, mu)
            self._fwd.append(sp.kron(T, (GAMMA4[mu] - w * eye4) / 2, format="csr"))
            self._bwd.append(sp.kron(T.conj().T, (-GAMMA4[mu] - w * eye4) / 2, format="csr"))
        self._const = sp.identity(self.size, format="csr", dtype=complex) * (4 * w)
        self.plus_cols = _columns(Nr, chirality_components(+1))
        self.minus_cols = _columns(Nr, chirality_components(-1))
        self._restricted: dict = {}

    def _parts(self, cols_key):
        if cols_key not in self._restricted:
            cols = self.plus_cols if cols_key == "+" else self.minus_cols if cols_key == "-" else None
            pick = (lambda A: A[:, cols].tocsr()) if cols is not None else (lambda A: A)
            self._restricted[cols_key] = (
                pick(self._const),
                [pick(A) for A in self._fwd],
                [pick(A) for A in self._bwd],
            )
        return self._restricted[cols_key]

    def operator(self, rho, block: str = "full") -> sp.csr_matrix:
        """``D(rho)`` (``block='full'``) or its chiral column block (``'+'`` / ``'-'``)."""
        key = {"full": "full", "+": "+", "-": "-"}[block]
        C, F, B = self._parts(key)
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (4,):
            raise ValueError("rho must have four components")
        out = C.copy()
        for mu in range(4):
            ph = np.exp(2j * pi * rho[mu] / self.L)
            out = out + ph * F[mu] + np.conj(ph) * B[mu]
        return out.tocsr()

    def harmonic_gauge(self, j: int) -> np.ndarray:
        """Diagonal of ``u_j = exp(-2 pi i x_j / L)`` on ``S-`` unknowns.

        ``D(rho + e_j) = u D(rho) u^*`` with ``u`` acting on all unknowns.
        """
        return self.harmonic_gauge_full(j)[self.minus_cols]

    def harmonic_gauge_full(self, j: int) -> np.ndarray:
        L, r = self.L, self.rank
        x = np.indices((L,) * 4)[j].ravel()
        ph = np.exp(-2j * pi * x / L)
        return np.repeat(ph, r * 4)


@dataclass
class TwistedDirac:
    field: GaugeField
    rho: tuple[float, float, float, float]
    wilson_r: float
    family: DiracFamily

    @cached_property
    def full(self) -> sp.csr_matrix:
        return self.family.operator(self.rho, "full")

    @cached_property
    def d_plus(self) -> sp.csr_matrix:
        return self.family.operator(self.rho, "+")

    @cached_property
    def d_minus(self) -> sp.csr_matrix:
        return self.family.operator(self.rho, "-")

    def naive_blocks(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Chiral blocks ``(S+ -> S-, S- -> S+)`` of the self-adjoint naive operator ``N``.

        The Wilson term is chirality diagonal, so the off-diagonal blocks of
        ``D`` are those of ``iN``; the second block is the adjoint of the first.
        """
        fam = self.family
        pm = -1j * self.full[fam.minus_cols][:, fam.plus_cols]
        mp = -1j * self.full[fam.plus_cols][:, fam.minus_cols]
        return pm.tocsr(), mp.tocsr()


def build_twisted_dirac(field: GaugeField, rho, wilson_r: float = 1.0, family: DiracFamily | None = None) -> TwistedDirac:
    """Wilson-Dirac operator of ``field`` twisted by the flat U(1) connection ``rho``."""
    rho = tuple(float(v) for v in np.asarray(rho, dtype=float).ravel())
    if len(rho) != 4:
        raise ValueError("rho must have four components")
    if family is None:
        family = DiracFamily(field, wilson_r)
    elif family.field is not field or family.wilson_r != float(wilson_r):
        raise ValueError("family was built for a different field or Wilson parameter")
    return TwistedDirac(field, rho, float(wilson_r), family)


def free_wilson_singular_values(L: int, rho, wilson_r: float = 1.0) -> np.ndarray:
    """Closed-form singular values of either chiral block of the free operator.

    Each momentum ``p_mu = 2 pi (n_mu + rho_mu) / L`` contributes
    ``sqrt(sum sin^2 p + (w sum (1 - cos p))^2)`` twice (two spin components).
    """
    n = np.arange(L)
    p = [2 * pi * (n + float(r)) / L for r in rho]
    P = np.meshgrid(*p, indexing="ij")
    s2 = sum(np.sin(q) ** 2 for q in P)
    W = wilson_r * sum(1 - np.cos(q) for q in P)
    vals = np.sqrt(s2 + W**2).ravel()
    return np.sort(np.repeat(vals, 2))


def naive_dispersion(L: int, rho) -> np.ndarray:
    """``sum_mu sin^2(2 pi (m_mu + rho_mu) / L)`` for every lattice momentum ``m``."""
    n = np.arange(L)
    P = np.meshgrid(*[2 * pi * (n + float(r)) / L for r in rho], indexing="ij")
    return sum(np.sin(q) ** 2 for q in P)

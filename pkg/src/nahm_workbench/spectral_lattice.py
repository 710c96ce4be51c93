"""Integer-lattice spectra of flat-torus Laplace/Dirac powers.

The torus is ``T^n = R^n / (2 pi Z)^n`` with Fourier modes ``exp(i <m, x>)``,
so the scalar Laplacian has eigenvalue ``|m|^2`` on mode ``m``.  A flat
``U(1)`` twist with holonomy ``alpha`` (in units of ``2 pi``) shifts the
spectral lattice to ``Z^n + alpha``.

Shell tables are built by folding one-dimensional tables coordinate by
coordinate.  For the untwisted lattice the squared radii are exact integers
and shells are aggregated with ``np.bincount``; for twisted lattices the
squared radii are floats and shells closer than ``SHELL_TOL`` (relative) are
merged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi, sqrt
from typing import Sequence

import numpy as np

from .dixmier import SpectralMeasure

SUPPORTED_DIMS = (1, 2, 3, 4)
SHELL_TOL = 1e-12
DEFAULT_MEMORY_BUDGET = 50_000_000
_PAIR_CHUNK = 4_000_000


class MemoryBudgetError(ValueError):
    """The requested table would exceed the configured memory budget."""


@dataclass(frozen=True)
class TwistShift:
    """Flat twist ``alpha in [0, 1)^n`` (holonomy per period, units of 2 pi)."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if any(not (0.0 <= a < 1.0) for a in alpha):
            raise ValueError(f"twist components must lie in [0, 1), got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def zero(cls, n: int) -> "TwistShift":
        return cls((0.0,) * n)

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.alpha)

    def reflected(self) -> "TwistShift":
        """The twist ``1 - alpha`` (componentwise, wrapped into [0, 1))."""
        return TwistShift(tuple((1.0 - a) % 1.0 for a in self.alpha))


@dataclass(frozen=True)
class LatticeShellTable:
    """Shells ``{m : |m + alpha|^2 = radius_squared}`` of a closed ball.

    ``radius_squared`` is an int64 array for the untwisted lattice and a
    float64 array otherwise; ``counts`` holds the shell populations.
    """

    n: int
    radius_squared: np.ndarray
    counts: np.ndarray
    r_max: float
    alpha: TwistShift = field(default=None)  # type: ignore[assignment]

    @property
    def entries(self) -> list[tuple]:
        return list(zip(self.radius_squared.tolist(), self.counts.tolist()))

    @property
    def ball_counts(self) -> np.ndarray:
        """Partial sums ``N_{alpha, r}`` at each shell radius."""
        return np.cumsum(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count_within(self, r: float) -> int:
        r2 = _boundary(r)
        k = np.searchsorted(self.radius_squared, r2, side="right")
        return int(self.counts[:k].sum())


def _check_dim(n: int) -> None:
    if n not in SUPPORTED_DIMS:
        raise ValueError(f"dimension must be one of {SUPPORTED_DIMS}, got {n}")


def _boundary(r: float) -> float:
    # closed-ball comparison tolerance at the boundary
    r2 = float(r) * float(r)
    return r2 + SHELL_TOL * max(1.0, r2)


def _as_twist(alpha, n: int) -> TwistShift:
    if alpha is None:
        return TwistShift.zero(n)
    if isinstance(alpha, TwistShift):
        tw = alpha
    else:
        a = np.atleast_1d(np.asarray(alpha, dtype=float))
        if a.size == 1 and n > 1:
            a = np.full(n, float(a[0]))
        tw = TwistShift(tuple(a.tolist()))
    if tw.n != n:
        raise ValueError(f"twist has {tw.n} components, expected {n}")
    return tw


def ball_volume(n: int, r: float) -> float:
    """Volume ``Omega_n r^n / n`` of the radius-``r`` ball in ``R^n``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    return sphere_area(n) / n * r**n


def sphere_area(n: int) -> float:
    """Area ``Omega_n = 2 pi^{n/2} / Gamma(n/2)`` of the unit sphere ``S^{n-1}``."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return 2.0 * pi ** (n / 2) / gamma(n / 2)


def _estimate_entries(n: int, r: float, integer: bool) -> float:
    if integer:
        return r * r + 1.0
    return ball_volume(n, r + sqrt(n))


def _fold_integer(n: int, r2max: int, budget: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(0, int(np.floor(sqrt(r2max))) + 2)
    m = m[m * m <= r2max]
    k1 = (m * m).astype(np.int64)
    c1 = np.where(m == 0, 1, 2).astype(np.int64)
    keys, counts = k1, c1
    for _ in range(n - 1):
        acc = np.zeros(r2max + 1, dtype=np.int64)
        step = max(1, _PAIR_CHUNK // max(1, k1.size))
        for lo in range(0, keys.size, step):
            kk = keys[lo : lo + step, None] + k1[None, :]
            ww = counts[lo : lo + step, None] * c1[None, :]
            mask = kk <= r2max
            acc += np.bincount(kk[mask], weights=ww[mask], minlength=r2max + 1).astype(np.int64)
        nz = np.nonzero(acc)[0]
        keys, counts = nz.astype(np.int64), acc[nz]
    return keys, counts


def _merge_float(keys: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(keys, kind="stable")
    keys, counts = keys[order], counts[order]
    if keys.size == 0:
        return keys, counts
    gaps = np.diff(keys) > SHELL_TOL * np.maximum(1.0, keys[1:])
    starts = np.concatenate(([0], np.nonzero(gaps)[0] + 1))
    return keys[starts], np.add.reduceat(counts, starts)


def _fold_float(alpha: Sequence[float], r: float) -> tuple[np.ndarray, np.ndarray]:
    bound = _boundary(r)

    def one_dim(a):
        m = np.arange(int(np.floor(-a - r)) - 1, int(np.ceil(r - a)) + 2)
        v = (m + a) ** 2
        return _merge_float(v[v <= bound], np.ones(int((v <= bound).sum()), dtype=np.int64))

    keys, counts = one_dim(alpha[0])
    for a in alpha[1:]:
        k1, c1 = one_dim(a)
        if keys.size == 0 or k1.size == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        parts_k, parts_c = [], []
        step = max(1, _PAIR_CHUNK // max(1, k1.size))
        for lo in range(0, keys.size, step):
            kk = keys[lo : lo + step, None] + k1[None, :]
            cc = counts[lo : lo + step, None] * c1[None, :]
            mask = kk <= bound
            parts_k.append(kk[mask])
            parts_c.append(cc[mask])
        keys, counts = _merge_float(np.concatenate(parts_k), np.concatenate(parts_c))
    return keys, counts


def enumerate_shells(
    n: int,
    r_max: float,
    alpha=None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> LatticeShellTable:
    """All shells of ``Z^n + alpha`` with radius at most ``r_max``.

    >>> enumerate_shells(2, 2 ** 0.5).entries
    [(0, 1), (1, 4), (2, 4)]
    """
    _check_dim(n)
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    tw = _as_twist(alpha, n)
    integer = tw.is_zero
    est = _estimate_entries(n, r_max, integer)
    if est > memory_budget:
        raise MemoryBudgetError(
            f"shell table for n={n}, r_max={r_max} needs ~{est:.3g} entries "
            f"(budget {memory_budget})"
        )
    if integer:
        r2max = int(np.floor(_boundary(r_max)))
        keys, counts = _fold_integer(n, r2max, memory_budget)
    else:
        keys, counts = _fold_float(tw.alpha, r_max)
    return LatticeShellTable(n, keys, counts, float(r_max), tw)


def count_ball(n: int, r: float, alpha=None, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> int:
    """``#{m in Z^n : |m + alpha| <= r}``."""
    _check_dim(n)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        tw = _as_twist(alpha, n)
        return int(tw.is_zero)
    return enumerate_shells(n, r, alpha, memory_budget).total


def twisted_spectrum(
    n: int,
    s: float,
    alpha=None,
    cutoff: float = 1.0,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> SpectralMeasure:
    """Spectrum of ``(1 + D_alpha^2)^{-s/2}`` on modes with ``|m + alpha| <= cutoff``.

    The atoms are ``(1 + |m + alpha|^2)^{-s/2}`` with integer multiplicities.
    Every eigenvalue above the truncation level is present, so the measure is
    exact for weights up to its total.
    """
    if not s > 0:
        raise ValueError("order s must be positive")
    table = enumerate_shells(n, cutoff, alpha, memory_budget)
    values = (1.0 + table.radius_squared.astype(float)) ** (-s / 2.0)
    return SpectralMeasure(
        values,
        table.counts.astype(float),
        weight_kind="integer",
        cutoff_radius=float(cutoff),
        truncated=True,
    )


def midpoint_alpha_grid(n: int, points_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes on ``[0, 1)^n`` and their (equal) quadrature weights."""
    g = (np.arange(points_per_axis) + 0.5) / points_per_axis
    nodes = np.stack(np.meshgrid(*([g] * n), indexing="ij"), axis=-1).reshape(-1, n)
    weights = np.full(nodes.shape[0], 1.0 / nodes.shape[0])
    return nodes, weights


def averaged_ball_count(n: int, r: float, points_per_axis: int) -> float:
    """Midpoint-rule average of ``alpha -> count_ball(n, r, alpha)`` over the dual torus."""
    nodes, weights = midpoint_alpha_grid(n, points_per_axis)
    counts = np.array([count_ball(n, r, a) for a in nodes], dtype=float)
    return float(weights @ counts)

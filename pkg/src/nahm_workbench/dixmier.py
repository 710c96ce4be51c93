"""Singular-value functionals and Dixmier-trace estimation.

A :class:`SpectralMeasure` is a finite atomic measure ``sum_i w_i delta_{lambda_i}``
with values sorted in decreasing order.  For an operator it lists the
distinct singular values with their multiplicities; for a family of
operators averaged against a probability measure the weights become real.

The singular-value function ``mu_t`` is piecewise constant in ``t`` and the
truncated trace ``delta_r = int_0^r mu_t dt`` is piecewise linear, so both
are evaluated exactly from cumulative sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MERGE_TOL = 1e-12
TRUST_FACTOR = 0.5


class DixmierConvergenceError(RuntimeError):
    """The ratio ``delta_r / log(1 + r)`` failed to settle on the window."""

    def __init__(self, message: str, estimate: "DixmierEstimate"):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class SpectralMeasure:
    values: np.ndarray
    weights: np.ndarray
    weight_kind: str = "integer"
    cutoff_radius: float | None = None
    truncated: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if v.shape != w.shape:
            raise ValueError("values and weights must have the same length")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("values must be finite and nonnegative")
        if np.any(np.diff(v) > 0):
            raise ValueError("values must be sorted in nonincreasing order")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be finite and positive")
        if self.weight_kind not in ("integer", "real"):
            raise ValueError("weight_kind must be 'integer' or 'real'")
        if self.weight_kind == "integer" and np.any(w != np.round(w)):
            raise ValueError("integer measure has non-integer weights")
        v.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)
        cw = np.cumsum(w)
        cm = np.cumsum(v * w)
        cw.flags.writeable = False
        cm.flags.writeable = False
        object.__setattr__(self, "_cum_weight", cw)
        object.__setattr__(self, "_cum_mass", cm)

    @classmethod
    def empty(cls) -> "SpectralMeasure":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def from_atoms(cls, atoms, weight_kind: str = "integer", **kw) -> "SpectralMeasure":
        """Build from ``(value, weight)`` pairs in any order; equal values merge."""
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        v, w = np.array(atoms, dtype=float).T
        v, w = _merge_sorted(v, w)
        return cls(v, w, weight_kind=weight_kind, **kw)

    @classmethod
    def from_singular_values(cls, s: Sequence[float], **kw) -> "SpectralMeasure":
        """Multiplicity measure of a list of singular values (zeros dropped)."""
        s = np.abs(np.asarray(s, dtype=float).ravel())
        s = s[s > 0]
        v, w = _merge_sorted(s, np.ones_like(s))
        return cls(v, w, weight_kind="integer", **kw)

    def __len__(self) -> int:
        return self.values.size

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.weights.tolist()))

    @property
    def total_weight(self) -> float:
        return float(self._cum_weight[-1]) if len(self) else 0.0

    @property
    def trusted_weight(self) -> float:
        """Largest ``r`` at which ``delta_r`` is trusted (infinite if untruncated)."""
        return TRUST_FACTOR * self.total_weight if self.truncated else np.inf

    def scaled(self, c: float) -> "SpectralMeasure":
        """The measure of ``c A`` for ``c > 0``."""
        if not c > 0:
            raise ValueError("scale must be positive")
        return SpectralMeasure(
            self.values * c, self.weights, self.weight_kind, self.cutoff_radius, self.truncated
        )


def _merge_sorted(v: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    if v.size == 0:
        return v, w
    gaps = -np.diff(v) > MERGE_TOL * np.maximum(1.0, v[:-1])
    starts = np.concatenate(([0], np.nonzero(gaps)[0] + 1))
    return v[starts], np.add.reduceat(w, starts)


def mu(A: SpectralMeasure, t):
    """Singular-value function ``mu_t(A)`` (right-continuous step function)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    idx = np.searchsorted(A._cum_weight, t, side="right")
    vals = np.concatenate((A.values, [0.0]))
    out = vals[idx]
    return out if out.ndim else float(out)


def delta(A: SpectralMeasure, r):
    """Truncated trace ``delta_r(A) = int_0^r mu_t(A) dt``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    if len(A) == 0:
        out = np.zeros_like(r)
        return out if out.ndim else float(out)
    cw = np.concatenate(([0.0], A._cum_weight))
    cm = np.concatenate(([0.0], A._cum_mass))
    vals = np.concatenate((A.values, [0.0]))
    idx = np.searchsorted(A._cum_weight, r, side="right")
    out = cm[idx] + vals[idx] * (r - cw[idx])
    return out if out.ndim else float(out)


def trace_sum(A: SpectralMeasure) -> float:
    """Plain trace ``sum_i w_i lambda_i`` of a finite measure."""
    return float(A._cum_mass[-1]) if len(A) else 0.0


@dataclass(frozen=True)
class NormEstimate:
    value: float
    argmax: float
    lower_bound: bool


def norm_1infty(A: SpectralMeasure) -> NormEstimate:
    """``sup_{t > 0} delta_t / log(1 + t)`` over the available atoms.

    Between consecutive breakpoints ``delta_t`` is affine and the ratio is
    quasi-convex there, so the supremum is attained at a breakpoint.  For a
    truncated measure the result is flagged as a lower bound.
    """
    if len(A) == 0:
        return NormEstimate(0.0, 0.0, A.truncated)
    t = A._cum_weight
    ratio = A._cum_mass / np.log1p(t)
    k = int(np.argmax(ratio))
    return NormEstimate(float(ratio[k]), float(t[k]), A.truncated)


@dataclass(frozen=True)
class DixmierEstimate:
    window: np.ndarray
    ratios: np.ndarray
    extrapolated_limit: float
    slope: float
    oscillation: float
    tolerance: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.extrapolated_limit

    @property
    def window_values(self) -> list[tuple[float, float]]:
        return list(zip(self.window.tolist(), self.ratios.tolist()))


def default_window(A: SpectralMeasure, points: int = 12) -> np.ndarray:
    """Log-spaced window ending at the trusted weight of ``A``."""
    top = A.trusted_weight if np.isfinite(A.trusted_weight) else A.total_weight
    if not top > 16:
        raise ValueError("measure too small for a Dixmier window")
    return np.geomspace(np.sqrt(top), top, points)


def extrapolate_ratio(
    r: Sequence[float],
    partial: Sequence[float],
    tol: float = 1e-2,
    strict: bool = False,
    log_offset: float = 1.0,
) -> DixmierEstimate:
    """Fit ``partial(r) / log(log_offset + r) ~ L + b / log r`` and report ``L``.

    The oscillation is the spread of the fit-corrected ratios
    ``ratio - b / log r`` across the window; the estimate counts as converged
    when that spread is at most ``tol * max(1, |L|)``.
    """
    r = np.asarray(r, dtype=float)
    partial = np.asarray(partial, dtype=float)
    if r.ndim != 1 or r.size < 3 or r.shape != partial.shape:
        raise ValueError("need at least three window points with matching values")
    if np.any(np.diff(r) <= 0) or r[0] <= 1:
        raise ValueError("window must be strictly increasing and start above 1")
    ratios = partial / np.log(log_offset + r)
    x = 1.0 / np.log(r)
    design = np.stack([np.ones_like(x), x], axis=1)
    (limit, slope), *_ = np.linalg.lstsq(design, ratios, rcond=None)
    corrected = ratios - slope * x
    osc = float(corrected.max() - corrected.min())
    scale = max(1.0, abs(limit))
    converged = osc <= tol * scale
    est = DixmierEstimate(
        window=r,
        ratios=ratios,
        extrapolated_limit=float(limit),
        slope=float(slope),
        oscillation=osc,
        tolerance=tol,
        converged=bool(converged),
        diagnostics={"raw_last_ratio": float(ratios[-1]), "raw_spread": float(np.ptp(ratios))},
    )
    if strict and not converged:
        raise DixmierConvergenceError(
            f"ratio oscillation {osc:.3g} exceeds tolerance {tol * scale:.3g}", est
        )
    return est


def _check_window(A: SpectralMeasure, window) -> np.ndarray:
    w = default_window(A) if window is None else np.asarray(window, dtype=float)
    if w.ndim != 1 or w.size < 3:
        raise ValueError("window must have at least three points")
    if w[-1] > A.trusted_weight * (1 + 1e-12):
        raise ValueError(
            f"window reaches r={w[-1]:.6g} beyond trusted weight {A.trusted_weight:.6g}"
        )
    return w


def dixmier_estimate(
    A: SpectralMeasure, window=None, tol: float = 1e-2, strict: bool = False
) -> DixmierEstimate:
    """Estimate ``lim delta_r(A) / log(1 + r)`` by extrapolation in ``1/log r``."""
    w = _check_window(A, window)
    return extrapolate_ratio(w, delta(A, w), tol=tol, strict=strict)


def signed_dixmier(
    A_plus: SpectralMeasure,
    A_minus: SpectralMeasure,
    window=None,
    tol: float = 1e-2,
    strict: bool = False,
) -> DixmierEstimate:
    """Estimate for ``Tr_w(A_+) - Tr_w(A_-)`` of a self-adjoint operator."""
    if len(A_minus) == 0:
        return dixmier_estimate(A_plus, window, tol, strict)
    if window is None:
        trusted = min(A_plus.trusted_weight, A_minus.trusted_weight)
        base = A_plus if A_plus.trusted_weight <= A_minus.trusted_weight else A_minus
        window = default_window(base) if np.isfinite(trusted) else default_window(A_plus)
    wp = _check_window(A_plus, window)
    _check_window(A_minus, window)
    return extrapolate_ratio(wp, delta(A_plus, wp) - delta(A_minus, wp), tol=tol, strict=strict)


def gamma_spectral_measure(
    family: Sequence[SpectralMeasure], quadrature_weights: Sequence[float]
) -> SpectralMeasure:
    """Quadrature average of a family of fibre measures.

    All fibres must share one cutoff so that the merged measure is exact
    below the common truncation level.
    """
    family = list(family)
    q = np.asarray(quadrature_weights, dtype=float)
    if len(family) == 0 or q.shape != (len(family),):
        raise ValueError("need one quadrature weight per fibre")
    if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-12:
        raise ValueError("quadrature weights must be positive and sum to 1")
    cutoffs = {fm.cutoff_radius for fm in family}
    truncs = {fm.truncated for fm in family}
    if len(cutoffs) > 1 or len(truncs) > 1:
        raise ValueError(f"fibres have inconsistent cutoffs {sorted(map(str, cutoffs))}")
    v = np.concatenate([fm.values for fm in family])
    w = np.concatenate([fm.weights * qi for fm, qi in zip(family, q)])
    v, w = _merge_sorted(v, w)
    return SpectralMeasure(
        v, w, weight_kind="real", cutoff_radius=family[0].cutoff_radius, truncated=truncs.pop()
    )

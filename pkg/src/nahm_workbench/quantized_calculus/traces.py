"""Trace-formula checks from mode-ball partial traces.

For a positive operator ``P`` of order ``-n`` and the projection ``Pi_R`` onto
modes with ``|m + alpha| <= R`` the partial traces ``tr(Pi_R P Pi_R)`` grow like
``(Res P / n) log rank(Pi_R)``.  The ratio is extrapolated in
``1 / log rank`` with :func:`nahm_workbench.dixmier.extrapolate_ratio`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dixmier import DixmierEstimate, extrapolate_ratio
from .forms import QuantizedForm, classical_part
from .operators import BandOperator, DhatBand, SignBand, SymbolBand
from .symbols import TorusSymbol, TrigPolynomial, sample_grid, wodzicki_residue, gamma_residue


@dataclass(frozen=True)
class TraceComparison:
    estimate: DixmierEstimate
    residue_over_n: float
    relative_gap: float
    diagnostics: dict


def _ball_chunks(n: int, R: float, alpha=None):
    """Modes with ``|m + alpha| <= R``, yielded in chunks of fixed leading coordinate."""
    a = np.zeros(n) if alpha is None else np.asarray(alpha, dtype=float)
    lo = int(np.floor(-R - a.max())) - 1
    hi = int(np.ceil(R - a.min())) + 1
    g = np.arange(lo, hi + 1)
    if n == 1:
        m = g[:, None].astype(float)
        r2 = (m[:, 0] + a[0]) ** 2
        yield m[r2 <= R * R * (1 + 1e-12)], r2[r2 <= R * R * (1 + 1e-12)]
        return
    rest = np.stack(np.meshgrid(*([g] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1).astype(float)
    rest_r2 = ((rest + a[1:]) ** 2).sum(axis=1)
    bound = R * R * (1 + 1e-12)
    for m0 in g:
        r2 = rest_r2 + (m0 + a[0]) ** 2
        ok = r2 <= bound
        if ok.any():
            m = np.concatenate([np.full((ok.sum(), 1), float(m0)), rest[ok]], axis=1)
            yield m, r2[ok]


def partial_traces(n: int, radii, density, alpha=None, chunk=200_000):
    """``(counts, traces)`` of ``sum_{|m+alpha|<=R} density(m)`` at each radius."""
    radii = np.asarray(radii, dtype=float)
    Rmax = radii.max()
    all_r2, all_val = [], []
    for m, r2 in _ball_chunks(n, Rmax, alpha):
        for lo in range(0, len(m), chunk):
            all_r2.append(r2[lo : lo + chunk])
            all_val.append(density(m[lo : lo + chunk]))
    r2 = np.concatenate(all_r2)
    val = np.concatenate(all_val)
    order = np.argsort(r2, kind="stable")
    r2, cum = r2[order], np.cumsum(val[order])
    idx = np.searchsorted(r2, radii**2 * (1 + 1e-12), side="right")
    counts = idx.astype(float)
    traces = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    return counts, traces


def _extrapolate(counts, traces, tol, strict):
    if np.any(np.diff(counts) <= 0):
        raise ValueError("window radii must give strictly increasing mode counts")
    return extrapolate_ratio(counts, traces, tol=tol, strict=strict)


def connes_check(
    sigma: TorusSymbol,
    radii=None,
    r_max: float = 1000.0,
    points: int = 12,
    twist_grid=None,
    tol: float = 2e-2,
    strict: bool = False,
) -> TraceComparison:
    """Compare the partial-trace Dixmier estimate of ``Op(sigma)`` with ``Res / n``.

    With ``twist_grid = (nodes, weights)`` (or a gamma fibre on the symbol)
    the traces and ranks are averaged over twisted fibres and compared with
    the gamma residue.
    """
    n = sigma.n
    if sigma.order != -n:
        raise ValueError(f"need a symbol of order -{n}")
    if not sigma.is_positive_on_sphere():
        raise ValueError("symbol fibre is not positive; partial traces would not be monotone")
    radii = np.geomspace(np.sqrt(r_max), r_max, points) if radii is None else np.asarray(radii, float)
    if sigma.gamma_fiber is not None:
        nodes, weights, vals = sigma.gamma_fiber.nodes, sigma.gamma_fiber.weights, sigma.gamma_fiber.values
        target = gamma_residue(sigma) / n
    elif twist_grid is not None:
        nodes, weights = twist_grid
        vals = np.ones(len(nodes))
        target = wodzicki_residue(sigma) / n
    else:
        nodes, weights, vals = [None], np.ones(1), np.ones(1)
        target = wodzicki_residue(sigma) / n
    counts = np.zeros(len(radii))
    traces = np.zeros(len(radii))
    for alpha, w, g in zip(nodes, weights, vals):
        band = SymbolBand(sigma, alpha)
        c, t = partial_traces(n, radii, band.diagonal_trace, alpha)
        counts += w * c
        traces += w * np.real(g) * t
    est = _extrapolate(counts, traces, tol, strict)
    gap = abs(est.extrapolated_limit - target) / abs(target)
    return TraceComparison(est, target, gap, {"radii": radii.tolist(), "counts": counts.tolist()})


def form_square_density(theta: QuantizedForm, twist=None):
    band = theta.band(twist)
    return band.column_norms


def classical_energy(theta: QuantizedForm, points: int = 16) -> float:
    """``int_{T^n} |c(Theta)|^2 dx`` by direct quadrature on a uniform grid."""
    c = classical_part(theta)
    x = sample_grid(theta.n, points)
    vals = np.sum(np.abs(c(x)) ** 2, axis=(1, 2))
    return float(vals.mean() * (2 * np.pi) ** theta.n)


def dixmier_of_form_square(
    theta: QuantizedForm,
    radii=None,
    r_max: float = 24.0,
    points: int = 10,
    twist_grid=None,
    tol: float = 5e-2,
    strict: bool = False,
    energy_grid: int | None = 16,
) -> TraceComparison:
    """Dixmier estimate of ``Theta^* Theta`` from the lazy operator's diagonal.

    ``tr(Pi_R Theta^* Theta Pi_R) = sum_{|m| <= R} sum_k |Theta_k(m)|_F^2`` is
    exact on the infinite lattice, so no box truncation enters.  The target is
    ``Res(sigma(Theta)^* sigma(Theta)) / n``.
    """
    if theta.degree != 2 or theta.n != 4:
        raise ValueError("form-square traces are implemented for degree-2 forms on T^4")
    n = theta.n
    radii = np.geomspace(r_max / 6, r_max, points) if radii is None else np.asarray(radii, float)
    sym = theta.symbol
    sq = sym.adjoint() * sym
    target = wodzicki_residue(sq) / n if sq.terms else 0.0
    if theta.is_zero:
        zero = extrapolate_ratio(np.geomspace(10, 1e4, 3), np.zeros(3), tol=tol)
        return TraceComparison(zero, 0.0, 0.0, {"classical_energy": 0.0})
    if twist_grid is None:
        nodes, weights = [None], np.ones(1)
    else:
        nodes, weights = twist_grid
    counts = np.zeros(len(radii))
    traces = np.zeros(len(radii))
    for alpha, w in zip(nodes, weights):
        c, t = partial_traces(n, radii, form_square_density(theta, alpha), alpha, chunk=50_000)
        counts += w * c
        traces += w * t
    est = _extrapolate(counts, traces, tol, strict)
    gap = abs(est.extrapolated_limit - target) / abs(target) if target else abs(est.extrapolated_limit)
    diag = {"radii": radii.tolist(), "counts": counts.tolist()}
    if energy_grid:
        diag["classical_energy"] = classical_energy(theta, energy_grid)
    return TraceComparison(est, target, gap, diag)


def finite_difference_symbol(a: TrigPolynomial, k, direction, t: int = 1000, twist=None) -> np.ndarray:
    """Order ``-1`` symbol coefficient of ``d^a`` at frequency ``k`` from matrix elements.

    At ``m = t v`` the central combination of the elements
    ``<m + k | d^a | m>`` and ``<m | d^a | m - k>`` times ``|m|`` approximates the
    homogeneous symbol with an ``O(t^-2)`` error, removed by Richardson
    extrapolation between ``t`` and ``2t``.
    """
    n = a.n
    k = np.asarray(k, dtype=float)
    v = np.asarray(direction, dtype=float)
    op = DhatBand(a, SignBand(n, twist))

    def central(s):
        m = s * v
        e1 = op.element(m + k, m)
        e2 = op.element(m, m - k)
        return np.linalg.norm(m) * 0.5 * (e1 + e2)

    return (4 * central(2 * t) - central(t)) / 3

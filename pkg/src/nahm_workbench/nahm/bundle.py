"""The kernel bundle over a Picard grid, its Berry connection and curvature."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from math import pi

import numpy as np

from ..gauge_torus import PAIRS, GaugeField, TwoFormField, asd_defect, unitary_log
from .dirac import DiracFamily
from .solvers import GAP_MIN, NoStableKernelError, detect_rank, kernel_frame, lowest_singular, polar_unitary

ZERO_TOL = 1e-9
UNITARITY_MIN = 0.1


class RankJumpError(ValueError):
    """Kernel rank differs between grid points."""

    def __init__(self, index, rho, rank, reference):
        super().__init__(f"kernel rank {rank} at grid point {index} (rho={rho}) differs from {reference}")
        self.index, self.rho, self.rank, self.reference = index, rho, rank, reference


class PlusKernelError(ValueError):
    """``D+`` could not be certified injective at a grid point."""

    def __init__(self, index, rho, values):
        super().__init__(f"D+ has a near-kernel at grid point {index} (rho={rho}); lowest singular values {values}")
        self.index, self.rho, self.values = index, rho, values


class GridTooCoarseError(ValueError):
    """Neighbouring kernel frames are too far from unitarily related."""


@dataclass(frozen=True)
class PicardGrid:
    """A regular grid on the dual torus ``rho in [0,1)^4``.

    Directions with resolution 1 are held at ``base``; the others are sampled
    at ``base + i / res``.
    """

    resolution: tuple[int, int, int, int]
    base: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        res = tuple(int(v) for v in self.resolution)
        if len(res) != 4 or any(v < 1 for v in res):
            raise ValueError("resolution must be four positive integers")
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "base", tuple(float(v) for v in self.base))

    @classmethod
    def full(cls, res: int, base=(0.0, 0.0, 0.0, 0.0)) -> "PicardGrid":
        return cls((res,) * 4, base)

    @classmethod
    def plane(cls, mu: int, nu: int, res: int, base=(0.0, 0.0, 0.0, 0.0)) -> "PicardGrid":
        r = [1, 1, 1, 1]
        r[mu] = r[nu] = res
        return cls(tuple(r), base)

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def active(self) -> tuple:
        return tuple(mu for mu, v in enumerate(self.resolution) if v > 1)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([1.0 / v if v > 1 else 0.0 for v in self.resolution])

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def point(self, index) -> np.ndarray:
        return np.array(self.base) + np.array(index) / np.array(self.resolution)

    def indices(self):
        return itertools.product(*(range(v) for v in self.resolution))

    def parent(self, index):
        """Spanning-tree parent: step back along the last active axis with a nonzero index."""
        for mu in reversed(self.active):
            if index[mu] > 0:
                p = list(index)
                p[mu] -= 1
                return tuple(p)
        return None


@dataclass
class KernelBundle:
    """Aligned orthonormal kernel frames of ``D-`` over a Picard grid.

    ``frames`` has shape ``grid.shape + (dim, q)``; ``lowest`` holds the
    lowest singular values of ``D-`` used for rank detection and
    ``plus_min`` the certified smallest singular value of ``D+``.
    """

    grid: PicardGrid
    field: GaugeField
    wilson_r: float
    q: int
    frames: np.ndarray
    lowest: np.ndarray
    residuals: np.ndarray
    plus_min: np.ndarray
    gap_min: float = GAP_MIN
    iterations: int = 0
    _family: DiracFamily | None = dc_field(default=None, repr=False)

    @property
    def L(self) -> int:
        return self.field.L

    @property
    def rank(self) -> int:
        return self.field.rank

    @property
    def family(self) -> DiracFamily:
        if self._family is None:
            self._family = DiracFamily(self.field, self.wilson_r)
        return self._family

    def frame(self, index) -> np.ndarray:
        return self.frames[tuple(index)]

    @property
    def gap_ratios(self) -> np.ndarray:
        if self.q == 0:
            return np.full(self.grid.shape, np.inf)
        return self.lowest[..., self.q] / self.lowest[..., self.q - 1]


def _row_seed(seed: int, row: int) -> int:
    return int(np.random.SeedSequence([seed, row]).generate_state(1)[0])


def _solve_row(args):
    links, wilson_r, grid, row, q_max, gap_min, seed = args
    family = DiracFamily(GaugeField(links), wilson_r)
    axis = grid.active[0] if grid.active else None
    idxs = [i for i in grid.indices() if axis is None or i[axis] == row]
    rs = _row_seed(seed, row)
    minus_blocks, plus_blocks = {}, {}
    out = {}
    q_row = None
    iters = 0
    for idx in idxs:
        rho = grid.point(idx)
        par = grid.parent(idx)
        X_minus = minus_blocks.get(par)
        X_plus = plus_blocks.get(par)
        Dm = family.operator(rho, "-")
        if q_row is None:
            kf = kernel_frame(Dm, None, gap_min, q_max, X0=None, seed=rs)
            q_row = kf.q
            low = kf.solver
            detected = kf.q
        else:
            k = q_row + 2
            if X_minus is not None and X_minus.shape[1] != k:
                X_minus = X_minus[:, :k]
            low = lowest_singular(Dm, k, X0=X_minus, seed=rs)
            detected = detect_rank(low.values, gap_min)
            if detected is not None and detected == 0 and low.values[0] <= ZERO_TOL:
                detected = None
        iters += low.iterations
        minus_blocks[idx] = low.vectors
        plus = lowest_singular(family.operator(rho, "+"), 2, X0=X_plus, seed=rs + 1)
        iters += plus.iterations
        plus_blocks[idx] = plus.vectors
        plus_rank = detect_rank(plus.values, gap_min)
        plus_ok = plus_rank == 0 and plus.values[0] > ZERO_TOL
        q_here = detected if detected is not None else -1
        out[idx] = (
            low.vectors[:, : max(q_here, 0)].copy(),
            low.values,
            float(low.residuals.max()),
            float(plus.values[0]),
            q_here,
            plus_ok,
            plus.values,
        )
    return out, iters


def _pin(frame: np.ndarray) -> np.ndarray:
    """Fix the unitary gauge of a root frame: the rows of largest norm become positive."""
    q = frame.shape[1]
    if q == 0:
        return frame
    from scipy.linalg import qr

    _, _, piv = qr(frame.T, pivoting=True, mode="economic")
    M = frame[np.sort(piv[:q])]
    return frame @ polar_unitary(M).conj().T


def nahm_bundle(
    field: GaugeField,
    grid: PicardGrid,
    wilson_r: float = 1.0,
    gap_min: float = GAP_MIN,
    q_max: int = 2,
    workers: int = 1,
    seed: int = 0,
) -> KernelBundle:
    """Kernel frames of ``D-`` over ``grid``, certified and gauge aligned.

    Grid rows (slices along the first active axis) are independent chunks
    with their own seeds, so results do not depend on ``workers``.  Within a
    row each solve is warm started from its spanning-tree parent.  Raises
    :class:`PlusKernelError` where ``D+`` is not injective and
    :class:`RankJumpError` where the detected rank changes.
    """
    family = DiracFamily(field, wilson_r)
    axis = grid.active[0] if grid.active else None
    rows = list(range(grid.resolution[axis])) if axis is not None else [0]
    tasks = [(field.links, wilson_r, grid, row, q_max, gap_min, seed) for row in rows]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_row, tasks))
    else:
        results = [_solve_row(t) for t in tasks]
    merged, iters = {}, 0
    for res, it in results:
        merged.update(res)
        iters += it
    order = list(grid.indices())
    ref_idx = order[0]
    q = merged[ref_idx][4]
    if q < 0:
        raise NoStableKernelError(f"no stable kernel rank at grid point {ref_idx} (rho={grid.point(ref_idx)})")
    for idx in order:
        rank, plus_ok, plus_vals = merged[idx][4], merged[idx][5], merged[idx][6]
        if not plus_ok:
            raise PlusKernelError(idx, tuple(grid.point(idx)), plus_vals)
        if rank != q:
            raise RankJumpError(idx, tuple(grid.point(idx)), rank, q)
    dim = family.minus_cols.size
    k = max(len(v[1]) for v in merged.values())
    frames = np.empty(grid.shape + (dim, q), dtype=complex)
    lowest = np.full(grid.shape + (k,), np.nan)
    residuals = np.empty(grid.shape)
    plus_min = np.empty(grid.shape)
    for idx in order:
        fr, vals, res, pm = merged[idx][:4]
        par = grid.parent(idx)
        if q:
            if par is None:
                fr = _pin(fr)
            else:
                fr = fr @ polar_unitary(frames[par].conj().T @ fr).conj().T
        frames[idx] = fr
        lowest[idx][: len(vals)] = vals
        residuals[idx] = res
        plus_min[idx] = pm
    return KernelBundle(grid, field, float(wilson_r), q, frames, lowest, residuals, plus_min, gap_min, iters, family)


@dataclass
class NahmConnection:
    """Berry link variables ``V_mu(i) = P(i)^* P(i + e_mu)`` on the Picard grid.

    ``links[mu]`` has shape ``grid.shape + (q, q)`` and is unitarised by
    polar decomposition; ``overlap_min`` is the smallest singular value seen
    before unitarisation.
    """

    grid: PicardGrid
    q: int
    links: dict
    overlap_min: float


def nahm_connection(bundle: KernelBundle) -> NahmConnection:
    """Discrete Berry connection; links across the period use the harmonic gauge ``u_mu``."""
    if bundle.q == 0:
        raise ValueError("the kernel bundle has rank 0")
    grid, fr = bundle.grid, bundle.frames
    links, smin = {}, np.inf
    for mu in grid.active:
        nxt = np.roll(fr, -1, axis=mu)
        last = [slice(None)] * 4
        last[mu] = -1
        first = [slice(None)] * 4
        first[mu] = 0
        u = bundle.family.harmonic_gauge(mu)
        nxt[tuple(last)] = u[:, None] * fr[tuple(first)]
        V = np.einsum("...ia,...ib->...ab", fr.conj(), nxt)
        s = np.linalg.svd(V, compute_uv=False)
        smin = min(smin, float(s.min()))
        links[mu] = _polar_batch(V)
    if smin < UNITARITY_MIN:
        raise GridTooCoarseError(f"neighbouring frames overlap only {smin:.3g}; refine the Picard grid")
    return NahmConnection(grid, bundle.q, links, smin)


def _polar_batch(V: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(V)
    return u @ vh


@dataclass
class NahmCurvature:
    """Berry curvature on the Picard grid.

    ``field`` stores ``F_{mu nu}`` (anti-Hermitian ``q x q``) at every grid
    point; ``chern`` maps each active plane to the first Chern number of the
    two-dimensional sub-torus through the grid origin and ``chern_raw`` to the
    unrounded value.
    """

    field: TwoFormField
    asd_defect: float
    chern: dict
    chern_raw: dict
    max_angle: float


def _plaquettes(conn: NahmConnection, mu: int, nu: int) -> np.ndarray:
    Vm, Vn = conn.links[mu], conn.links[nu]
    Vn_up = np.roll(Vn, -1, axis=mu)
    Vm_up = np.roll(Vm, -1, axis=nu)
    dag = lambda A: np.conj(np.swapaxes(A, -1, -2))
    return Vm @ Vn_up @ dag(Vm_up) @ dag(Vn)


def nahm_curvature(conn: NahmConnection) -> NahmCurvature:
    """Plaquette logarithms divided by the cell area, plus sub-torus Chern numbers."""
    grid = conn.grid
    comps = np.zeros((4, 4) + grid.shape + (conn.q, conn.q), dtype=complex)
    chern, raw = {}, {}
    max_angle = 0.0
    h = grid.spacing
    for mu, nu in PAIRS:
        if mu not in grid.active or nu not in grid.active:
            continue
        P = _plaquettes(conn, mu, nu)
        logP = unitary_log(P)
        angles = np.angle(np.linalg.det(P))
        max_angle = max(max_angle, float(np.abs(np.linalg.eigvals(logP).imag).max()))
        F = logP / (h[mu] * h[nu])
        comps[mu, nu] = F
        comps[nu, mu] = -F
        sl = tuple(slice(None) if a in (mu, nu) else 0 for a in range(4))
        total = -float(angles[sl].sum()) / (2 * pi)
        raw[(mu, nu)] = total
        chern[(mu, nu)] = int(round(total))
    cell = float(np.prod([h[a] for a in grid.active])) if grid.active else 1.0
    F = TwoFormField(comps, cell)
    return NahmCurvature(F, asd_defect(F), chern, raw, max_angle)


def mean_curvature(curv: NahmCurvature) -> TwoFormField:
    """Grid average of the curvature as a constant two-form."""
    c = curv.field.components
    axes = tuple(range(2, 6))
    return TwoFormField(c.mean(axis=axes, keepdims=True).reshape((4, 4, 1, 1, 1, 1) + c.shape[-2:]), 1.0)


@dataclass
class SliceComposite:
    """Constant curvature assembled from averages over two-dimensional slices."""

    field: TwoFormField
    asd_defect: float
    chern: dict
    slices: dict


def slice_composite_curvature(
    field: GaugeField,
    res: int,
    wilson_r: float = 1.0,
    base=(0.0, 0.0, 0.0, 0.0),
    planes=PAIRS,
    gap_min: float = GAP_MIN,
    seed: int = 0,
    workers: int = 1,
) -> SliceComposite:
    """Assemble ``F_{mu nu}`` plane by plane from ``res x res`` Picard slices through ``base``."""
    comps = None
    chern, slices = {}, {}
    for mu, nu in planes:
        b = nahm_bundle(field, PicardGrid.plane(mu, nu, res, base), wilson_r, gap_min, seed=seed, workers=workers)
        curv = nahm_curvature(nahm_connection(b))
        avg = mean_curvature(curv).components
        if comps is None:
            comps = np.zeros_like(avg)
        comps[mu, nu] = avg[mu, nu]
        comps[nu, mu] = avg[nu, mu]
        chern[(mu, nu)] = curv.chern[(mu, nu)]
        slices[(mu, nu)] = curv
    F = TwoFormField(comps, 1.0)
    return SliceComposite(F, asd_defect(F), chern, slices)


def composite_from_full(curv: NahmCurvature) -> TwoFormField:
    """Plane averages of a full-grid curvature, for comparison with slice composites."""
    return mean_curvature(curv)


@dataclass
class PeriodicityResult:
    """``defect = max |1 - s|`` over singular values of ``P(rho+e_j)^* u_j P(rho)``."""

    direction: int
    defect: float
    per_point: np.ndarray


def periodicity_check(bundle: KernelBundle, j: int, seed: int = 0) -> PeriodicityResult:
    """Compare recomputed frames at ``rho + e_j`` with harmonic-gauge transported ones.

    Checked on the face of grid points with index 0 along ``j``.
    """
    if bundle.q == 0:
        return PeriodicityResult(j, 0.0, np.zeros(0))
    grid = bundle.grid
    u = bundle.family.harmonic_gauge(j)
    face = [i for i in grid.indices() if i[j] == 0]
    per = []
    for idx in face:
        rho = grid.point(idx)
        rho[j] += 1.0
        moved = u[:, None] * bundle.frame(idx)
        kf = kernel_frame(bundle.family.operator(rho, "-"), bundle.q, bundle.gap_min, X0=moved, seed=seed)
        s = np.linalg.svd(kf.frame.conj().T @ moved, compute_uv=False)
        per.append(float(np.abs(1 - s).max()))
    per = np.array(per)
    return PeriodicityResult(j, float(per.max()), per)

"""Named, rerunnable experiments.

Each experiment maps a parsed config to a list of :class:`Measurement` rows
that carry their own pass/fail status against the configured tolerances.
"""

from __future__ import annotations

import itertools
import json
import os
import warnings
from dataclasses import asdict, dataclass, field
from math import pi
from pathlib import Path
from typing import Callable

import numpy as np


class MissingCacheError(FileNotFoundError):
    """A run demanded cached frames that are not present."""


@dataclass
class Measurement:
    """One scalar outcome and its check.

    ``kind`` is ``rel`` / ``abs`` (distance to ``target``), ``le`` / ``ge``
    (bound given by the tolerance), ``lt`` (strictly below ``target``) or
    ``exact`` (equal to ``target``).
    """

    name: str
    value: float
    kind: str
    target: float | None = None
    tolerance: float | None = None

    @property
    def passed(self) -> bool:
        v, t, tol = self.value, self.target, self.tolerance
        if not np.isfinite(v):
            return False
        if self.kind == "rel":
            return abs(v - t) <= tol * abs(t)
        if self.kind == "abs":
            return abs(v - t) <= tol
        if self.kind == "le":
            return v <= tol
        if self.kind == "ge":
            return v >= tol
        if self.kind == "lt":
            return v < t
        if self.kind == "exact":
            return v == t
        raise ValueError(f"unknown check kind {self.kind!r}")

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


@dataclass
class ExperimentSpec:
    name: str
    criterion: int
    description: str
    func: Callable
    tolerances: dict
    randomized: bool = False


REGISTRY: dict[str, ExperimentSpec] = {}


def experiment(name, criterion, description, tolerances, randomized=False):
    def wrap(func):
        REGISTRY[name] = ExperimentSpec(name, criterion, description, func, dict(tolerances), randomized)
        return func

    return wrap


@dataclass
class Context:
    seed: int | None
    workers: int
    cache_dir: Path
    diagnostics: dict = field(default_factory=dict)

    @property
    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def default_cache_dir() -> Path:
    env = os.environ.get("NAHM_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "nahm_workbench"


# --- spectral side -----------------------------------------------------------


@experiment("dixmier_torus", 1, "Dixmier trace of the flat torus Laplacian power", {"relative": 0.02})
def _dixmier_torus(p, tol, ctx):
    from ..dixmier import dixmier_estimate
    from ..spectral_lattice import sphere_area, twisted_spectrum

    n, R = int(p.get("n", 2)), float(p.get("R", 3000))
    s = float(p.get("s", n))
    est = dixmier_estimate(twisted_spectrum(n, s, None, R), tol=float(p.get("fit_tol", 1e-2)))
    ctx.diagnostics.update(converged=est.converged, oscillation=est.oscillation, slope=est.slope)
    target = sphere_area(n) / n
    return [Measurement(f"dixmier_n{n}", est.extrapolated_limit, "rel", target, tol["relative"])]


@experiment(
    "gamma_coincidence",
    2,
    "Gamma-averaged Dixmier trace against the untwisted one, and the averaged ball count",
    {"relative": 0.02, "ball_relative": 0.005},
)
def _gamma_coincidence(p, tol, ctx):
    from ..dixmier import dixmier_estimate, gamma_spectral_measure
    from ..spectral_lattice import averaged_ball_count, ball_volume, midpoint_alpha_grid, twisted_spectrum

    n = 2
    R, grid = float(p.get("R", 300)), int(p.get("grid", 8))
    ref = dixmier_estimate(twisted_spectrum(n, n, None, float(p.get("reference_R", 3000)))).extrapolated_limit
    nodes, w = midpoint_alpha_grid(n, grid)
    G = gamma_spectral_measure([twisted_spectrum(n, n, a, R) for a in nodes], w)
    est = dixmier_estimate(G)
    r, bg = float(p.get("ball_r", 10)), int(p.get("ball_grid", 32))
    ball = averaged_ball_count(n, r, bg)
    ctx.diagnostics.update(reference=ref, gamma_converged=est.converged)
    return [
        Measurement("gamma_dixmier_n2", est.extrapolated_limit, "rel", ref, tol["relative"]),
        Measurement("averaged_ball_count", ball, "rel", ball_volume(n, r), tol["ball_relative"]),
    ]


@experiment("mu_delta_oracle", 3, "delta against exhaustive projection sums, mu step structure", {}, randomized=True)
def _mu_delta_oracle(p, tol, ctx):
    from ..dixmier import SpectralMeasure, delta, mu

    rng = ctx.rng
    trials, max_atoms = int(p.get("trials", 200)), int(p.get("max_atoms", 6))
    worst, bad_mu = 0.0, 0
    for _ in range(trials):
        k = int(rng.integers(1, max_atoms + 1))
        vals = rng.choice(np.arange(1, 50), size=k, replace=False).astype(float)
        wts = rng.integers(1, 4, size=k)
        A = SpectralMeasure.from_atoms(list(zip(vals, wts)))
        expanded = sorted(np.repeat(vals, wts), reverse=True)
        total = len(expanded)
        for j in range(total + 2):
            best = max((sum(c) for c in itertools.combinations(expanded, min(j, total))), default=0.0)
            worst = max(worst, abs(float(delta(A, j)) - best))
        atoms = A.atoms
        cum = np.cumsum([w for _, w in atoms])
        t = np.linspace(0, total + 1, 8 * (total + 1) + 1)
        m = mu(A, t)
        bad_mu += int(np.any(np.diff(m) > 0))
        for i, c in enumerate(cum):
            after = atoms[i + 1][0] if i + 1 < len(atoms) else 0.0
            bad_mu += int(mu(A, c) != after) + int(mu(A, c - 1e-9) != atoms[i][0])
    return [
        Measurement("delta_max_error", worst, "exact", 0.0),
        Measurement("mu_violations", float(bad_mu), "exact", 0.0),
    ]


@experiment("unitary_invariance", 4, "delta_N is unchanged by unitary conjugation", {"absolute": 1e-10}, randomized=True)
def _unitary_invariance(p, tol, ctx):
    from scipy.stats import unitary_group

    from ..dixmier import SpectralMeasure, delta

    rng = ctx.rng
    worst = 0.0
    for _ in range(int(p.get("trials", 100))):
        d = int(rng.integers(2, int(p.get("max_dim", 64)) + 1))
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        A = X @ X.conj().T / d
        U = unitary_group.rvs(d, random_state=rng)
        m1 = SpectralMeasure.from_singular_values(np.linalg.eigvalsh(A))
        m2 = SpectralMeasure.from_singular_values(np.linalg.eigvalsh(U @ A @ U.conj().T))
        N = np.arange(1, d + 1)
        worst = max(worst, float(np.max(np.abs(delta(m1, N) - delta(m2, N)))))
    return [Measurement("delta_unitary_gap", worst, "le", None, tol["absolute"])]


# --- quantized calculus ------------------------------------------------------


@experiment("connes_t2", 5, "Connes trace formula on the two-torus", {"gap": 0.05})
def _connes_t2(p, tol, ctx):
    from ..quantized_calculus import TorusSymbol, TrigPolynomial, connes_check

    r_max = float(p.get("r_max", 1000))
    symbols = {
        "flat": TorusSymbol.scalar(2, -2),
        "cos_x1": TorusSymbol.scalar(2, -2, TrigPolynomial.cos(2, 0) + 1),
        "xi1_squared": TorusSymbol.scalar(2, -2, direction={(0, 0): 1.0, (2, 0): 1.0}),
    }
    out = []
    for name, sym in symbols.items():
        r = connes_check(sym, r_max=r_max)
        ctx.diagnostics[name] = {"estimate": r.estimate.extrapolated_limit, "residue_over_n": r.residue_over_n}
        out.append(Measurement(f"connes_gap_{name}", r.relative_gap, "le", None, tol["gap"]))
    return out


@experiment(
    "quantized_identities",
    6,
    "Exact identities of the quantized differential and its symbol",
    {"identity": 1e-12, "symbol": 1e-10},
    randomized=True,
)
def _quantized_identities(p, tol, ctx):
    from ..quantized_calculus import (
        FourierTensor,
        TrigPolynomial,
        TruncationWarning,
        antisymmetrize,
        build_sign_dirac,
        classical_part,
        dhat,
        finite_difference_symbol,
        multiplication,
        quantized_curvature,
        quantized_d,
        sample_grid,
        wedge,
    )

    rng = ctx.rng

    def interior_gap(A, B, width):
        idx = A.interior(width)
        D = (A.matrix - B.matrix)[idx][:, idx]
        return float(abs(D).max()) if D.nnz else 0.0

    F2 = build_sign_dirac(2, 7)
    dd_worst = leib_worst = 0.0
    for _ in range(int(p.get("leibniz_trials", 10))):
        a = TrigPolynomial.random(2, rng, terms=3, max_freq=2)
        b = TrigPolynomial.random(2, rng, terms=3, max_freq=2)
        dd = quantized_d(dhat(a, F2)).operator
        dd_worst = max(dd_worst, float(abs(dd.matrix).max()) if dd.matrix.nnz else 0.0)
        lhs = quantized_d(multiplication(a * b, F2)).operator
        rhs = wedge(dhat(a, F2), multiplication(b, F2)).operator + wedge(multiplication(a, F2), dhat(b, F2)).operator
        leib_worst = max(leib_worst, interior_gap(lhs, rhs, 4))

    sym_worst = 0.0
    for _ in range(int(p.get("symbol_trials", 20))):
        n = int(rng.choice([2, 4]))
        a = TrigPolynomial.random(n, rng, terms=3, max_freq=2)
        F = build_sign_dirac(n, 3 if n == 4 else 5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            sym = dhat(a, F).symbol
        for k in a.coeffs:
            v = rng.integers(-5, 6, size=n)
            if not v.any():
                v[0] = 1
            fd = finite_difference_symbol(a, k, v)
            sym_worst = max(sym_worst, float(np.max(np.abs(fd - sym.coefficient(k, v / np.linalg.norm(v))))))

    F4 = build_sign_dirac(4, 4)
    ac_worst = 0.0
    ineq_violation = 0.0
    grid = sample_grid(4, int(p.get("grid_points", 16)))
    for _ in range(int(p.get("curvature_trials", 3))):
        a = TrigPolynomial.random(4, rng, terms=2, max_freq=1)
        b = TrigPolynomial.random(4, rng, terms=2, max_freq=1)
        theta = quantized_curvature([(a, b)], F4)
        c = classical_part(theta)
        Ac = antisymmetrize(c)
        dadb = FourierTensor.exterior_derivative(a).wedge(FourierTensor.exterior_derivative(b))
        ac_worst = max(ac_worst, Ac.max_abs_difference(dadb))
        full = np.sum(np.abs(c(grid)) ** 2, axis=(1, 2))
        anti = np.sum(np.abs(Ac(grid)) ** 2, axis=(1, 2))
        ineq_violation = max(ineq_violation, float(np.max(anti - full)))
    return [
        Measurement("dhat_squared", dd_worst, "le", None, tol["identity"]),
        Measurement("leibniz_interior", leib_worst, "le", None, tol["identity"]),
        Measurement("symbol_vs_finite_difference", sym_worst, "le", None, tol["symbol"]),
        Measurement("antisymmetric_curvature", ac_worst, "le", None, tol["identity"]),
        Measurement("norm_inequality_violation", ineq_violation, "le", None, tol["identity"]),
    ]


# --- classical gauge theory --------------------------------------------------


@experiment(
    "instanton_flow",
    7,
    "Constant-flux instanton, action bound and gradient flow",
    {"charge": 1e-10, "action": 0.01, "asd": 1e-10, "flow": 0.005, "force": 1e-6},
    randomized=True,
)
def _instanton_flow(p, tol, ctx):
    from ..gauge_torus import (
        GaugeField,
        asd_defect,
        constant_flux_u1,
        curvature,
        perturb,
        topological_charge,
        u1_action_from_angles,
        ym_action,
        ym_force,
        ym_gradient_flow,
    )

    L = int(p.get("L", 8))
    f = constant_flux_u1(L, {(0, 1): 1, (2, 3): -1})
    rng = ctx.rng
    flow = ym_gradient_flow(perturb(f, float(p.get("perturbation", 0.01)), rng), float(p.get("step", 0.05)), int(p.get("iters", 100)))
    monotone = float(np.all(np.diff(flow.actions) <= 0))
    Lf = int(p.get("force_L", 3))
    theta = 0.3 * rng.standard_normal((4,) + (Lf,) * 4)
    g = ym_force(GaugeField.from_angles(theta))
    h = 1e-5
    fd = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += h
        tm[idx] -= h
        fd[idx] = (u1_action_from_angles(tp) - u1_action_from_angles(tm)) / (2 * h)
    force_err = float(np.max(np.abs(fd - g)) / np.max(np.abs(g)))
    ctx.diagnostics.update(flow_steps=flow.steps, flow_start=flow.actions[0])
    return [
        Measurement("charge", topological_charge(f), "abs", -1.0, tol["charge"]),
        Measurement("action", ym_action(f), "rel", 8 * pi**2, tol["action"]),
        Measurement("asd_defect", asd_defect(curvature(f)), "le", None, tol["asd"]),
        Measurement("flow_final_action", flow.actions[-1], "rel", 8 * pi**2, tol["flow"]),
        Measurement("flow_monotone", monotone, "exact", 1.0),
        Measurement("force_relative_error", force_err, "le", None, tol["force"]),
    ]


# --- Nahm transform ----------------------------------------------------------


def cached_bundle(field_spec: dict, grid, wilson_r: float, ctx: Context, use_cache=True, require_cache=False, seed=0):
    """Kernel bundle for a constant-flux field, through the frame cache."""
    from ..gauge_torus import constant_flux_u1
    from ..harness.config import content_hash
    from ..nahm import GAP_MIN, KernelBundle, nahm_bundle, read_frames, write_frames
    from ..nahm.cache import VERSION

    L = int(field_spec["L"])
    flux = {tuple(int(c) for c in key.split(",")): int(v) for key, v in field_spec["flux"].items()}
    field_ = constant_flux_u1(L, flux)
    key = content_hash(
        {
            "L": L,
            "flux": field_spec["flux"],
            "grid": list(grid.resolution),
            "base": list(grid.base),
            "wilson_r": wilson_r,
            "seed": seed,
            "format": VERSION,
        }
    )
    path = ctx.cache_dir / f"frames-{key[:16]}.bin"
    side = path.with_suffix(".json")
    if use_cache and path.exists() and side.exists():
        c = read_frames(path)
        meta = json.loads(side.read_text())
        return KernelBundle(grid, field_, c.wilson_r, c.q, c.frames, np.array(meta["lowest"]), np.array(meta["residuals"]), np.array(meta["plus_min"]), c.gap_min), True
    if require_cache:
        raise MissingCacheError(f"frame cache {path} not found")
    b = nahm_bundle(field_, grid, wilson_r, GAP_MIN, workers=ctx.workers, seed=seed)
    if use_cache:
        write_frames(path, b)
        side.write_text(
            json.dumps({"lowest": b.lowest.tolist(), "residuals": b.residuals.tolist(), "plus_min": b.plus_min.tolist()})
        )
    return b, False


@experiment(
    "nahm_transform",
    8,
    "Lattice Nahm transform of the constant-flux instanton",
    {"periodicity": 1e-2, "asd_full": 0.15, "gap": 5.0},
    randomized=True,
)
def _nahm_transform(p, tol, ctx):
    from ..nahm import PicardGrid, mean_curvature, nahm_connection, nahm_curvature, periodicity_check
    from ..gauge_torus import asd_defect, TwoFormField

    w = float(p.get("wilson_r", 0.5))
    use_cache = bool(p.get("use_cache", True))
    require = bool(p.get("require_cache", False))
    flux = p.get("flux", {"0,1": 1, "2,3": -1})
    seed = int(ctx.seed or 0)
    out, hits = [], []

    L_slice, res = int(p.get("slice_L", 8)), int(p.get("slice_res", 12))
    b, hit = cached_bundle({"L": L_slice, "flux": flux}, PicardGrid.plane(0, 1, res), w, ctx, use_cache, require, seed)
    hits.append(hit)
    curv = nahm_curvature(nahm_connection(b))
    per = max(periodicity_check(b, j, seed=seed).defect for j in (0, 1))
    out += [
        Measurement("slice_rank", float(b.q), "exact", 1.0),
        Measurement("slice_min_gap_ratio", float(np.min(b.gap_ratios)), "ge", None, tol["gap"]),
        Measurement("slice_abs_chern", float(abs(curv.chern[(0, 1)])), "exact", 1.0),
        Measurement("slice_chern_integrality", abs(curv.chern_raw[(0, 1)] - curv.chern[(0, 1)]), "le", None, 1e-10),
        Measurement("periodicity_defect", per, "le", None, tol["periodicity"]),
    ]
    ctx.diagnostics["slice_chern"] = curv.chern[(0, 1)]

    L_full, full_res = int(p.get("full_L", 6)), int(p.get("full_res", 6))
    b6, hit = cached_bundle({"L": L_full, "flux": flux}, PicardGrid.full(full_res), w, ctx, use_cache, require, seed)
    hits.append(hit)
    c6 = nahm_curvature(nahm_connection(b6))
    out.append(Measurement("asd_defect_full_grid", c6.asd_defect, "le", None, tol["asd_full"]))
    ctx.diagnostics["full_grid_chern"] = {f"{a},{b_}": v for (a, b_), v in c6.chern.items()}

    matched = {}
    for L in (L_full, int(p.get("refined_L", 8))):
        comps = None
        for mu_, nu in itertools.combinations(range(4), 2):
            bs, hit = cached_bundle({"L": L, "flux": flux}, PicardGrid.plane(mu_, nu, full_res), w, ctx, use_cache, require, seed)
            hits.append(hit)
            avg = mean_curvature(nahm_curvature(nahm_connection(bs))).components
            comps = np.zeros_like(avg) if comps is None else comps
            comps[mu_, nu], comps[nu, mu_] = avg[mu_, nu], avg[nu, mu_]
        matched[L] = asd_defect(TwoFormField(comps, 1.0))
    out.append(Measurement(f"asd_defect_slices_L{int(p.get('refined_L', 8))}", matched[int(p.get("refined_L", 8))], "lt", matched[L_full]))
    ctx.diagnostics.update(asd_defect_slices={str(k): v for k, v in matched.items()}, cache_hits=hits)
    return out

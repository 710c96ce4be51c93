"""Lattice gauge fields on the periodic four-torus ``(R / 2 pi Z)^4``.

Sites are ``x in (Z/L)^4`` with lattice spacing ``a = 2 pi / L``; links
``U_mu(x)`` are unitary ``r x r`` matrices stored in an array of shape
``(4, L, L, L, L, r, r)``.  Curvature is the clover average of plaquette
logarithms divided by ``a^2``, an anti-Hermitian two-form.

Orientation: ``e_1234`` is positive, so ``*e_12 = e_34``, ``*e_13 = -e_24``,
``*e_14 = e_23``.  Self-dual basis ``{e12 + e34, e13 - e24, e14 + e23}``,
anti-self-dual basis ``{e12 - e34, e13 + e24, e14 - e23}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import pi

import numpy as np
from scipy.stats import unitary_group

BRANCH_MARGIN = 1e-9
PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


class PlaquetteBranchError(ValueError):
    """A plaquette eigen-angle sits at the branch cut of the logarithm."""


class StepSizeError(ValueError):
    """The first descent step increased the action."""


def _levi_civita() -> np.ndarray:
    eps = np.zeros((4, 4, 4, 4))
    for p in permutations(range(4)):
        inv = sum(1 for i in range(4) for j in range(i + 1, 4) if p[i] > p[j])
        eps[p] = (-1) ** inv
    return eps


EPS = _levi_civita()


def _dag(U):
    return np.conj(np.swapaxes(U, -1, -2))


@dataclass
class GaugeField:
    links: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.links, dtype=complex)
        if U.ndim != 7 or U.shape[0] != 4 or len(set(U.shape[1:5])) != 1 or U.shape[5] != U.shape[6]:
            raise ValueError(f"links must have shape (4, L, L, L, L, r, r), got {U.shape}")
        self.links = U

    @property
    def L(self) -> int:
        return self.links.shape[1]

    @property
    def rank(self) -> int:
        return self.links.shape[-1]

    @property
    def spacing(self) -> float:
        return 2 * pi / self.L

    def unitarity_defect(self) -> float:
        r = self.rank
        return float(np.max(np.abs(_dag(self.links) @ self.links - np.eye(r))))

    def copy(self) -> "GaugeField":
        return GaugeField(self.links.copy())

    @classmethod
    def trivial(cls, L: int, r: int = 1) -> "GaugeField":
        return cls(np.broadcast_to(np.eye(r, dtype=complex), (4, L, L, L, L, r, r)).copy())

    @classmethod
    def from_angles(cls, theta: np.ndarray) -> "GaugeField":
        """U(1) field with ``U_mu(x) = exp(i theta_mu(x))``."""
        return cls(np.exp(1j * np.asarray(theta))[..., None, None])

    def angles(self) -> np.ndarray:
        if self.rank != 1:
            raise ValueError("angles are defined for U(1) fields")
        return np.angle(self.links[..., 0, 0])


def _flux_matrix(flux) -> np.ndarray:
    k = np.zeros((4, 4), dtype=int)
    if isinstance(flux, dict):
        for (m, v), val in flux.items():
            k[m, v] += int(val)
            k[v, m] -= int(val)
    else:
        k = np.asarray(flux)
        if k.shape != (4, 4) or np.any(k != -k.T):
            raise ValueError("flux must be an antisymmetric 4x4 integer matrix")
        if np.any(k != np.round(k)):
            raise ValueError("flux must be integral")
        k = k.astype(int)
    return k


def constant_flux_u1(L: int, flux) -> GaugeField:
    """U(1) field with every ``(mu, nu)`` plaquette angle equal to ``2 pi k_{mu nu} / L^2``.

    ``flux`` is an antisymmetric integer matrix or a dict ``{(mu, nu): k}``
    (0-based directions).  The boundary twist at ``x_mu = L - 1`` makes the
    field a genuine line bundle with Chern numbers ``k_{mu nu}``.
    """
    if L < 2:
        raise ValueError("L must be at least 2")
    k = _flux_matrix(flux)
    if np.any(np.abs(k) >= L * L / 2):
        raise ValueError(f"flux {np.abs(k).max()} aliases on an L={L} lattice")
    x = np.indices((L,) * 4)
    theta = np.zeros((4,) + (L,) * 4)
    for m, v in PAIRS:
        if k[m, v]:
            theta[v] += 2 * pi * k[m, v] * x[m] / L**2
            theta[m] += np.where(x[m] == L - 1, -2 * pi * k[m, v] * x[v] / L, 0.0)
    return GaugeField.from_angles(theta)


def _shift(A, mu, s):
    """``A(x + s e_mu)`` on the lattice axes (1..4 of a link-free array)."""
    return np.roll(A, -s, axis=mu)


def plaquette(field: GaugeField, mu: int, nu: int) -> np.ndarray:
    """``U_mu(x) U_nu(x + mu) U_mu(x + nu)^* U_nu(x)^*``, shape ``(L, L, L, L, r, r)``."""
    U = field.links
    return U[mu] @ _shift(U[nu], mu, 1) @ _dag(_shift(U[mu], nu, 1)) @ _dag(U[nu])


def _clover_leaves(field: GaugeField, mu: int, nu: int):
    U = field.links
    Um, Un = U[mu], U[nu]
    s = _shift
    l1 = Um @ s(Un, mu, 1) @ _dag(s(Um, nu, 1)) @ _dag(Un)
    l2 = Un @ _dag(s(s(Um, nu, 1), mu, -1)) @ _dag(s(Un, mu, -1)) @ s(Um, mu, -1)
    l3 = _dag(s(Um, mu, -1)) @ _dag(s(s(Un, mu, -1), nu, -1)) @ s(s(Um, mu, -1), nu, -1) @ s(Un, nu, -1)
    l4 = _dag(s(Un, nu, -1)) @ s(Um, nu, -1) @ s(s(Un, mu, 1), nu, -1) @ _dag(Um)
    return l1, l2, l3, l4


def unitary_log(U: np.ndarray) -> np.ndarray:
    """Principal logarithm of unitary matrices (anti-Hermitian result)."""
    if U.shape[-1] == 1:
        ang = np.angle(U[..., 0, 0])
        if np.any(np.abs(ang) > pi - BRANCH_MARGIN):
            raise PlaquetteBranchError("plaquette angle at the branch cut; field too rough")
        return (1j * ang)[..., None, None]
    w, V = np.linalg.eig(U)
    ang = np.angle(w)
    if np.any(np.abs(ang) > pi - BRANCH_MARGIN):
        raise PlaquetteBranchError("plaquette eigen-angle at the branch cut; field too rough")
    out = V @ (1j * ang[..., :, None] * np.linalg.inv(V))
    return 0.5 * (out - _dag(out))


@dataclass
class TwoFormField:
    """Anti-Hermitian two-form ``F_{mu nu}`` on a grid of sites.

    ``components`` has shape ``(4, 4, *sites, r, r)``; ``cell_volume`` is the
    four-volume attached to each site for integrals.
    """

    components: np.ndarray
    cell_volume: float = 1.0

    @classmethod
    def from_real(cls, omega, cell_volume: float = 1.0) -> "TwoFormField":
        """Constant U(1) form ``i omega`` at a single site from a real antisymmetric matrix."""
        omega = np.asarray(omega, dtype=float)
        return cls((1j * omega)[:, :, None, None], cell_volume)

    @property
    def site_shape(self) -> tuple:
        return self.components.shape[2:-2]

    def __add__(self, other):
        return TwoFormField(self.components + other.components, self.cell_volume)

    def __sub__(self, other):
        return TwoFormField(self.components - other.components, self.cell_volume)

    def pointwise_norm2(self) -> np.ndarray:
        """``sum_{mu<nu} |F_{mu nu}|_HS^2`` per site."""
        F = self.components
        out = 0
        for m, v in PAIRS:
            out = out + np.sum(np.abs(F[m, v]) ** 2, axis=(-2, -1))
        return out

    def norm2(self) -> float:
        """``int sum_{mu<nu} |F_{mu nu}|^2``."""
        return float(np.sum(self.pointwise_norm2()) * self.cell_volume)

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))


def basis_form(pairs_coeffs) -> np.ndarray:
    """Real antisymmetric matrix ``sum c e_{mu nu}`` from ``{(mu, nu): c}`` (0-based)."""
    w = np.zeros((4, 4))
    for (m, v), c in pairs_coeffs.items():
        w[m, v] += c
        w[v, m] -= c
    return w


def curvature(field: GaugeField) -> TwoFormField:
    """Clover curvature ``F_{mu nu} = (1 / 4 a^2) sum_leaves log(leaf)``."""
    L, r = field.L, field.rank
    a = field.spacing
    comps = np.zeros((4, 4, L, L, L, L, r, r), dtype=complex)
    for m, v in PAIRS:
        F = sum(unitary_log(leaf) for leaf in _clover_leaves(field, m, v)) / (4 * a * a)
        comps[m, v] = F
        comps[v, m] = -F
    return TwoFormField(comps, a**4)


def hodge_star(F: TwoFormField) -> TwoFormField:
    """``(*F)_{mu nu} = (1/2) eps_{mu nu rho sigma} F_{rho sigma}``."""
    return TwoFormField(0.5 * np.tensordot(EPS, F.components, axes=([2, 3], [0, 1])), F.cell_volume)


def hodge_split(F: TwoFormField) -> tuple[TwoFormField, TwoFormField]:
    """Self-dual and anti-self-dual parts ``(F+, F-)``."""
    S = hodge_star(F)
    return (
        TwoFormField(0.5 * (F.components + S.components), F.cell_volume),
        TwoFormField(0.5 * (F.components - S.components), F.cell_volume),
    )


def asd_defect(F: TwoFormField) -> float:
    """``|F+| / |F|`` (zero for ``F = 0``)."""
    total = F.norm()
    if total == 0:
        return 0.0
    return hodge_split(F)[0].norm() / total


def ym_action(field: GaugeField) -> float:
    """``int sum_{mu<nu} |F_{mu nu}|_HS^2 dvol`` with the clover curvature."""
    return curvature(field).norm2()


def charge_density(F: TwoFormField) -> np.ndarray:
    """``(1/8 pi^2) tr(Fh ^ Fh)`` per site for the Hermitian curvature ``Fh = iF``."""
    C = F.components
    out = 0
    for m, v in PAIRS:
        for p, s in PAIRS:
            e = EPS[m, v, p, s]
            if e:
                out = out + e * np.trace(C[m, v] @ C[p, s], axis1=-2, axis2=-1)
    # sum over ordered pairs covers a quarter of eps F F; tr(Fh Fh) = -tr(F F)
    return -np.real(out) / (8 * pi * pi)


def topological_charge(field: GaugeField) -> float:
    F = curvature(field)
    return float(np.sum(charge_density(F)) * F.cell_volume)


def field_charge(F: TwoFormField) -> float:
    return float(np.sum(charge_density(F)) * F.cell_volume)


SD_BASIS = (
    basis_form({(0, 1): 1, (2, 3): 1}),
    basis_form({(0, 2): 1, (1, 3): -1}),
    basis_form({(0, 3): 1, (1, 2): 1}),
)
ASD_BASIS = (
    basis_form({(0, 1): 1, (2, 3): -1}),
    basis_form({(0, 2): 1, (1, 3): 1}),
    basis_form({(0, 3): 1, (1, 2): -1}),
)


@dataclass(frozen=True)
class ComplexStructureJ:
    """Orthogonal complex structure compatible with the orientation, from a point of ``S^2``."""

    direction: tuple[float, float, float]

    def __post_init__(self):
        c = np.asarray(self.direction, dtype=float)
        if c.shape != (3,) or abs(np.linalg.norm(c) - 1) > 1e-12:
            raise ValueError("direction must be a unit 3-vector")
        object.__setattr__(self, "direction", tuple(c.tolist()))

    @classmethod
    def standard(cls) -> "ComplexStructureJ":
        return cls((1.0, 0.0, 0.0))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "ComplexStructureJ":
        v = rng.normal(size=3)
        return cls(tuple(v / np.linalg.norm(v)))

    def kahler_form(self) -> np.ndarray:
        """``omega = sum_i c_i (self-dual basis)_i``; as a matrix it equals ``J``."""
        return sum(c * b for c, b in zip(self.direction, SD_BASIS))

    @property
    def matrix(self) -> np.ndarray:
        return self.kahler_form()


def is_11_and_primitive(F: TwoFormField, J: ComplexStructureJ) -> tuple[float, float]:
    """RMS norms of the ``(0,2)`` projection of ``F`` and of ``<F, omega_J>``."""
    P = 0.5 * (np.eye(4) + 1j * J.matrix)
    C = F.components
    F02 = np.einsum("ma,nb,ab...->mn...", P, P, C)
    sites = max(1, int(np.prod(F.site_shape)))
    d02 = np.sqrt(TwoFormField(F02).pointwise_norm2().sum() / sites)
    w = J.kahler_form()
    inner = sum(w[m, v] * C[m, v] for m, v in PAIRS)
    d_om = np.sqrt(np.sum(np.abs(inner) ** 2) / sites)
    return float(d02), float(d_om)


def random_gauge(L: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random gauge transformation ``g(x)``, shape ``(L, L, L, L, r, r)``."""
    if r == 1:
        return np.exp(2j * pi * rng.random((L,) * 4))[..., None, None]
    g = unitary_group.rvs(r, size=L**4, random_state=rng)
    return np.asarray(g).reshape((L,) * 4 + (r, r))


def gauge_transform(field: GaugeField, g: np.ndarray) -> GaugeField:
    """``U_mu(x) -> g(x) U_mu(x) g(x + mu)^*``."""
    U = field.links
    return GaugeField(np.stack([g @ U[m] @ _dag(_shift(g, m, 1)) for m in range(4)]))


def perturb(field: GaugeField, amplitude: float, rng: np.random.Generator) -> GaugeField:
    """Multiply every link by ``exp(i amplitude H)`` with Gaussian Hermitian ``H``."""
    r = field.rank
    if r == 1:
        return GaugeField(field.links * np.exp(1j * amplitude * rng.normal(size=field.links.shape[:5]))[..., None, None])
    X = rng.normal(size=field.links.shape) + 1j * rng.normal(size=field.links.shape)
    H = 0.5 * (X + _dag(X))
    w, V = np.linalg.eigh(H)
    E = V @ (np.exp(1j * amplitude * w)[..., None] * _dag(V))
    return GaugeField(E @ field.links)


def _clover_angles_u1(theta: np.ndarray) -> dict:
    out = {}
    for m, v in PAIRS:
        P = theta[m] + _shift(theta[v], m, 1) - _shift(theta[m], v, 1) - theta[v]
        P = np.angle(np.exp(1j * P))
        if np.any(np.abs(P) > pi - BRANCH_MARGIN):
            raise PlaquetteBranchError("plaquette angle at the branch cut; field too rough")
        C = 0.25 * (P + _shift(P, m, -1) + _shift(_shift(P, m, -1), v, -1) + _shift(P, v, -1))
        out[(m, v)] = (P, C)
    return out


def u1_action_from_angles(theta: np.ndarray) -> float:
    return float(sum(np.sum(C * C) for _, C in _clover_angles_u1(theta).values()))


def ym_force(field: GaugeField) -> np.ndarray:
    """Gradient of ``ym_action`` with respect to U(1) link angles."""
    if field.rank != 1:
        raise NotImplementedError("the analytic force is implemented for U(1) fields")
    theta = field.angles()
    grad = np.zeros_like(theta)
    for (m, v), (_, C) in _clover_angles_u1(theta).items():
        G = 0.5 * (C + _shift(C, m, 1) + _shift(C, v, 1) + _shift(_shift(C, m, 1), v, 1))
        grad[m] += G - _shift(G, v, -1)
        grad[v] += _shift(G, m, -1) - G
    return grad


@dataclass
class FlowResult:
    field: GaugeField
    actions: list[float]
    steps: list[float]


def ym_gradient_flow(
    field: GaugeField, step: float = 0.05, iters: int = 200, min_step: float = 1e-12
) -> FlowResult:
    """Steepest descent on U(1) link angles with backtracking halving.

    The first step must not increase the action; later steps halve until the
    action does not increase, so the returned trace is nonincreasing.
    """
    theta = field.angles()
    S = u1_action_from_angles(theta)
    actions, steps = [S], []
    h = step
    for it in range(iters):
        g = ym_force(GaugeField.from_angles(theta))
        trial = theta - h * g
        S_new = u1_action_from_angles(trial)
        if it == 0 and S_new > S * (1 + 1e-14) + 1e-14:
            raise StepSizeError(f"step {step} raises the action from {S:.12g} to {S_new:.12g}")
        while S_new > S:
            h *= 0.5
            if h < min_step:
                S_new, trial = S, theta
                break
            trial = theta - h * g
            S_new = u1_action_from_angles(trial)
        theta, S = trial, S_new
        actions.append(S)
        steps.append(h)
    return FlowResult(GaugeField.from_angles(theta), actions, steps)

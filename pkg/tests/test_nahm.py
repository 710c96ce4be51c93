import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nahm_workbench.gauge_torus import GaugeField, constant_flux_u1, gauge_transform, random_gauge
from nahm_workbench.nahm import (
    CacheChecksumError,
    CacheFormatError,
    CacheVersionError,
    DiracFamily,
    GridTooCoarseError,
    NoStableKernelError,
    PicardGrid,
    PlusKernelError,
    RankJumpError,
    build_twisted_dirac,
    free_wilson_singular_values,
    kernel_frame,
    kernel_projector,
    lowest_singular,
    min_singular,
    naive_dispersion,
    nahm_bundle,
    nahm_connection,
    nahm_curvature,
    periodicity_check,
    read_frames,
    write_frames,
)
from nahm_workbench.nahm import cache as cache_mod

W = 0.5
ASD = {(0, 1): 1, (2, 3): -1}


@pytest.fixture(scope="module")
def flux6():
    return constant_flux_u1(6, ASD)


@pytest.fixture(scope="module")
def flux8():
    return constant_flux_u1(8, ASD)


@pytest.fixture(scope="module")
def slice6(flux6):
    return nahm_bundle(flux6, PicardGrid.plane(0, 1, 4, (0.1, 0.2, 0.3, 0.4)), W)


# --- operator assembly -------------------------------------------------------


@pytest.mark.parametrize("w", [0.0, 2.5, -3.0])
def test_invalid_wilson_parameter(w):
    with pytest.raises(ValueError):
        build_twisted_dirac(GaugeField.trivial(2), (0, 0, 0, 0), w)


def test_free_zero_mode_at_origin():
    D = build_twisted_dirac(GaugeField.trivial(4), (0, 0, 0, 0), 1.0)
    assert min_singular(D.d_plus).value == pytest.approx(0.0, abs=1e-8)
    assert min_singular(D.d_minus).value == pytest.approx(0.0, abs=1e-8)


def test_free_min_singular_half_twist():
    D = build_twisted_dirac(GaugeField.trivial(4), (0.5, 0, 0, 0), 1.0)
    c = np.cos(np.pi / 4)
    expected = np.sqrt(np.sin(np.pi / 4) ** 2 + (1 - c) ** 2)
    assert min_singular(D.d_plus).value == pytest.approx(expected, abs=1e-10)
    assert expected == pytest.approx(0.7654, abs=1e-4)


def test_free_min_singular_corner_above_half():
    D = build_twisted_dirac(GaugeField.trivial(4), (0.5,) * 4, 1.0)
    dense = np.linalg.svd(D.d_minus.toarray(), compute_uv=False).min()
    assert min_singular(D.d_minus).value == pytest.approx(dense, abs=1e-10)
    assert dense > 0.5


@pytest.mark.parametrize("rho", [(0, 0, 0, 0), (0.5, 0, 0, 0), (0.13, 0.71, 0.4, 0.95)])
@pytest.mark.parametrize("block", ["+", "-"])
def test_free_spectrum_matches_dispersion_exhaustively(rho, block):
    fam = DiracFamily(GaugeField.trivial(4), 1.0)
    s = np.linalg.svd(fam.operator(rho, block).toarray(), compute_uv=False)
    np.testing.assert_allclose(np.sort(s), free_wilson_singular_values(4, rho, 1.0), atol=1e-10)


def test_naive_part_squares_to_dispersion():
    rho = (0.2, 0.0, 0.7, 0.35)
    D = build_twisted_dirac(GaugeField.trivial(4), rho, 1.0)
    pm, _ = D.naive_blocks()
    ev = np.linalg.eigvalsh((pm.conj().T @ pm).toarray())
    expected = np.sort(np.repeat(naive_dispersion(4, rho).ravel(), 2))
    np.testing.assert_allclose(np.sort(ev), expected, atol=1e-10)


def test_chiral_naive_blocks_are_adjoint(flux6):
    D = build_twisted_dirac(flux6, (0.3, 0.1, 0.0, 0.2), W)
    pm, mp = D.naive_blocks()
    assert abs(pm.conj().T - mp).max() <= 1e-12


def test_free_block_diagonal_in_fourier_basis():
    L, rho = 3, (0.1, 0.2, 0.3, 0.4)
    D = build_twisted_dirac(GaugeField.trivial(L), rho, 1.0).full.toarray()
    x = np.indices((L,) * 4).reshape(4, -1).T
    p = np.indices((L,) * 4).reshape(4, -1).T
    F = np.exp(2j * np.pi * x @ p.T / L) / L**2
    Fk = np.kron(F, np.eye(4))
    Dk = Fk.conj().T @ D @ Fk
    mask = np.kron(np.eye(L**4), np.ones((4, 4))) == 0
    assert np.abs(Dk[mask]).max() <= 1e-12


def test_gauge_covariance_of_singular_values():
    rng = np.random.default_rng(3)
    f = constant_flux_u1(4, ASD)
    g = random_gauge(4, 1, rng)
    rho = (0.3, 0.6, 0.1, 0.8)
    for block in ["+", "-"]:
        a = np.linalg.svd(DiracFamily(f, W).operator(rho, block).toarray(), compute_uv=False)
        b = np.linalg.svd(DiracFamily(gauge_transform(f, g), W).operator(rho, block).toarray(), compute_uv=False)
        np.testing.assert_allclose(np.sort(a), np.sort(b), atol=1e-10)


def test_harmonic_gauge_conjugation():
    fam = DiracFamily(constant_flux_u1(3, ASD), W)
    rho = np.array([0.2, 0.4, 0.6, 0.8])
    for j in range(4):
        u = fam.harmonic_gauge_full(j)
        e = np.eye(4)[j]
        lhs = fam.operator(rho + e, "full")
        rhs = (u[:, None] * fam.operator(rho, "full").toarray()) * u.conj()[None, :]
        assert np.abs(lhs.toarray() - rhs).max() <= 1e-12


# --- solvers ---------------------------------------------------------------


def test_iterative_matches_dense_and_certifies(flux6):
    fam = DiracFamily(flux6, W)
    Dp = fam.operator((0.3, 0.1, 0.0, 0.2), "+")
    low = lowest_singular(Dp, 2)
    assert low.iterations > 0
    assert low.residual <= 1e-8
    ev = np.linalg.eigvalsh((Dp.conj().T @ Dp).toarray())
    np.testing.assert_allclose(low.values, np.sqrt(ev[:2]), atol=1e-8)


def test_plus_block_injective_for_flux(flux6):
    fam = DiracFamily(flux6, W)
    rho = (0.3, 0.1, 0.0, 0.2)
    kf = kernel_frame(fam.operator(rho, "-"), 1)
    plus = min_singular(fam.operator(rho, "+")).value
    assert plus >= 5 * kf.kernel_singular_values.max()


def test_kernel_rank_flux_l6(flux6):
    kf = kernel_frame(DiracFamily(flux6, W).operator((0, 0, 0, 0), "-"))
    assert kf.q == 1
    assert kf.gap_ratio >= 5
    assert np.abs(kf.frame.conj().T @ kf.frame - np.eye(1)).max() <= 1e-10


def test_kernel_rank_flux_l8(flux8):
    kf = kernel_frame(DiracFamily(flux8, W).operator((0, 0, 0, 0), "-"))
    assert kf.q == 1
    assert kf.gap_ratio >= 5


@pytest.mark.xfail(strict=True, reason="Wilson term lifts the continuum zero mode well above 1e-3 at L=8")
def test_kernel_residual_flux_l8(flux8):
    kf = kernel_frame(DiracFamily(flux8, W).operator((0, 0, 0, 0), "-"), 1)
    assert kf.kernel_singular_values.max() <= 1e-3


def test_kernel_free_generic_twist_is_empty():
    kf = kernel_frame(DiracFamily(GaugeField.trivial(4), 1.0).operator((0.5, 0.25, 0.5, 0.5), "-"))
    assert kf.q == 0
    assert kf.frame.shape == (512, 0)


def test_kernel_gap_violation_raises():
    fam = DiracFamily(constant_flux_u1(4, ASD), W)
    with pytest.raises(NoStableKernelError, match="no stable kernel rank"):
        kernel_frame(fam.operator((0, 0, 0, 0), "-"), 1)


@pytest.mark.slow
def test_kernel_rank_double_flux():
    f = constant_flux_u1(8, {(0, 1): 2, (2, 3): -2})
    kf = kernel_frame(DiracFamily(f, W).operator((0, 0, 0, 0), "-"), q_max=5)
    assert kf.q == 4


def test_projector_identities_exact_kernel():
    Dm = DiracFamily(GaugeField.trivial(4), 1.0).operator((0, 0, 0, 0), "-")
    kf = kernel_frame(Dm)
    assert kf.q == 2
    P = kernel_projector(Dm, kf)
    assert np.abs(P @ P - P).max() <= 1e-8
    assert np.abs(P - P.conj().T).max() <= 1e-12
    assert np.abs(Dm @ P).max() <= 1e-6
    assert np.trace(P).real == pytest.approx(kf.q, abs=1e-4)
    assert np.abs(P @ kf.frame - kf.frame).max() <= 1e-8


def test_projector_near_kernel_flux(flux6):
    Dm = DiracFamily(flux6, W).operator((0.3, 0.1, 0.0, 0.2), "-")
    kf = kernel_frame(Dm, 1)
    P = kernel_projector(Dm, kf)
    x = np.random.default_rng(0).standard_normal(P.shape[0]) + 0j
    y = P @ x
    assert np.linalg.norm(P @ y - y) <= 1e-8 * np.linalg.norm(y)
    ref = kf.frame @ (kf.frame.conj().T @ x)
    assert np.linalg.norm(y - ref) <= 1e-6 * np.linalg.norm(x)
    # the numerical kernel is only approximate: D-P is bounded by the kernel singular value
    assert np.linalg.norm(Dm @ y) <= 1.01 * kf.kernel_singular_values.max() * np.linalg.norm(y)


def test_dense_projector_with_explicit_cutoff():
    Dm = DiracFamily(constant_flux_u1(4, ASD), W).operator((0.3, 0.1, 0.0, 0.2), "-")
    P = kernel_projector(Dm, cutoff=0.5)
    assert np.trace(P).real == pytest.approx(1.0, abs=1e-4)
    assert np.abs(P @ P - P).max() <= 1e-8


# --- bundle ------------------------------------------------------------------


def test_picard_grid_validation():
    with pytest.raises(ValueError):
        PicardGrid((0, 1, 1, 1))
    g = PicardGrid.plane(1, 3, 5)
    assert g.active == (1, 3)
    assert g.parent((0, 2, 0, 0)) == (0, 1, 0, 0)
    assert g.parent((0, 2, 0, 3)) == (0, 2, 0, 2)
    assert g.parent((0, 0, 0, 0)) is None


def test_bundle_rank_and_frames(slice6):
    b = slice6
    assert b.q == 1
    assert np.all(b.gap_ratios >= 5)
    assert np.all(b.residuals <= 1e-8)
    G = np.einsum("...ia,...ib->...ab", b.frames.conj(), b.frames)
    assert np.abs(G - 1).max() <= 1e-10


def test_bundle_deterministic_across_workers(flux6):
    g = PicardGrid.plane(0, 2, 3, (0.1, 0.2, 0.3, 0.4))
    a = nahm_bundle(flux6, g, W, workers=1, seed=7)
    b = nahm_bundle(flux6, g, W, workers=2, seed=7)
    assert np.array_equal(a.frames, b.frames)


def test_free_bundle_error_at_origin():
    grid = PicardGrid.plane(0, 1, 3)
    with pytest.raises((PlusKernelError, RankJumpError)) as exc:
        nahm_bundle(GaugeField.trivial(4), grid, 1.0)
    assert exc.value.index == (0, 0, 0, 0)


def test_free_bundle_rank_zero_off_locus():
    b = nahm_bundle(GaugeField.trivial(4), PicardGrid.plane(0, 1, 3, (0.5, 0.5, 0.5, 0.5)), 1.0)
    assert b.q == 0
    with pytest.raises(ValueError, match="rank 0"):
        nahm_connection(b)
    assert periodicity_check(b, 0).defect == 0.0


def test_connection_curvature_and_chern(slice6):
    conn = nahm_connection(slice6)
    for V in conn.links.values():
        VV = np.conj(np.swapaxes(V, -1, -2)) @ V
        assert np.abs(VV - 1).max() <= 1e-12
    curv = nahm_curvature(conn)
    assert abs(curv.chern[(0, 1)]) == 1
    assert curv.chern_raw[(0, 1)] == pytest.approx(curv.chern[(0, 1)], abs=1e-10)
    F = curv.field.components
    assert np.abs(F + np.swapaxes(F, 0, 1)).max() == 0
    assert np.abs(F + np.conj(np.swapaxes(F, -1, -2))).max() <= 1e-12


def test_grid_too_coarse(slice6):
    rng = np.random.default_rng(0)
    b = slice6
    fake = type(b)(**{**b.__dict__})
    fr = rng.standard_normal(b.frames.shape) + 1j * rng.standard_normal(b.frames.shape)
    fake.frames = fr / np.linalg.norm(fr, axis=-2, keepdims=True)
    with pytest.raises(GridTooCoarseError):
        nahm_connection(fake)


def test_periodicity_flux_l8(flux8):
    b = nahm_bundle(flux8, PicardGrid.plane(0, 1, 3, (0.1, 0.2, 0.3, 0.4)), W)
    for j in (0, 1):
        assert periodicity_check(b, j).defect <= 1e-2


# --- cache -------------------------------------------------------------------


def test_cache_roundtrip(tmp_path, slice6):
    p = write_frames(tmp_path / "f.bin", slice6)
    c = read_frames(p)
    assert np.array_equal(c.frames, slice6.frames)
    assert (c.L, c.rank, c.q, c.grid) == (6, 1, 1, slice6.grid.resolution)
    assert c.base == slice6.grid.base and c.wilson_r == W


def test_cache_corruption(tmp_path, slice6):
    p = write_frames(tmp_path / "f.bin", slice6)
    data = bytearray(p.read_bytes())
    data[cache_mod._HEADER.size + 5] ^= 1
    p.write_bytes(bytes(data))
    with pytest.raises(CacheChecksumError):
        read_frames(p)
    p.write_bytes(bytes(data[:-40]))
    with pytest.raises(CacheChecksumError):
        read_frames(p)
    p.write_bytes(b"junk" * 40)
    with pytest.raises(CacheFormatError):
        read_frames(p)


def test_cache_version(tmp_path, slice6, monkeypatch):
    p = tmp_path / "f.bin"
    monkeypatch.setattr(cache_mod, "VERSION", 99)
    write_frames(p, slice6)
    monkeypatch.undo()
    with pytest.raises(CacheVersionError):
        read_frames(p)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=4, max_size=4))
def test_free_dispersion_property(rho):
    s = np.linalg.svd(DiracFamily(GaugeField.trivial(2), 1.0).operator(rho, "-").toarray(), compute_uv=False)
    np.testing.assert_allclose(np.sort(s), free_wilson_singular_values(2, rho, 1.0), atol=1e-10)

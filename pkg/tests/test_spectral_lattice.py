import itertools
from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nahm_workbench.spectral_lattice import (
    MemoryBudgetError,
    TwistShift,
    averaged_ball_count,
    ball_volume,
    count_ball,
    enumerate_shells,
    sphere_area,
    twisted_spectrum,
)


def brute_count(n, r, alpha):
    span = int(np.ceil(r)) + 2
    pts = np.array(list(itertools.product(range(-span, span + 1), repeat=n)), dtype=float)
    d2 = ((pts + np.asarray(alpha)) ** 2).sum(axis=1)
    return int((d2 <= r * r + 1e-12 * max(1, r * r)).sum())


def test_small_tables():
    assert enumerate_shells(2, 2 ** 0.5).entries == [(0, 1), (1, 4), (2, 4)]
    assert enumerate_shells(1, 3).entries == [(0, 1), (1, 2), (4, 2), (9, 2)]


def test_n4_total_against_brute_force():
    assert enumerate_shells(4, 2).total == brute_count(4, 2, [0, 0, 0, 0])


def test_count_ball_examples():
    assert count_ball(2, 1, TwistShift.zero(2)) == 5
    assert count_ball(2, 1.5) == 9
    assert count_ball(1, 2.3, TwistShift((0.5,))) == 4


def test_rejections():
    with pytest.raises(ValueError):
        enumerate_shells(5, 2)
    with pytest.raises(ValueError):
        enumerate_shells(2, 0)
    with pytest.raises(MemoryBudgetError):
        enumerate_shells(4, 1e5)
    with pytest.raises(ValueError):
        TwistShift((1.0,))


def test_twisted_spectrum_examples():
    A = twisted_spectrum(1, 1, 0, 1)
    assert np.allclose(A.values, [1, 2 ** -0.5]) and A.weights.tolist() == [1, 2]
    B = twisted_spectrum(1, 1, 0.5, 1.6)
    assert np.allclose(B.values, [1.25 ** -0.5, 3.25 ** -0.5]) and B.weights.tolist() == [2, 2]
    C = twisted_spectrum(2, 2, 0, 50)
    assert C.values[0] == 1.0 and C.weights[0] == 1
    assert C.total_weight == count_ball(2, 50)
    assert C.cutoff_radius == 50


def test_volume_formulas():
    assert sphere_area(2) == pytest.approx(2 * pi)
    assert ball_volume(2, 1) == pytest.approx(pi)
    assert sphere_area(4) == pytest.approx(2 * pi**2)
    assert ball_volume(4, 1) == pytest.approx(pi**2 / 2)
    assert ball_volume(3, 1) == pytest.approx(4 * pi / 3)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_partial_sums_are_ball_counts(n):
    table = enumerate_shells(n, 10)
    radii = np.sqrt(table.radius_squared.astype(float))
    for r, c in zip(radii[::7], table.ball_counts[::7]):
        assert c == count_ball(n, r) == brute_count(n, r, [0] * n)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 3),
    r=st.floats(0.1, 6),
    alpha=st.lists(st.floats(0, 0.999), min_size=3, max_size=3),
)
def test_twisted_count_matches_brute_force_and_symmetries(n, r, alpha):
    a = alpha[:n]
    c = count_ball(n, r, a)
    assert c == brute_count(n, r, a)
    refl = TwistShift(tuple(a)).reflected()
    assert count_ball(n, r, refl) == c
    assert count_ball(n, r, a[::-1]) == c


def test_alpha_average_is_ball_volume():
    assert averaged_ball_count(2, 10, 32) == pytest.approx(pi * 100, rel=5e-3)
    coarse = abs(averaged_ball_count(2, 4.3, 4) - ball_volume(2, 4.3))
    fine = abs(averaged_ball_count(2, 4.3, 32) - ball_volume(2, 4.3))
    assert fine < coarse


def test_gauss_circle_ratio():
    assert count_ball(2, 50) / ball_volume(2, 50) == pytest.approx(1, rel=1e-2)

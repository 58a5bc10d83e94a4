"""Smooth cutoff profile and the dyadic family built from it.

Derivative values are checked against a high-precision finite-difference
oracle built with mpmath on an independent implementation of the same
profile, so no code path is compared against itself.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from gyrolab.cutoffs import (
    CutoffFamily,
    chi0,
    chi0_derivatives,
    chi0_prime,
    h_star,
)
from gyrolab.errors import DomainError


def _chi0_mp(r, sharpness=1.0):
    r = mp.mpf(r)
    if r <= 1:
        return mp.mpf(1)
    if r >= 2:
        return mp.mpf(0)
    u = mp.exp(-sharpness / (2 - r))
    v = mp.exp(-sharpness / (r - 1))
    return u / (u + v)


def test_plateau_and_support_are_exact():
    r = np.array([0.0, 0.5, 1.0, 2.0, 2.5, 100.0])
    assert np.array_equal(chi0(r), np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))


def test_midpoint_symmetry():
    assert chi0(1.5) == 0.5
    # symmetric blend: chi0(1.5 + t) + chi0(1.5 - t) = 1
    t = np.linspace(0.0, 0.5, 101)
    s = chi0(1.5 + t) + chi0(1.5 - t)
    assert np.max(np.abs(s - 1.0)) <= 1e-15


def test_monotone_nonincreasing():
    r = np.linspace(0.9, 2.1, 2001)
    v = chi0(r)
    assert np.all(np.diff(v) <= 1e-16)


def test_first_derivative_against_mp_oracle():
    for r0 in (1.07, 1.31, 1.5, 1.77, 1.93):
        want = float(mp.diff(_chi0_mp, r0))
        got = chi0_prime(r0)
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))
    # flat regions differentiate to zero exactly
    assert chi0_prime(0.7) == 0.0
    assert chi0_prime(2.3) == 0.0


def test_higher_derivatives_against_mp_oracle():
    mp.mp.dps = 40
    for r0 in (1.07, 1.31, 1.5, 1.77, 1.93):
        stack = chi0_derivatives(r0, 4)
        for j in range(1, 5):
            want = float(mp.diff(_chi0_mp, r0, j))
            assert abs(stack[j] - want) <= 1e-8 * max(1.0, abs(want))


def test_sharpness_parameter_changes_profile():
    for r0 in (1.2, 1.8):
        soft = chi0(r0, 1.0)
        hard = chi0(r0, 4.0)
        want = float(_chi0_mp(r0, 4.0))
        assert abs(hard - want) <= 1e-14
        assert soft != hard


def test_factorial_growth_envelope_of_derivatives():
    # |d^j chi0| <= C^j (j!)^2 with one fitted constant across j = 1..4.
    # The fit is dominated by the first derivative; measured C = 2.0.
    r = np.linspace(1.0 + 1e-9, 2.0 - 1e-9, 4001)
    stack = chi0_derivatives(r, 4)
    fitted = max(
        (np.max(np.abs(stack[j])) / math.factorial(j) ** 2) ** (1.0 / j)
        for j in range(1, 5)
    )
    assert fitted <= 2.5


def test_family_scale_covariance():
    fam = CutoffFamily(N=5, hStar=-3)
    r = np.linspace(0.01, 80.0, 500)
    for h in (-3, 0, 2, 5):
        assert np.array_equal(fam.chi_radial(h, r), chi0(r * 2.0 ** (-h)))


def test_family_band_telescoping():
    fam = CutoffFamily(N=4, hStar=-6)
    r = np.linspace(1e-4, 40.0, 3000)
    total = fam.chi_radial(fam.hStar, r).copy()
    for h in range(fam.hStar + 1, fam.N + 1):
        total = total + fam.f_radial(h, r)
    assert np.max(np.abs(total - fam.chi_radial(fam.N, r))) <= 1e-14


def test_band_support_window():
    fam = CutoffFamily(N=4, hStar=-6)
    h = 1
    inside = np.linspace(2.0 ** (h - 1) * 1.01, 2.0 ** (h + 1) * 0.99, 101)
    outside = np.array([2.0 ** (h - 1) * 0.99, 2.0 ** (h + 1) * 1.01, 1e-3, 30.0])
    assert np.array_equal(fam.f_radial(h, outside), np.zeros(4))
    assert np.max(fam.f_radial(h, inside)) > 0.1


def test_bottom_slice_keeps_whole_soft_block():
    fam = CutoffFamily(N=4, hStar=-6)
    r = np.array([1e-8, 2.0**-7, 2.0**-6])
    assert np.array_equal(fam.band_radial(fam.hStar, r), fam.chi_radial(fam.hStar, r))
    assert np.array_equal(fam.band_radial(fam.hStar, r), np.ones(3))


def test_four_vector_profiles_use_euclidean_norm():
    fam = CutoffFamily(N=3, hStar=-2)
    k = np.array([[0.3, 0.4, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]])
    r = np.array([0.5, 2.0])
    assert np.array_equal(fam.chi_h(1, k), fam.chi_radial(1, r))
    assert np.array_equal(fam.f_h(1, k), fam.f_radial(1, r))


def test_radial_derivative_accessors():
    fam = CutoffFamily(N=3, hStar=-2)
    for h in (0, 2):
        for r0 in (2.0**h * 1.3, 2.0**h * 1.7):
            step = 1e-6 * 2.0**h
            fd = (fam.chi_radial(h, r0 + step) - fam.chi_radial(h, r0 - step)) / (
                2 * step
            )
            assert abs(fam.chi_radial_prime(h, r0) - fd) <= 1e-7 * 2.0**-h
            fd_band = (
                fam.band_radial(h, r0 + step) - fam.band_radial(h, r0 - step)
            ) / (2 * step)
            assert abs(fam.band_radial_prime(h, r0) - fd_band) <= 1e-6 * 2.0**-h


def test_ladder_and_validation():
    fam = CutoffFamily(N=2, hStar=-1)
    assert list(fam.ladder()) == [-1, 0, 1, 2]
    with pytest.raises(DomainError):
        CutoffFamily(N=1, hStar=1)
    with pytest.raises(DomainError):
        CutoffFamily(N=2, hStar=0, transitionSharpness=0.0)
    with pytest.raises(DomainError):
        fam.chi_radial(3, 1.0)
    with pytest.raises(DomainError):
        fam.f_radial(-1, 1.0)
    # chi at hStar-1 is allowed: the bottom slice interpolates onto it
    fam.chi_radial(-2, 1.0)


def test_ladder_bottom_from_mass():
    assert h_star(1.0) == 0
    assert h_star(0.75) == -1
    assert h_star(1e-3) == -10
    with pytest.raises(DomainError):
        h_star(0.0)

"""Jet arithmetic against symbolic series expansions.

Every composite operation is compared with a sympy Taylor expansion of
the same expression, so the recurrences are pinned by an independent
symbolic route.
"""

import numpy as np
import pytest
import sympy as sp

from gyrolab.errors import DomainError
from gyrolab.jets import (
    derivatives_from_jet,
    jet_add,
    jet_compose,
    jet_const,
    jet_div,
    jet_eval,
    jet_from_poly,
    jet_mul,
    jet_scale,
    jet_sqrt,
)

_Z = sp.Symbol("z")


def _series_coeffs(expr, order):
    s = sp.series(expr, _Z, 0, order + 1).removeO()
    return [float(s.coeff(_Z, n)) for n in range(order + 1)]


def _jet_scalars(jet):
    return [float(np.asarray(c).reshape(-1)[0]) for c in jet]


POLY_A = [2.0, 0.7, -0.3, 0.05, 0.0]
POLY_B = [1.5, -0.4, 0.2, 0.0, 0.1]


def _sym(coeffs):
    return sum(c * _Z**n for n, c in enumerate(coeffs))


def test_product_matches_symbolic_series():
    order = 4
    a = jet_from_poly([np.array([c]) for c in POLY_A], order)
    b = jet_from_poly([np.array([c]) for c in POLY_B], order)
    got = _jet_scalars(jet_mul(a, b))
    want = _series_coeffs(sp.expand(_sym(POLY_A) * _sym(POLY_B)), order)
    assert np.allclose(got, want, atol=1e-14)


def test_quotient_matches_symbolic_series():
    order = 4
    a = jet_from_poly([np.array([c]) for c in POLY_A], order)
    b = jet_from_poly([np.array([c]) for c in POLY_B], order)
    got = _jet_scalars(jet_div(a, b))
    want = _series_coeffs(_sym(POLY_A) / _sym(POLY_B), order)
    assert np.allclose(got, want, atol=1e-13)


def test_sqrt_matches_symbolic_series():
    order = 4
    a = jet_from_poly([np.array([c]) for c in POLY_A], order)
    got = _jet_scalars(jet_sqrt(a))
    want = _series_coeffs(sp.sqrt(_sym(POLY_A)), order)
    assert np.allclose(got, want, atol=1e-13)


def test_sqrt_squares_back():
    order = 4
    rng = np.random.default_rng(2)
    vals = rng.uniform(0.5, 3.0, size=(6,))
    a = [vals] + [rng.normal(size=6) for _ in range(order)]
    w = jet_sqrt(a)
    back = jet_mul(w, w)
    for c_got, c_want in zip(back, a):
        assert np.max(np.abs(c_got - c_want)) <= 1e-12


def test_compose_matches_symbolic_series():
    order = 4
    inner = jet_from_poly([np.array([c]) for c in POLY_A], order)
    w0 = POLY_A[0]
    outer_derivs = [np.array([float(sp.diff(sp.cos(_Z), _Z, j).subs(_Z, w0))])
                    for j in range(order + 1)]
    got = _jet_scalars(jet_compose(outer_derivs, inner))
    want = _series_coeffs(sp.cos(_sym(POLY_A)), order)
    assert np.allclose(got, want, atol=1e-13)


def test_derivatives_from_jet_leibniz():
    order = 3
    a = jet_from_poly([np.array([c]) for c in POLY_A], order)
    b = jet_from_poly([np.array([c]) for c in POLY_B], order)
    derivs = derivatives_from_jet(jet_mul(a, b))
    prod = sp.expand(_sym(POLY_A) * _sym(POLY_B))
    for n in range(order + 1):
        want = float(sp.diff(prod, _Z, n).subs(_Z, 0))
        assert abs(float(np.asarray(derivs[n]).reshape(-1)[0]) - want) <= 1e-12


def test_eval_horner_against_direct_polynomial():
    order = 4
    a = jet_from_poly([np.array([c]) for c in POLY_A], order)
    for z in (0.0, 0.3, -0.7, 0.5 + 0.25j):
        got = complex(np.asarray(jet_eval(a, z)).reshape(-1)[0])
        want = complex(sum(c * z**n for n, c in enumerate(POLY_A)))
        assert abs(got - want) <= 1e-14 * max(1.0, abs(want))


def test_matrix_coefficients_broadcast_with_scalar_jets():
    # (mat + 0.5 mat z) * (2 - z) = 2 mat + 0 z - 0.5 mat z^2
    mat = np.array([[1.0, 2.0], [3.0, 4.0]])
    a = [mat, 0.5 * mat, np.zeros((2, 2))]
    s = [np.array(2.0), np.array(-1.0), np.array(0.0)]
    prod = jet_mul(a, s)
    assert np.allclose(prod[0], 2.0 * mat)
    assert np.allclose(prod[1], np.zeros((2, 2)))
    assert np.allclose(prod[2], -0.5 * mat)


def test_add_scale_const():
    order = 3
    a = jet_from_poly([np.array([1.0]), np.array([2.0])], order)
    b = jet_const(np.array([5.0]), order)
    s = jet_add(a, jet_scale(b, 2.0))
    assert _jet_scalars(s) == [11.0, 2.0, 0.0, 0.0]


def test_division_by_vanishing_lead_rejected():
    order = 2
    a = jet_const(np.array([1.0]), order)
    b = [np.array([0.0]), np.array([1.0]), np.array([0.0])]
    with pytest.raises(DomainError):
        jet_div(a, b)
    with pytest.raises(DomainError):
        jet_sqrt(b)


def test_compose_requires_enough_outer_derivatives():
    order = 3
    inner = jet_from_poly([np.array([1.0]), np.array([1.0])], order)
    with pytest.raises(DomainError):
        jet_compose([np.array([1.0])] * 3, inner)

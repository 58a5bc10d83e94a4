"""Adaptive cubature engine: rule exactness, oracles, and failure modes.

The embedded rule is pinned by polynomial exactness (degree 22 for the
full rule, degree 13 for the embedded one), then whole integrals are
compared against closed forms and scipy's independent integrators.
"""

import numpy as np
import pytest
from scipy import integrate, special

from gyrolab.errors import DomainError, QuadratureError
from gyrolab.quadrature import (
    FOUR_PI_MEASURE,
    OCTAHEDRAL_DIRECTIONS,
    TWO_PI_MEASURE,
    QuadratureSpec,
    adaptive_quadrature,
    collinear_embed,
    octahedral_embed,
    orthonormal_frame,
)

_ONE_CELL = QuadratureSpec(relTolerance=1.0, absTolerance=1e300, maxSubdivisions=1)


def test_rule_is_exact_through_degree_22():
    # one unrefined cell on [0, 1]; monomial integrals are 1/(n+1)
    for n in range(23):
        val, _ = adaptive_quadrature(lambda p, n=n: p[:, 0] ** n, [(0.0, 1.0)], _ONE_CELL)
        assert abs(val - 1.0 / (n + 1)) <= 5e-15


def test_embedded_rule_error_vanishes_through_degree_13():
    for n in range(14):
        _, err = adaptive_quadrature(lambda p, n=n: p[:, 0] ** n, [(0.0, 1.0)], _ONE_CELL)
        assert err <= 1e-14
    # degree 14 separates the two rules
    _, err = adaptive_quadrature(lambda p: p[:, 0] ** 14, [(0.0, 1.0)], _ONE_CELL)
    assert err > 1e-10


def test_smooth_1d_against_closed_form():
    val, err = adaptive_quadrature(np.sin, [(0.0, np.pi)],
                                   QuadratureSpec(relTolerance=1e-12))
    # integrand wrapper: np.sin already maps (n,1)->(n,1); flatten
    val = float(np.asarray(val).reshape(-1)[0])
    assert abs(val - 2.0) <= 1e-11


def test_gaussian_2d_against_error_function():
    spec = QuadratureSpec(relTolerance=1e-10)
    val, err = adaptive_quadrature(
        lambda p: np.exp(-p[:, 0] ** 2 - p[:, 1] ** 2), [(-4, 4), (-4, 4)], spec
    )
    want = np.pi * special.erf(4.0) ** 2
    assert abs(val - want) <= 1e-9
    assert abs(val - want) <= 10.0 * max(err, 1e-12)


def test_3d_against_scipy_tplquad():
    def f(p):
        return 1.0 / (1.0 + p[:, 0] ** 2 + p[:, 1] ** 2 + p[:, 2] ** 2) ** 2

    val, _ = adaptive_quadrature(f, [(0, 1), (0, 1), (0, 1)],
                                 QuadratureSpec(relTolerance=1e-9))
    want, werr = integrate.tplquad(
        lambda z, y, x: 1.0 / (1.0 + x * x + y * y + z * z) ** 2,
        0, 1, 0, 1, 0, 1, epsabs=1e-11, epsrel=1e-11,
    )
    assert abs(val - want) <= 1e-8 + 10 * werr


def test_narrow_bump_needs_initial_grid():
    width = 1e-3
    center = 0.37

    def bump(p):
        return np.exp(-(((p[:, 0] - center) / width) ** 2))

    want = np.sqrt(np.pi) * width  # tails are negligible at double precision
    val, err = adaptive_quadrature(
        bump, [(0.0, 1.0)], QuadratureSpec(relTolerance=1e-9), initial_grid=[64]
    )
    assert abs(val - want) <= 1e-8 * want


def test_vector_and_complex_integrands():
    def f(p):
        x = p[:, 0]
        out = np.empty((x.size, 2, 2), dtype=complex)
        out[:, 0, 0] = x
        out[:, 0, 1] = x**2
        out[:, 1, 0] = 1j * np.sin(x)
        out[:, 1, 1] = np.cos(x) + 1j * x**3
        return out

    val, _ = adaptive_quadrature(f, [(0.0, 1.0)], QuadratureSpec(relTolerance=1e-11))
    want = np.array(
        [
            [0.5, 1.0 / 3.0],
            [1j * (1 - np.cos(1.0)), np.sin(1.0) + 0.25j],
        ]
    )
    assert np.max(np.abs(val - want)) <= 1e-10


def test_budget_exhaustion_carries_partial_value():
    def nasty(p):
        return np.abs(np.sin(200.0 * p[:, 0])) ** 0.3

    with pytest.raises(QuadratureError) as info:
        adaptive_quadrature(nasty, [(0.0, 1.0)],
                            QuadratureSpec(relTolerance=1e-13, maxSubdivisions=4))
    assert info.value.value is not None
    assert info.value.error_estimate > 0


def test_deterministic_refinement():
    def f(p):
        return np.exp(-p[:, 0] ** 2) * np.cos(3.0 * p[:, 1])

    spec = QuadratureSpec(relTolerance=1e-10)
    v1, e1 = adaptive_quadrature(f, [(-2, 2), (0, 2)], spec)
    v2, e2 = adaptive_quadrature(f, [(-2, 2), (0, 2)], spec)
    assert v1 == v2 and e1 == e2


def test_domain_validation():
    f = lambda p: p[:, 0]
    with pytest.raises(DomainError):
        adaptive_quadrature(f, [(0, 1)] * 4)
    with pytest.raises(DomainError):
        adaptive_quadrature(f, [(1.0, 1.0)])
    with pytest.raises(DomainError):
        adaptive_quadrature(f, [(0, 1)], initial_grid=[2, 2])
    with pytest.raises(DomainError):
        QuadratureSpec(relTolerance=0.0, absTolerance=0.0)


def test_octahedral_average_matches_sphere_through_degree_3():
    dirs = OCTAHEDRAL_DIRECTIONS
    assert dirs.shape == (6, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    mean1 = dirs.mean(axis=0)
    assert np.max(np.abs(mean1)) == 0.0
    mean2 = np.einsum("na,nb->ab", dirs, dirs) / 6.0
    assert np.allclose(mean2, np.eye(3) / 3.0, atol=1e-15)
    mean3 = np.einsum("na,nb,nc->abc", dirs, dirs, dirs) / 6.0
    assert np.max(np.abs(mean3)) == 0.0


def test_octahedral_embedding_shapes_and_measure():
    q0 = np.array([0.5, -1.0])
    r = np.array([2.0, 3.0])
    pts = octahedral_embed(q0, r)
    assert pts.shape == (2, 6, 4)
    assert np.allclose(pts[:, :, 0], q0[:, None])
    assert np.allclose(np.linalg.norm(pts[:, :, 1:], axis=2), r[:, None])
    # full-solid-angle radial weight against the plain 4d integral of a
    # rotation invariant test function
    spec = QuadratureSpec(relTolerance=1e-9)

    def radial(p):
        q0v, rv = p[:, 0], p[:, 1]
        emb = octahedral_embed(q0v, rv)
        vals = np.exp(-np.sum(emb * emb, axis=2)).mean(axis=1)
        return FOUR_PI_MEASURE * rv**2 * vals

    val, _ = adaptive_quadrature(radial, [(-5, 5), (0, 5)], spec)
    want = np.pi**2 / (2 * np.pi) ** 4  # gaussian over R^4
    assert abs(val - want) <= 1e-8 * want


def test_collinear_embedding_against_full_3d_angular_integral():
    axis = np.array([0.0, 0.0, 1.0])
    e1, e2 = orthonormal_frame(axis)
    assert abs(e1 @ e2) <= 1e-15 and abs(e1 @ axis) <= 1e-15
    # integrand depends on the axis projection only through degree <= 2,
    # and on the azimuth through degree <= 2 as well
    a = np.array([0.2, -0.4, 0.7])

    def reduced(p):
        q0v, rv, uv = p[:, 0], p[:, 1], p[:, 2]
        emb = collinear_embed(q0v, rv, uv, axis)
        dots = emb[:, :, 1:] @ a
        vals = (dots**2 + emb[:, :, 0] ** 2) * np.exp(
            -np.sum(emb * emb, axis=2)
        )
        return TWO_PI_MEASURE * rv**2 * vals.mean(axis=1)

    val, _ = adaptive_quadrature(
        reduced, [(-5, 5), (0, 5), (-1, 1)], QuadratureSpec(relTolerance=1e-8)
    )

    # oracle: separable gaussian moments over R^4
    g1 = np.sqrt(np.pi)
    want = (np.sum(a * a) * 0.5 * g1**4 + 0.5 * g1**4) / (2 * np.pi) ** 4
    assert abs(val - want) <= 1e-6 * abs(want)


def test_orthonormal_frame_rejects_zero_axis():
    with pytest.raises(DomainError):
        orthonormal_frame(np.zeros(3))

"""Euclidean and Minkowski Dirac matrices, traces, and the Levi-Civita
symbol.

Every vertex, propagator, and trace formula downstream is built on the
fixed 4x4 representation constructed here.  The basis is block
anti-diagonal in chirality: ``gamma(mu)`` couples the two 2x2 chirality
blocks through ``sigma_plus``/``sigma_minus``, and ``gamma5()`` is
``diag(I, -I)``.

Conventions locked by the tests:

* ``{gamma(mu), gamma(nu)} = 2 delta(mu, nu) I`` entrywise.
* ``gamma(0) gamma(1) gamma(2) gamma(3) = -gamma5()`` (recorded phase).
* ``trace(gamma5 g^a g^m g^n g^b) = -4 eps(a, m, n, b)`` with
  ``eps(0,1,2,3) = +1``; raised and lowered epsilons are the same
  permutation symbol.
* ``minkowski_gamma(0) = i gamma(0)``, spatial matrices unchanged; the
  Minkowski anticommutator closes on ``2 eta`` with
  ``eta = diag(-1, 1, 1, 1)``.

All functions return fresh or read-only arrays; nothing here mutates
shared state, so concurrent use is safe.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = [
    "gamma",
    "gamma5",
    "slash",
    "upsilon",
    "trace_product",
    "minkowski_gamma",
    "minkowski_slash",
    "levi_civita",
    "MINKOWSKI_METRIC",
    "IDENTITY",
]

_SIGMA = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# sigma_plus^mu = (I, -i s1, -i s2, -i s3), sigma_minus^mu = (I, +i s1, ...)
_SIGMA_PLUS = (_SIGMA[0], -1j * _SIGMA[1], -1j * _SIGMA[2], -1j * _SIGMA[3])
_SIGMA_MINUS = (_SIGMA[0], 1j * _SIGMA[1], 1j * _SIGMA[2], 1j * _SIGMA[3])


def _block_antidiag(top_right, bottom_left):
    out = np.zeros((4, 4), dtype=complex)
    out[:2, 2:] = top_right
    out[2:, :2] = bottom_left
    return out


def _freeze(a):
    a.setflags(write=False)
    return a


_GAMMA = tuple(
    _freeze(_block_antidiag(_SIGMA_PLUS[mu], _SIGMA_MINUS[mu])) for mu in range(4)
)
_GAMMA5 = _freeze(np.diag([1, 1, -1, -1]).astype(complex))
IDENTITY = _freeze(np.eye(4, dtype=complex))
MINKOWSKI_METRIC = _freeze(np.diag([-1.0, 1.0, 1.0, 1.0]))

_MINK_GAMMA = tuple(
    _freeze((1j * _GAMMA[0]) if mu == 0 else _GAMMA[mu].copy()) for mu in range(4)
)


def _check_index(mu):
    if mu not in (0, 1, 2, 3):
        raise DomainError(f"spacetime index must be 0..3, got {mu!r}")


def gamma(mu: int) -> np.ndarray:
    """Euclidean gamma matrix (read-only 4x4 array)."""
    _check_index(mu)
    return _GAMMA[mu]


def gamma5() -> np.ndarray:
    """Chirality matrix diag(I2, -I2); anticommutes with every gamma(mu)."""
    return _GAMMA5


def minkowski_gamma(mu: int) -> np.ndarray:
    """Minkowski gamma matrix: i*gamma(0) for mu=0, gamma(mu) otherwise."""
    _check_index(mu)
    return _MINK_GAMMA[mu]


# Stacked copies for vectorized contraction; shape (4, 4, 4).
_GAMMA_STACK = _freeze(np.stack(_GAMMA))
_MINK_STACK = _freeze(np.stack(_MINK_GAMMA))


def slash(k) -> np.ndarray:
    """Contraction sum_mu k_mu gamma(mu).

    Accepts a single four-vector (shape (4,)) or a batch (..., 4) and
    returns (..., 4, 4).  The index is Euclidean: no metric is applied.
    """
    k = np.asarray(k)
    return np.einsum("...m,mab->...ab", k, _GAMMA_STACK)


def minkowski_slash(k_lower) -> np.ndarray:
    """Contraction sum_mu (k_lower)_mu gamma_mink(mu).

    The caller supplies already-lowered components; this function does
    not apply the metric.
    """
    k_lower = np.asarray(k_lower)
    return np.einsum("...m,mab->...ab", k_lower, _MINK_STACK)


def upsilon(mu: int, kappa: float) -> np.ndarray:
    """Chirality-asymmetric vertex matrix gamma(mu) (I - kappa gamma5)."""
    _check_index(mu)
    return _GAMMA[mu] @ (IDENTITY - kappa * _GAMMA5)


def trace_product(matrices) -> complex:
    """Trace of the ordered product of 4x4 matrices.

    Cyclic by construction; an empty list is rejected.
    """
    mats = list(matrices)
    if not mats:
        raise DomainError("trace_product needs at least one matrix")
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = out @ m
    return complex(np.trace(out))


def levi_civita() -> np.ndarray:
    """Rank-4 totally antisymmetric array with eps[0,1,2,3] = +1."""
    return _EPSILON


def _build_epsilon():
    eps = np.zeros((4, 4, 4, 4))
    from itertools import permutations

    for perm in permutations(range(4)):
        sign = 1.0
        p = list(perm)
        # parity by counting transpositions of a selection sort
        for i in range(4):
            j = p.index(i)
            if j != i:
                p[i], p[j] = p[j], p[i]
                sign = -sign
        eps[perm] = sign
    return _freeze(eps)


_EPSILON = _build_epsilon()

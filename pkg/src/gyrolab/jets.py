"""Truncated Taylor-series (jet) arithmetic.

A jet of order K holds the coefficients [c0, ..., cK] of a function of
one formal parameter, each coefficient an ndarray over evaluation
points.  Arithmetic truncates at order K.  Used to push analytic
parameter derivatives through loop integrands so that no finite
difference ever crosses a quadrature.

Coefficients are Taylor coefficients (derivative / factorial), not raw
derivatives.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = [
    "jet_const",
    "jet_from_poly",
    "jet_add",
    "jet_scale",
    "jet_mul",
    "jet_div",
    "jet_sqrt",
    "jet_compose",
    "jet_eval",
    "derivatives_from_jet",
]


def jet_const(value, order: int):
    value = np.asarray(value)
    out = [np.zeros_like(value) for _ in range(order + 1)]
    out[0] = value.copy()
    return out


def jet_from_poly(coeffs, order: int):
    """Jet of a polynomial given low-to-high coefficients."""
    base = np.asarray(coeffs[0])
    out = [np.zeros_like(base) for _ in range(order + 1)]
    for i, c in enumerate(coeffs):
        if i > order:
            break
        out[i] = np.broadcast_to(np.asarray(c), base.shape).copy()
    return out


def jet_add(a, b):
    return [x + y for x, y in zip(a, b)]


def jet_scale(a, s):
    return [s * x for x in a]


def jet_mul(a, b):
    order = len(a) - 1
    out = []
    for n in range(order + 1):
        acc = a[0] * b[n]
        for j in range(1, n + 1):
            acc = acc + a[j] * b[n - j]
        out.append(acc)
    return out


def jet_div(a, b):
    """a / b with invertible leading coefficient."""
    order = len(a) - 1
    lead = b[0]
    if np.any(lead == 0):
        raise DomainError("jet division needs a nonvanishing leading term")
    out = [a[0] / lead]
    for n in range(1, order + 1):
        acc = a[n]
        for j in range(1, n + 1):
            acc = acc - b[j] * out[n - j]
        out.append(acc / lead)
    return out


def jet_sqrt(a):
    """Principal square root; leading coefficient must be positive."""
    order = len(a) - 1
    lead = a[0]
    if np.any(lead <= 0):
        raise DomainError("jet sqrt needs a positive leading term")
    w0 = np.sqrt(lead)
    out = [w0]
    for n in range(1, order + 1):
        acc = a[n]
        for j in range(1, n):
            acc = acc - out[j] * out[n - j]
        out.append(acc / (2.0 * w0))
    return out


def jet_compose(outer_derivs, inner):
    """Jet of F(inner(z)) from derivatives of F at the leading point.

    outer_derivs: sequence [F(w0), F'(w0), ..., F^(K)(w0)] evaluated at
    w0 = inner[0] (each an array over points).  inner: jet of w(z).
    Plain Taylor composition through powers of (w - w0); exactness to
    the truncation order is what the tests pin down.
    """
    order = len(inner) - 1
    if len(outer_derivs) < order + 1:
        raise DomainError("need outer derivatives up to the jet order")
    delta = [np.zeros_like(c) for c in inner]
    for j in range(1, order + 1):
        delta[j] = inner[j]
    out = jet_const(np.asarray(outer_derivs[0]), order)
    power = jet_const(np.ones_like(inner[0]), order)
    for j in range(1, order + 1):
        power = jet_mul(power, delta)
        term = jet_scale(power, 1.0 / math.factorial(j))
        out = jet_add(out, [outer_derivs[j] * t for t in term])
    return out


def jet_eval(a, z):
    """Evaluate the truncated series at parameter value z (Horner)."""
    acc = np.zeros_like(a[-1])
    for c in reversed(a):
        acc = acc * z + c
    return acc


def derivatives_from_jet(a):
    """Raw derivatives [f, f', ..., f^(K)] from Taylor coefficients."""
    return [c * math.factorial(n) for n, c in enumerate(a)]

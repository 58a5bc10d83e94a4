"""Smooth dyadic momentum cutoff and the scale ladder.

``chi0`` is the mother cutoff: exactly 1 below radius 1, exactly 0 above
radius 2, and a Gevrey-smooth exp(-1/t) blend in between.  ``CutoffFamily``
rescales it over the dyadic ladder h in [hStar, N] and exposes the
single-scale bands f_h = chi_h - chi_{h-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["chi0", "chi0_prime", "chi0_derivatives", "CutoffFamily", "h_star"]


def _bump(t, sharpness=1.0):
    # exp(-s/t) for t > 0, else 0; safe against divide-by-zero warnings.
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-sharpness / t[pos])
    return out


def chi0(r, sharpness: float = 1.0):
    """Mother cutoff profile as a function of radius.

    Exact 1 for r <= 1 and exact 0 for r >= 2 (not merely approximate:
    downstream support arguments rely on the hard edges).  The blend is
    g(2-r)/(g(2-r) + g(r-1)) with g(t) = exp(-sharpness/t).
    """
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.ones_like(r)
    out[r >= 2.0] = 0.0
    mid = (r > 1.0) & (r < 2.0)
    if np.any(mid):
        u = _bump(2.0 - r[mid], sharpness)
        v = _bump(r[mid] - 1.0, sharpness)
        out[mid] = u / (u + v)
    return float(out[0]) if scalar else out


def chi0_prime(r, sharpness: float = 1.0):
    """d chi0 / dr, analytic on the blend region, zero outside."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.zeros_like(r)
    mid = (r > 1.0) & (r < 2.0)
    if np.any(mid):
        rm = r[mid]
        u = _bump(2.0 - rm, sharpness)
        v = _bump(rm - 1.0, sharpness)
        # g'(t) = s exp(-s/t)/t^2; chain rule with t = 2-r and t = r-1
        du = -sharpness * u / (2.0 - rm) ** 2
        dv = sharpness * v / (rm - 1.0) ** 2
        out[mid] = (du * v - u * dv) / (u + v) ** 2
    return float(out[0]) if scalar else out


_DERIV_CACHE: dict = {}


def chi0_derivatives(r, order: int, sharpness: float = 1.0):
    """Stack [chi0, chi0', ..., chi0^(order)] evaluated at r.

    Higher derivatives are generated symbolically once (sympy) and
    cached as vectorized callables; outside the open blend interval all
    derivatives vanish and the value is the hard 1/0.
    """
    if order < 0:
        raise DomainError("derivative order must be nonnegative")
    key = (order, float(sharpness))
    funcs = _DERIV_CACHE.get(key)
    if funcs is None:
        import sympy as sp

        x = sp.Symbol("x", positive=True)
        s = sp.Float(sharpness)
        u = sp.exp(-s / (2 - x))
        v = sp.exp(-s / (x - 1))
        expr = u / (u + v)
        funcs = []
        for j in range(order + 1):
            funcs.append(sp.lambdify(x, expr, modules="numpy"))
            expr = sp.diff(expr, x)
        _DERIV_CACHE[key] = funcs

    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.zeros((order + 1,) + r.shape)
    out[0][r <= 1.0] = 1.0
    mid = (r > 1.0) & (r < 2.0)
    if np.any(mid):
        rm = r[mid]
        for j, f in enumerate(funcs):
            out[j][mid] = f(rm)
    return out[:, 0] if scalar else out


def h_star(m: float) -> int:
    """Bottom of the scale ladder for fermion mass m."""
    if m <= 0:
        raise DomainError("mass must be positive to place the ladder bottom")
    return math.floor(math.log2(m))


@dataclass(frozen=True)
class CutoffFamily:
    """Dyadic cutoff family on the ladder h in [hStar, N].

    Lambda = 2^N is the ultraviolet cutoff; hStar = floor(log2 m) is the
    infrared end where the ladder stops and the remaining soft modes are
    integrated in one block.
    """

    N: int
    hStar: int
    transitionSharpness: float = 1.0

    def __post_init__(self):
        if self.N <= self.hStar:
            raise DomainError(
                f"empty ladder: N={self.N} must exceed hStar={self.hStar}"
            )
        if self.transitionSharpness <= 0:
            raise DomainError("transitionSharpness must be positive")

    # -- radial profiles ------------------------------------------------
    def chi_radial(self, h: int, r):
        """chi_h as a function of |k|."""
        self._check_scale(h, lo=self.hStar - 1)
        return chi0(np.asarray(r, dtype=float) * 2.0 ** (-h), self.transitionSharpness)

    def f_radial(self, h: int, r):
        """Band profile f_h = chi_h - chi_{h-1} as a function of |k|."""
        self._check_scale(h, lo=self.hStar + 1)
        return self.chi_radial(h, r) - self.chi_radial(h - 1, r)

    def band_radial(self, h: int, r):
        """Slice weight used by single-scale propagators.

        The bottom slice h = hStar keeps the whole soft block chi_{h*};
        every other slice carries the band f_h.
        """
        if h == self.hStar:
            return self.chi_radial(h, r)
        return self.f_radial(h, r)

    def chi_radial_prime(self, h: int, r):
        """d/d|k| of chi_h."""
        self._check_scale(h, lo=self.hStar - 1)
        s = 2.0 ** (-h)
        return s * chi0_prime(np.asarray(r, dtype=float) * s, self.transitionSharpness)

    def f_radial_prime(self, h: int, r):
        self._check_scale(h, lo=self.hStar + 1)
        return self.chi_radial_prime(h, r) - self.chi_radial_prime(h - 1, r)

    def band_radial_prime(self, h: int, r):
        if h == self.hStar:
            return self.chi_radial_prime(h, r)
        return self.f_radial_prime(h, r)

    # -- four-vector versions -------------------------------------------
    def chi_h(self, h: int, k):
        """chi_h(k) = chi0(2^-h |k|) for four-vectors (batched on (..., 4))."""
        self._check_scale(h, lo=self.hStar - 1)
        return self.chi_radial(h, _norm(k))

    def f_h(self, h: int, k):
        """Single-scale band f_h(k), supported on 2^(h-1) <= |k| <= 2^(h+1)."""
        self._check_scale(h, lo=self.hStar + 1)
        return self.f_radial(h, _norm(k))

    def band(self, h: int, k):
        return self.band_radial(h, _norm(k))

    def ladder(self):
        """Scale indices from the soft block up to the cutoff."""
        return range(self.hStar, self.N + 1)

    def _check_scale(self, h, lo):
        # chi_{hStar-1} is needed by the interpolated couplings of the
        # bottom slice, hence the lo parameter instead of plain hStar.
        if not (lo <= h <= self.N):
            raise DomainError(
                f"scale {h} outside ladder [{lo}, {self.N}]"
            )


def _norm(k):
    k = np.asarray(k, dtype=float)
    return np.sqrt(np.sum(k * k, axis=-1))

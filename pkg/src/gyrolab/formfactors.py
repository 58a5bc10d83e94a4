"""On-shell spinors, vertex form factors, and their extraction.

A scattering vertex between equal-mass on-shell states decomposes into
six scalar form factors: a gamma-matrix pair, a total-momentum pair, and
a momentum-transfer pair, each with a chirality partner.  This module
builds spinors for the on-shell branch with negative Euclidean frequency,
assembles a vertex from given form factors, and projects the factors
back out of an arbitrary vertex with trace formulas.

Storage convention: momenta are kept as Euclidean four-vectors.  On
shell, the stored vector doubles as the contravariant Minkowski vector
(its frequency component is minus the energy), and flipping the sign of
the frequency component gives the covariant one.  The mass norm is
sqrt(frequency^2 - |spatial|^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .gammas import _SIGMA as _PAULI
from .gammas import gamma, gamma5, levi_civita, minkowski_gamma, minkowski_slash

_EPS = levi_civita()
_MINK = np.stack([minkowski_gamma(mu) for mu in range(4)])
_METRIC_SIGNS = np.array([-1.0, 1.0, 1.0, 1.0])


@dataclass(frozen=True)
class FormFactors:
    """Six scalar couplings of the decomposed vertex."""

    F: complex = 0.0
    F5: complex = 0.0
    G: complex = 0.0
    G5: complex = 0.0
    H: complex = 0.0
    H5: complex = 0.0


def covariant(p):
    """Covariant Minkowski components of a stored four-vector."""
    p = np.asarray(p, dtype=float)
    return np.array([-p[0], p[1], p[2], p[3]])


def mass_norm(p):
    """On-shell mass sqrt(p0^2 - |spatial p|^2) of a stored four-vector."""
    p = np.asarray(p, dtype=float)
    m2 = p[0] ** 2 - p[1:] @ p[1:]
    if m2 <= 0:
        raise DomainError("momentum is spacelike: no mass norm")
    return np.sqrt(m2)


def positive_energy_projector(p, m=None):
    """Spin sum of the on-shell spinors, continued off shell if m is given."""
    if m is None:
        m = mass_norm(p)
    return -1j * minkowski_slash(covariant(p)) + m * np.eye(4)


@dataclass(frozen=True)
class OnShellSpinor:
    """Four-spinor of the on-shell branch with its construction data."""

    u: np.ndarray
    p: np.ndarray
    mass: float
    xi: np.ndarray

    @property
    def bar(self) -> np.ndarray:
        return self.u.conj() @ gamma(0)

    @property
    def dirac_residual(self) -> float:
        op = 1j * minkowski_slash(covariant(self.p)) + self.mass * np.eye(4)
        return float(np.max(np.abs(op @ self.u)))


def _principal_sqrt_2x2(mat):
    vals, vecs = np.linalg.eigh(mat)
    if np.any(vals < -1e-12):
        raise DomainError("matrix square root needs a nonnegative spectrum")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def _helicity_basis(pvec):
    r = np.linalg.norm(pvec)
    if r == 0:
        return np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)
    sp = sum(pvec[a] * _PAULI[a + 1] for a in range(3)) / r
    vals, vecs = np.linalg.eigh(sp)
    # eigh sorts ascending: column 1 has helicity +1, column 0 helicity -1
    return vecs[:, 1].copy(), vecs[:, 0].copy()


def build_spinor(p, xi) -> OnShellSpinor:
    """Spinor for a stored on-shell momentum with negative frequency part.

    xi selects the two-component polarization: 0 or 1 pick the helicity
    eigenstates along the spatial momentum (frame axis at rest), any
    explicit two-vector is normalized and used directly.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (4,):
        raise DomainError("build_spinor expects a single four-vector")
    if p[0] >= 0:
        raise DomainError("on-shell branch requires a negative frequency component")
    m = mass_norm(p)
    energy = -p[0]
    if isinstance(xi, (int, np.integer)):
        if xi not in (0, 1):
            raise DomainError("helicity label must be 0 or 1")
        xi_vec = _helicity_basis(p[1:])[xi]
    else:
        xi_vec = np.asarray(xi, dtype=complex)
        if xi_vec.shape != (2,):
            raise DomainError("polarization must be a two-component vector")
        norm = np.linalg.norm(xi_vec)
        if norm == 0:
            raise DomainError("polarization must be nonzero")
        xi_vec = xi_vec / norm
    sp = sum(p[1 + a] * _PAULI[1 + a] for a in range(3))
    top = _principal_sqrt_2x2(energy * np.eye(2) - sp) @ xi_vec
    bottom = _principal_sqrt_2x2(energy * np.eye(2) + sp) @ xi_vec
    return OnShellSpinor(np.concatenate([top, bottom]), p.copy(), float(m), xi_vec)


def build_vertex_from_form_factors(ff: FormFactors, pPrime, p):
    """Vertex matrices (index, 4, 4) assembled from the six form factors."""
    pPrime = np.asarray(pPrime, dtype=float)
    p = np.asarray(p, dtype=float)
    g5 = gamma5()
    eye = np.eye(4)
    scale = mass_norm(pPrime) + mass_norm(p)
    total = pPrime + p
    transfer = pPrime - p
    out = np.empty((4, 4, 4), dtype=complex)
    gamma_part_weight = ff.F * eye + ff.F5 * g5
    total_weight = (ff.G * eye + ff.G5 * g5) / scale
    transfer_weight = (ff.H * eye + ff.H5 * g5) / scale
    for mu in range(4):
        out[mu] = (
            _MINK[mu] @ gamma_part_weight
            - 1j * total[mu] * total_weight
            + transfer[mu] * transfer_weight
        )
    return out


def _shift_upper(p, alpha, s):
    # shifting the covariant component alpha by s moves the stored
    # (contravariant) component by the metric sign
    q = np.array(p, dtype=float)
    q[alpha] += _METRIC_SIGNS[alpha] * s
    return q


def _chiral_trace_stack(vertex, pPrime, p, m):
    """tr[g5 P(p') Gamma^mu P(p) g_mink^beta] for all (mu, beta)."""
    proj_out = positive_energy_projector(pPrime, m)
    proj_in = positive_energy_projector(p, m)
    gam = np.asarray(vertex(pPrime, p))
    if gam.shape != (4, 4, 4):
        raise DomainError("vertex evaluator must return a (4, 4, 4) stack")
    g5 = gamma5()
    sandwich = np.einsum("ab,bc,mcd,de->mae", g5, proj_out, gam, proj_in)
    return np.einsum("mae,nea->mn", sandwich, _MINK)


def extract_F(vertex, p, derivativeStep=None):
    """Gamma-pair form factor via the antisymmetric derivative projection.

    vertex: callable (pPrime, p) -> (4, 4, 4) stack.  The derivative acts
    antisymmetrically on the outgoing and incoming covariant momenta; one
    Richardson halving step removes the cubic error the momentum-dependent
    normalizations introduce, which plain central differences at the
    default step would not reach at the advertised accuracy.
    """
    p = np.asarray(p, dtype=float)
    m = mass_norm(p)
    if derivativeStep is None:
        derivativeStep = m / 64.0
    if derivativeStep <= 0:
        raise DomainError("derivative step must be positive")

    def antisym_stack(alpha, s):
        plus = _chiral_trace_stack(
            vertex, _shift_upper(p, alpha, s), _shift_upper(p, alpha, -s), m
        )
        minus = _chiral_trace_stack(
            vertex, _shift_upper(p, alpha, -s), _shift_upper(p, alpha, s), m
        )
        return (plus - minus) / (2.0 * s)

    deriv = np.empty((4, 4, 4), dtype=complex)
    for alpha in range(4):
        d1 = antisym_stack(alpha, derivativeStep)
        d2 = antisym_stack(alpha, derivativeStep / 2.0)
        deriv[alpha] = (4.0 * d2 - d1) / 3.0
    total = np.einsum("amsb,s,amb->", _EPS, p, deriv)
    return 1j * total / (48.0 * m * m)


def extract_F_plus_G(vertex, p):
    """Forward projection: the gamma pair plus the total-momentum pair."""
    p = np.asarray(p, dtype=float)
    m = mass_norm(p)
    gam = np.asarray(vertex(p, p))
    if gam.shape != (4, 4, 4):
        raise DomainError("vertex evaluator must return a (4, 4, 4) stack")
    low = covariant(p)
    contracted = np.einsum("m,mab->ab", low, gam)
    proj = positive_energy_projector(p, m)
    return -1j * np.trace(proj @ contracted) / (4.0 * m * m)


def g_from_form_factors(ff: FormFactors) -> complex:
    """Anomaly ratio -G/(F+G) of the decomposed vertex."""
    denom = ff.F + ff.G
    if denom == 0:
        raise DomainError("F + G vanishes: anomaly ratio undefined")
    return -ff.G / denom

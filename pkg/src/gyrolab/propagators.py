"""Model parameters, per-scale couplings, and multiscale fermion/boson lines.

The fermion field is integrated slice by slice over a dyadic ladder of
momentum scales.  Each slice carries its own field strength and mass
couplings; inside the slice the couplings interpolate to the next row down
through the smooth cutoff profile, so the soft end of every slice already
sees the renormalized values.  The bottom slice keeps the whole soft block
in one piece, which is safe because the fermion mass stops the flow there.

Conventions: Euclidean metric, gamma matrices in chiral blocks, and momenta
as plain four-vectors with index 0 the Euclidean time component.  All
propagator evaluators accept a single four-vector or a batch (n, 4).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cutoffs import CutoffFamily, h_star
from .errors import DomainError, NumericError
from .gammas import _SIGMA_MINUS, _SIGMA_PLUS, slash

_SP = np.stack(_SIGMA_PLUS)
_SM = np.stack(_SIGMA_MINUS)
_EYE2 = np.eye(2)


@dataclass(frozen=True)
class PhysicalParams:
    """Model inputs: masses, coupling, chirality mix, cutoff exponent.

    m is the fermion mass; it may be zero only when hStarOverride pins the
    ladder bottom explicitly (the default bottom floor(log2 m) needs m > 0).
    M is the boson mass, lambda_ the coupling, kappa the relative weight of
    the chirality-odd part of the interaction vertex.  The ultraviolet
    cutoff is 2^N.  K is the Maclaurin order kept by the response pipeline.
    """

    m: float
    M: float
    lambda_: float
    kappa: float
    N: int
    K: int = 4
    hStarOverride: Optional[int] = None

    def __post_init__(self):
        if self.m < 0:
            raise DomainError("fermion mass must be nonnegative")
        if self.m == 0 and self.hStarOverride is None:
            raise DomainError(
                "massless parameters need hStarOverride to place the ladder bottom"
            )
        if self.M <= 0:
            raise DomainError("boson mass must be positive")
        if self.K < 0:
            raise DomainError("Maclaurin order K must be nonnegative")
        if 2.0**self.N <= self.M:
            raise DomainError(
                f"cutoff 2^{self.N} must exceed the boson mass {self.M}"
            )
        if self.N <= self.hStar:
            raise DomainError(
                f"cutoff exponent N={self.N} must exceed the ladder bottom "
                f"hStar={self.hStar}"
            )
        if self.m > 0 and self.M <= 10.0 * self.m:
            warnings.warn(
                "weak scale separation: M <= 10 m, heavy-boson expansions "
                "will be inaccurate",
                stacklevel=2,
            )

    @property
    def hStar(self) -> int:
        if self.hStarOverride is not None:
            return self.hStarOverride
        return h_star(self.m)

    @property
    def cutoff(self) -> float:
        return 2.0**self.N

    @property
    def coupling_strength(self) -> float:
        """Dimensionless expansion parameter lambda^2 cutoff^2 / M^2."""
        return self.lambda_**2 * self.cutoff**2 / self.M**2

    def family(self, transitionSharpness: float = 1.0) -> CutoffFamily:
        return CutoffFamily(self.N, self.hStar, transitionSharpness)


@dataclass(frozen=True)
class ScaleCouplings:
    """One ladder row: field strength, response, and mass couplings."""

    Zplus: float
    Zminus: float
    ZJplus: float
    ZJminus: float
    mPlus: float
    mMinus: float


class RunningCouplings:
    """Coupling rows keyed by integer scale from hStar-1 to N.

    The extra hStar-1 row is the renormalized endpoint; the bottom slice
    interpolates onto it inside the soft block.
    """

    def __init__(self, hStar: int, N: int, perScale):
        if N <= hStar:
            raise DomainError(f"empty ladder: N={N} must exceed hStar={hStar}")
        missing = [h for h in range(hStar - 1, N + 1) if h not in perScale]
        if missing:
            raise DomainError(f"missing coupling rows at scales {missing}")
        self.hStar = hStar
        self.N = N
        self.perScale = {h: perScale[h] for h in range(hStar - 1, N + 1)}

    @classmethod
    def undressed(cls, params: PhysicalParams) -> "RunningCouplings":
        row = ScaleCouplings(1.0, 1.0, 1.0, 1.0, params.m, params.m)
        return cls(
            params.hStar,
            params.N,
            {h: row for h in range(params.hStar - 1, params.N + 1)},
        )

    @classmethod
    def zero_mass(cls, params: PhysicalParams) -> "RunningCouplings":
        row = ScaleCouplings(1.0, 1.0, 1.0, 1.0, 0.0, 0.0)
        return cls(
            params.hStar,
            params.N,
            {h: row for h in range(params.hStar - 1, params.N + 1)},
        )

    def at(self, h: int) -> ScaleCouplings:
        try:
            return self.perScale[h]
        except KeyError:
            raise DomainError(
                f"no coupling row at scale {h} "
                f"(table spans [{self.hStar - 1}, {self.N}])"
            ) from None

    def set_row(self, h: int, row: ScaleCouplings) -> None:
        if h not in self.perScale:
            raise DomainError(f"scale {h} outside the coupling table")
        self.perScale[h] = row

    def copy(self) -> "RunningCouplings":
        return RunningCouplings(self.hStar, self.N, self.perScale)


def _as_batch(k):
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 4:
        raise DomainError("momenta must have four components")
    if k.ndim == 1:
        return k[None, :], True
    return k.reshape(-1, 4), False


def dressed_inverse(k, Zplus, Zminus, mPlus, mMinus):
    """Inverse of the dressed kinetic operator at one momentum batch.

    The operator is block anti-diagonal in the kinetic part with chiral
    weights Zplus, Zminus and block diagonal in the masses; its inverse
    swaps the two masses in the numerator:

        [ mMinus*1        -i Zplus sp.k ]
        [ -i Zminus sm.k   mPlus*1      ]  /  (Zplus Zminus k^2 + mPlus mMinus)

    with sp, sm the chiral 2x2 vectors.  Couplings broadcast over the batch.
    """
    k = np.asarray(k, dtype=float)
    kp = np.einsum("nm,mab->nab", k, _SP)
    km = np.einsum("nm,mab->nab", k, _SM)
    k2 = np.einsum("nm,nm->n", k, k)
    Zp, Zm = np.broadcast_to(Zplus, k2.shape), np.broadcast_to(Zminus, k2.shape)
    mP, mM = np.broadcast_to(mPlus, k2.shape), np.broadcast_to(mMinus, k2.shape)
    denom = Zp * Zm * k2 + mP * mM
    if np.any(denom == 0):
        raise NumericError("dressed kinetic operator is singular on the batch")
    out = np.zeros(k2.shape + (4, 4), dtype=complex)
    out[:, :2, :2] = mM[:, None, None] * _EYE2
    out[:, :2, 2:] = -1j * Zp[:, None, None] * kp
    out[:, 2:, :2] = -1j * Zm[:, None, None] * km
    out[:, 2:, 2:] = mP[:, None, None] * _EYE2
    return out / denom[:, None, None]


def _interpolated_row(h, chi, rc):
    row, prev = rc.at(h), rc.at(h - 1)
    Zp = row.Zplus + (prev.Zplus - row.Zplus) * chi
    Zm = row.Zminus + (prev.Zminus - row.Zminus) * chi
    mP = row.mPlus + (prev.mPlus - row.mPlus) * chi
    mM = row.mMinus + (prev.mMinus - row.mMinus) * chi
    return Zp, Zm, mP, mM


def fermion_single_scale(h, k, rc: RunningCouplings, family: CutoffFamily):
    """Fermion propagator slice at scale h with interpolated couplings.

    The slice weight is the dyadic band at h > hStar and the whole soft
    block at h = hStar.  Inside the support of chi_h the couplings cross
    over from the row at h to the row at h-1, so the soft side of the slice
    propagates with the once-more-renormalized values.
    """
    kb, single = _as_batch(k)
    r = np.sqrt(np.einsum("nm,nm->n", kb, kb))
    band = family.band_radial(h, r)
    out = np.zeros((kb.shape[0], 4, 4), dtype=complex)
    mask = band != 0
    if np.any(mask):
        chi = family.chi_radial(h, r[mask])
        Zp, Zm, mP, mM = _interpolated_row(h, chi, rc)
        inv = dressed_inverse(kb[mask], Zp, Zm, mP, mM)
        out[mask] = band[mask, None, None] * inv
    return out[0] if single else out.reshape(np.shape(k)[:-1] + (4, 4))


def fermion_full(k, rc: RunningCouplings, family: CutoffFamily):
    """Sum of all slices: the cutoff fermion propagator."""
    kb, single = _as_batch(k)
    total = np.zeros((kb.shape[0], 4, 4), dtype=complex)
    for h in family.ladder():
        total += fermion_single_scale(h, kb, rc, family)
    return total[0] if single else total.reshape(np.shape(k)[:-1] + (4, 4))


def mass_zero_difference(h, k, rc: RunningCouplings, rcZero: RunningCouplings,
                         family: CutoffFamily):
    """Massive-minus-massless propagator slice at matched field strengths."""
    return fermion_single_scale(h, k, rc, family) - fermion_single_scale(
        h, k, rcZero, family
    )


def boson_propagator(q, params: PhysicalParams, family: CutoffFamily = None):
    """Heavy boson line with the ultraviolet cutoff: chi_N(|q|)/(q^2 + M^2)."""
    if family is None:
        family = params.family()
    qb, single = _as_batch(q)
    q2 = np.einsum("nm,nm->n", qb, qb)
    val = family.chi_radial(params.N, np.sqrt(q2)) / (q2 + params.M**2)
    return val[0] if single else val.reshape(np.shape(q)[:-1])


# ---------------------------------------------------------------------------
# Undressed slices for vertex integrands.  These carry unit field strength
# and the bare mass; the multiscale vertex sums analyze them directly.


def _free_core(kb, m):
    k2 = np.einsum("nm,nm->n", kb, kb)
    denom = k2 + m * m
    if np.any(denom == 0):
        raise NumericError("free propagator evaluated on the mass shell pole")
    num = -1j * slash(kb) + m * np.eye(4)
    return num / denom[:, None, None], denom


def free_slice(h, k, m, family: CutoffFamily):
    """Undressed propagator slice: band_h(|k|) (-i k. gamma + m)/(k^2+m^2)."""
    kb, single = _as_batch(k)
    r = np.sqrt(np.einsum("nm,nm->n", kb, kb))
    core, _ = _free_core(kb, m)
    out = family.band_radial(h, r)[:, None, None] * core
    return out[0] if single else out.reshape(np.shape(k)[:-1] + (4, 4))


def free_cutoff(k, m, family: CutoffFamily):
    """Undressed cutoff propagator: chi_N(|k|) (-i k.gamma + m)/(k^2+m^2)."""
    kb, single = _as_batch(k)
    r = np.sqrt(np.einsum("nm,nm->n", kb, kb))
    core, _ = _free_core(kb, m)
    out = family.chi_radial(family.N, r)[:, None, None] * core
    return out[0] if single else out.reshape(np.shape(k)[:-1] + (4, 4))


def _weighted_gradient(kb, m, weight, weight_prime):
    """Gradient of weight(|k|) * core(k); returns shape (4, n, 4, 4)."""
    r = np.sqrt(np.einsum("nm,nm->n", kb, kb))
    core, denom = _free_core(kb, m)
    w = weight(r)
    wp = weight_prime(r)
    radial = np.where(r > 0, wp / np.where(r > 0, r, 1.0), 0.0)
    out = np.empty((4,) + core.shape, dtype=complex)
    for a in range(4):
        unit = np.zeros(4)
        unit[a] = 1.0
        dcore = (-1j * slash(unit)[None, :, :]) / denom[:, None, None] - core * (
            2.0 * kb[:, a] / denom
        )[:, None, None]
        out[a] = (radial * kb[:, a])[:, None, None] * core + w[
            :, None, None
        ] * dcore
    return out


def free_slice_gradient(h, k, m, family: CutoffFamily):
    """Momentum gradient of free_slice; axis 0 indexes the derivative."""
    kb, single = _as_batch(k)
    out = _weighted_gradient(
        kb,
        m,
        lambda r: family.band_radial(h, r),
        lambda r: family.band_radial_prime(h, r),
    )
    return out[:, 0] if single else out


def free_cutoff_gradient(k, m, family: CutoffFamily):
    """Momentum gradient of free_cutoff; axis 0 indexes the derivative."""
    kb, single = _as_batch(k)
    out = _weighted_gradient(
        kb,
        m,
        lambda r: family.chi_radial(family.N, r),
        lambda r: family.chi_radial_prime(family.N, r),
    )
    return out[:, 0] if single else out

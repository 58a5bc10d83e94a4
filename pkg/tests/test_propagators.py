"""Multiscale propagator stack: block algebra, telescoping, decay rates.

The dressed block inverse is compared against numpy's dense inverse of
the explicitly assembled kinetic operator, which keeps the closed-form
numerator honest.
"""

import numpy as np
import pytest

from gyrolab.errors import DomainError, NumericError
from gyrolab.gammas import gamma, gamma5, slash
from gyrolab.propagators import (
    PhysicalParams,
    RunningCouplings,
    ScaleCouplings,
    boson_propagator,
    dressed_inverse,
    fermion_full,
    fermion_single_scale,
    free_cutoff,
    free_cutoff_gradient,
    free_slice,
    free_slice_gradient,
    mass_zero_difference,
)

_P = PhysicalParams(m=1e-3, M=1.0, lambda_=0.1, kappa=0.2, N=5)


def _assemble_operator(k, Zp, Zm, mP, mM):
    g5 = gamma5()
    proj_p = 0.5 * (np.eye(4) + g5)
    proj_m = 0.5 * (np.eye(4) - g5)
    kin = sum(k[mu] * gamma(mu) for mu in range(4))
    # chiral weights multiply the kinetic part from the respective side
    return (
        1j * (Zp * proj_p @ kin + Zm * proj_m @ kin)
        + mP * proj_p
        + mM * proj_m
    )


def test_dressed_inverse_against_dense_inverse():
    rng = np.random.default_rng(19)
    for _ in range(25):
        k = rng.normal(size=4) * rng.uniform(0.1, 5.0)
        Zp, Zm = rng.uniform(0.5, 1.5, size=2)
        mP, mM = rng.uniform(0.05, 0.8, size=2)
        got = dressed_inverse(k[None, :], Zp, Zm, mP, mM)[0]
        want = np.linalg.inv(_assemble_operator(k, Zp, Zm, mP, mM))
        assert np.max(np.abs(got - want)) <= 1e-12


def test_dressed_inverse_rejects_singular_batch():
    with pytest.raises(NumericError):
        dressed_inverse(np.zeros((1, 4)), 1.0, 1.0, 0.0, 0.0)


def test_parameter_validation():
    with pytest.raises(DomainError):
        PhysicalParams(m=-1.0, M=1.0, lambda_=0.1, kappa=0.0, N=4)
    with pytest.raises(DomainError):
        PhysicalParams(m=0.0, M=1.0, lambda_=0.1, kappa=0.0, N=4)
    with pytest.raises(DomainError):
        PhysicalParams(m=1e-3, M=0.0, lambda_=0.1, kappa=0.0, N=4)
    with pytest.raises(DomainError):
        PhysicalParams(m=1e-3, M=40.0, lambda_=0.1, kappa=0.0, N=5)
    with pytest.raises(DomainError):
        PhysicalParams(m=1e-3, M=1.0, lambda_=0.1, kappa=0.0, N=-11)
    with pytest.warns(UserWarning):
        PhysicalParams(m=0.2, M=1.0, lambda_=0.1, kappa=0.0, N=4)
    massless = PhysicalParams(m=0.0, M=1.0, lambda_=0.1, kappa=0.0, N=4,
                              hStarOverride=-8)
    assert massless.hStar == -8
    assert _P.hStar == -10
    assert _P.cutoff == 32.0


def test_coupling_table_shape_and_access():
    rc = RunningCouplings.undressed(_P)
    assert set(rc.perScale) == set(range(_P.hStar - 1, _P.N + 1))
    row = rc.at(_P.N)
    assert row.Zplus == 1.0 and row.mPlus == _P.m
    with pytest.raises(DomainError):
        rc.at(_P.N + 1)
    with pytest.raises(DomainError):
        RunningCouplings(0, 3, {h: row for h in range(0, 3)})  # missing rows
    clone = rc.copy()
    clone.set_row(0, ScaleCouplings(2.0, 1.0, 1.0, 1.0, 0.5, 0.5))
    assert rc.at(0).Zplus == 1.0
    zero = RunningCouplings.zero_mass(_P)
    assert zero.at(0).mPlus == 0.0


def test_single_scale_slice_support():
    fam = _P.family()
    rc = RunningCouplings.undressed(_P)
    h = 2
    outside = np.array(
        [[0.9 * 2.0 ** (h - 1), 0, 0, 0], [1.1 * 2.0 ** (h + 1), 0, 0, 0]]
    )
    assert np.max(np.abs(fermion_single_scale(h, outside, rc, fam))) == 0.0
    inside = np.array([[2.0**h, 0.1, 0, 0]])
    assert np.max(np.abs(fermion_single_scale(h, inside, rc, fam))) > 0.0


def test_free_coupling_telescoping():
    # with unit couplings the slices must reassemble the cutoff propagator
    fam = _P.family()
    rc = RunningCouplings.undressed(_P)
    rng = np.random.default_rng(23)
    ks = rng.normal(size=(40, 4)) * 6.0
    got = fermion_full(ks, rc, fam)
    want = free_cutoff(ks, _P.m, fam)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_deep_infrared_is_exact():
    fam = _P.family()
    rc = RunningCouplings.undressed(_P)
    rng = np.random.default_rng(29)
    k = rng.normal(size=(10, 4))
    k *= (0.5 * _P.m * rng.uniform(0.05, 1.0, 10) / np.linalg.norm(k, axis=1))[:, None]
    got = fermion_full(k, rc, fam)
    want = np.linalg.inv(1j * slash(k) + _P.m * np.eye(4))
    assert np.max(np.abs(got - want)) <= 1e-12


def test_slice_sup_norm_decays_with_scale():
    # operator norm of the scale-h slice behaves like 2^-h: slope -1 +- 0.1
    fam = _P.family()
    rc = RunningCouplings.undressed(_P)
    dirs = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0.5, 0.5, 0.5, 0.5]], float)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    hs = np.arange(_P.hStar, _P.N + 1)
    sup = []
    for h in hs:
        rads = np.linspace(2.0 ** (h - 1), 2.0 ** (h + 1), 40)
        ks = (rads[:, None, None] * dirs[None, :, :]).reshape(-1, 4)
        g = fermion_single_scale(h, ks, rc, fam)
        sup.append(np.max(np.linalg.norm(g, ord=2, axis=(1, 2))))
    slope = np.polyfit(hs, np.log2(sup), 1)[0]
    assert abs(slope + 1.0) <= 0.1


def test_mass_zero_difference_decays_twice_as_fast():
    # above the bottom slice the massive-massless difference goes like 2^-2h;
    # the bottom slice is excluded because the massless soft block has no
    # infrared regulator
    fam = _P.family()
    rc = RunningCouplings.undressed(_P)
    rc0 = RunningCouplings.zero_mass(_P)
    dirs = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], float)
    hs = np.arange(_P.hStar + 1, _P.N + 1)
    sup = []
    for h in hs:
        rads = np.linspace(2.0 ** (h - 1), 2.0 ** (h + 1), 40)
        ks = (rads[:, None, None] * dirs[None, :, :]).reshape(-1, 4)
        d = mass_zero_difference(h, ks, rc, rc0, fam)
        sup.append(np.max(np.linalg.norm(d, ord=2, axis=(1, 2))))
    slope = np.polyfit(hs, np.log2(sup), 1)[0]
    assert abs(slope + 2.0) <= 0.2


def test_massless_slices_are_block_antidiagonal():
    params = PhysicalParams(m=0.0, M=1.0, lambda_=0.1, kappa=0.0, N=4,
                            hStarOverride=-6)
    fam = params.family()
    rc0 = RunningCouplings.zero_mass(params)
    rng = np.random.default_rng(31)
    ks = rng.normal(size=(30, 4))
    for h in (-6, -2, 0, 3):
        g = fermion_single_scale(h, ks, rc0, fam)
        assert np.max(np.abs(g[:, :2, :2])) == 0.0
        assert np.max(np.abs(g[:, 2:, 2:])) == 0.0
        # equivalently: anticommutes with the chirality matrix
        g5 = gamma5()
        assert np.max(np.abs(g5 @ g + g @ g5)) == 0.0


def test_interpolated_couplings_take_over_in_the_soft_region():
    # below the crossover the slice must propagate with the h-1 row
    fam = _P.family()
    rc = RunningCouplings.undressed(_P)
    h = 0
    dressed = rc.copy()
    dressed.set_row(h, ScaleCouplings(1.4, 1.4, 1.0, 1.0, _P.m, _P.m))
    dressed.set_row(h - 1, ScaleCouplings(1.2, 1.2, 1.0, 1.0, _P.m, _P.m))
    # on the soft plateau (|k| <= 2^h) the crossover weight is exactly 1,
    # so the slice propagates with the h-1 row alone
    k = np.array([[0.7 * 2.0**h, 0.0, 0.0, 0.0]])
    got = fermion_single_scale(h, k, dressed, fam)[0]
    band = fam.band_radial(h, np.linalg.norm(k[0]))
    want = band * dressed_inverse(k, 1.2, 1.2, _P.m, _P.m)[0]
    assert np.max(np.abs(got - want)) <= 1e-14
    # at |k| = 1.5 * 2^h the blend is exactly one half: mean of the rows
    k = np.array([[1.5 * 2.0**h, 0.0, 0.0, 0.0]])
    got = fermion_single_scale(h, k, dressed, fam)[0]
    band = fam.band_radial(h, np.linalg.norm(k[0]))
    want = band * dressed_inverse(k, 1.3, 1.3, _P.m, _P.m)[0]
    assert np.max(np.abs(got - want)) <= 1e-14


def test_boson_line_value_and_support():
    q = np.array([0.5, 0.1, 0.0, 0.0])
    want = 1.0 / (0.26 + _P.M**2)
    assert abs(boson_propagator(q, _P) - want) <= 1e-15
    beyond = np.array([2.1 * _P.cutoff, 0.0, 0.0, 0.0])
    assert boson_propagator(beyond, _P) == 0.0
    batch = boson_propagator(np.stack([q, beyond]), _P)
    assert batch.shape == (2,)


def test_slice_gradients_match_finite_differences():
    fam = _P.family()
    k = np.array([[0.9, 0.3, -0.2, 0.5]])
    g = free_slice_gradient(0, k, _P.m, fam)
    step = 1e-6
    for a in range(4):
        d = np.zeros(4)
        d[a] = step
        fd = (free_slice(0, k + d, _P.m, fam) - free_slice(0, k - d, _P.m, fam)) / (
            2 * step
        )
        assert np.max(np.abs(g[a] - fd)) <= 1e-8
    # cutoff version probed inside the roll-off band
    k = np.array([[18.0, 6.0, -4.0, 9.0]])
    g = free_cutoff_gradient(k, _P.m, fam)
    for a in range(4):
        d = np.zeros(4)
        d[a] = step
        fd = (free_cutoff(k + d, _P.m, fam) - free_cutoff(k - d, _P.m, fam)) / (
            2 * step
        )
        assert np.max(np.abs(g[a] - fd)) <= 1e-8


def test_free_propagator_rejects_the_pole():
    fam = PhysicalParams(m=0.0, M=1.0, lambda_=0.0, kappa=0.0, N=4,
                         hStarOverride=-6).family()
    with pytest.raises(NumericError):
        free_cutoff(np.zeros(4), 0.0, fam)

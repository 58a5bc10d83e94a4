"""Discrete Euclidean rotation symmetry and its executable consequences.

The lattice-compatible symmetry group is generated by quarter turns in
the six coordinate planes.  It acts on momenta through orthogonal
four-by-four matrices and on spinors through a block-diagonal unitary
double cover; the two actions are intertwined by the gamma matrices.
Averaging tensors over the finite group kills every odd-rank invariant
and projects rank-two tensors onto the identity, which is what forbids
counterterms beyond the handful tracked by the coupling flow.  The
chiral protection of the mass stepping terms is checked through the
flow module directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, NumericError
from .gammas import _GAMMA_STACK, _SIGMA

_QUARTER = np.pi / 2.0

# generators of rotations inside the spatial coordinate planes; the
# entry pattern is fixed by the spinor side through the intertwining
# identity, see the module tests
_SPATIAL = np.zeros((3, 4, 4))
_SPATIAL[0, 2, 3], _SPATIAL[0, 3, 2] = 1.0, -1.0
_SPATIAL[1, 1, 3], _SPATIAL[1, 3, 1] = -1.0, 1.0
_SPATIAL[2, 1, 2], _SPATIAL[2, 2, 1] = 1.0, -1.0

# generators of rotations mixing the Euclidean time axis with one
# spatial axis
_TIME = np.zeros((3, 4, 4))
for _a in range(3):
    _TIME[_a, 0, _a + 1], _TIME[_a, _a + 1, 0] = 1.0, -1.0

_PAULI = np.stack([_SIGMA[1], _SIGMA[2], _SIGMA[3]])

_CLOSURE_GUARD = 10**4


def spatial_plane_generators():
    """Skew generators of the three spatial-plane rotations."""
    return _SPATIAL.copy()


def time_plane_generators():
    """Skew generators of the three time-mixing rotations."""
    return _TIME.copy()


@dataclass(frozen=True)
class GroupElement:
    """Rotation angles in the spatial planes and the time-mixing planes.

    Group elements proper live on the quarter-turn grid; continuous
    angles are accepted because the intertwining identity extends to
    them, and `on_quarter_turn_grid` tells the two cases apart.
    """

    thetaVec: tuple
    xiVec: tuple

    def __post_init__(self):
        for name in ("thetaVec", "xiVec"):
            vec = tuple(float(x) for x in getattr(self, name))
            if len(vec) != 3 or not all(np.isfinite(vec)):
                raise DomainError(f"{name} must be three finite angles")
            object.__setattr__(self, name, vec)

    @classmethod
    def quarter_turns(cls, thetaSteps, xiSteps) -> "GroupElement":
        """Element from integer numbers of quarter turns per plane."""
        steps = list(thetaSteps) + list(xiSteps)
        if len(steps) != 6 or any(s != int(s) for s in steps):
            raise DomainError("quarter-turn steps must be six integers")
        return cls(
            tuple(_QUARTER * (int(s) % 4) for s in steps[:3]),
            tuple(_QUARTER * (int(s) % 4) for s in steps[3:]),
        )

    @property
    def on_quarter_turn_grid(self) -> bool:
        angles = np.array(self.thetaVec + self.xiVec)
        steps = angles / _QUARTER
        return bool(np.allclose(steps, np.round(steps), atol=1e-12))


def vector_rep(g: GroupElement):
    """Orthogonal action on four-vectors."""
    theta = np.asarray(g.thetaVec)
    xi = np.asarray(g.xiVec)
    return expm(
        np.einsum("a,aij->ij", theta, _SPATIAL) + np.einsum("a,aij->ij", xi, _TIME)
    )


def spinor_rep(g: GroupElement):
    """Unitary double-cover action on spinors.

    Block-diagonal: the two chiralities see the sum and the difference
    of the spatial and time-mixing angles.
    """
    theta = np.asarray(g.thetaVec)
    xi = np.asarray(g.xiVec)
    top = expm(0.5j * np.einsum("a,aij->ij", theta + xi, _PAULI))
    bottom = expm(0.5j * np.einsum("a,aij->ij", theta - xi, _PAULI))
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = top
    out[2:, 2:] = bottom
    return out


def intertwiner_check(g: GroupElement) -> float:
    """Residual of the identity tying the two representations together.

    Conjugating each gamma matrix by the spinor action must reproduce
    the vector action row by row; returns the worst entry deviation.
    """
    spinor = spinor_rep(g)
    vector = vector_rep(g)
    conj = np.einsum(
        "ij,rjk,kl->ril", np.linalg.inv(spinor), _GAMMA_STACK, spinor
    )
    target = np.einsum("rm,mij->rij", vector, _GAMMA_STACK.astype(complex))
    return float(np.abs(conj - target).max())


@dataclass(frozen=True)
class IrreducibilityWitness:
    rank: int
    determinant: float
    spansFully: bool


def irreducibility_witness(elements=None) -> IrreducibilityWitness:
    """Spanning check for the orbit of the first basis vector.

    The default four elements (identity plus one quarter turn per
    time-mixing plane) already carry e0 onto a full basis, witnessing
    that the vector representation has no invariant subspace.
    """
    if elements is None:
        elements = [
            GroupElement.quarter_turns((0, 0, 0), (0, 0, 0)),
            GroupElement.quarter_turns((0, 0, 0), (1, 0, 0)),
            GroupElement.quarter_turns((0, 0, 0), (0, -1, 0)),
            GroupElement.quarter_turns((0, 0, 0), (0, 0, 1)),
        ]
    e0 = np.array([1.0, 0.0, 0.0, 0.0])
    images = np.stack([vector_rep(g) @ e0 for g in elements])
    rank = int(np.linalg.matrix_rank(images, tol=1e-10))
    det = float(np.linalg.det(images)) if images.shape[0] == 4 else 0.0
    return IrreducibilityWitness(
        rank=rank, determinant=det, spansFully=(rank == 4)
    )


def _quarter_turn_matrices():
    """The twelve signed-permutation quarter turns, exact integer form."""
    out = []
    for gens in (_SPATIAL, _TIME):
        for a in range(3):
            for sign in (1.0, -1.0):
                mat = expm(sign * _QUARTER * gens[a])
                snapped = np.round(mat)
                if np.abs(mat - snapped).max() > 1e-13:
                    raise NumericError("quarter turn failed to snap to integers")
                out.append(snapped.astype(np.int64))
    return out


@lru_cache(maxsize=1)
def _group_closure_cached():
    """Breadth-first closure of the quarter turns, with generator words.

    Returns a dict mapping each group matrix (as an int tuple) to the
    generator-index word that produces it; the identity has the empty
    word.  Every element is a signed permutation matrix.
    """
    generators = _quarter_turn_matrices()
    identity = np.eye(4, dtype=np.int64)

    def key(mat):
        return tuple(int(x) for x in mat.ravel())

    table = {key(identity): ()}
    frontier = [identity]
    while frontier:
        fresh = []
        for mat in frontier:
            word = table[key(mat)]
            for idx, gen in enumerate(generators):
                nxt = gen @ mat
                k = key(nxt)
                if k not in table:
                    if len(table) >= _CLOSURE_GUARD:
                        raise NumericError(
                            "group closure exceeded the size guard "
                            f"of {_CLOSURE_GUARD} elements"
                        )
                    table[k] = (idx,) + word
                    fresh.append(nxt)
        frontier = fresh
    return table


def group_closure():
    """All elements of the finite rotation group as integer matrices."""
    return [
        np.array(k, dtype=np.int64).reshape(4, 4) for k in _group_closure_cached()
    ]


def _generator_elements():
    """Quarter-turn group elements in the same order as the matrices."""
    out = []
    for block in range(2):
        for a in range(3):
            for sign in (1, -1):
                theta = [0, 0, 0]
                xi = [0, 0, 0]
                (theta if block == 0 else xi)[a] = sign
                out.append(GroupElement.quarter_turns(theta, xi))
    return out


def spinor_lift(word):
    """Product of the spinor images of a generator word.

    Matches the left-to-right matrix order used by the closure table,
    so the lift is a homomorphism up to the overall double-cover sign.
    """
    gens = _generator_elements()
    out = np.eye(4, dtype=complex)
    for idx in word:
        out = out @ spinor_rep(gens[idx])
    return out


def closure_word_for(matrix):
    """Generator word reproducing a given group matrix."""
    table = _group_closure_cached()
    k = tuple(int(x) for x in np.asarray(matrix).ravel())
    if k not in table:
        raise DomainError("matrix is not an element of the rotation group")
    return table[k]


def invariant_tensor_average(rank: int, tensor):
    """Group average of a rank-one or rank-two tensor.

    The average over the full finite group annihilates vectors and
    projects matrices onto their trace part, which is the executable
    form of the Schur argument restricting the possible counterterms.
    """
    if rank not in (1, 2):
        raise DomainError("rank must be 1 or 2")
    tensor = np.asarray(tensor, dtype=complex)
    if tensor.shape != (4,) * rank:
        raise DomainError(f"rank-{rank} tensor must have shape {(4,) * rank}")
    members = group_closure()
    acc = np.zeros_like(tensor)
    for mat in members:
        u = mat.astype(float)
        if rank == 1:
            acc += u @ tensor
        else:
            acc += u @ tensor @ u.T
    return acc / len(members)


def chiral_mass_protection_check(params, quad=None) -> float:
    """Largest mass stepping term across the ladder at zero mass.

    The massless theory is invariant under independent phase rotations
    of the two chiralities, so no mass term can be generated; this runs
    the flow extraction at every scale and reports the worst violation.
    """
    from .flow import beta_at_scale
    from .propagators import RunningCouplings

    if params.m != 0.0:
        raise DomainError("mass protection check needs a zero-mass parameter set")
    table = RunningCouplings.zero_mass(params)
    family = params.family()
    worst = 0.0
    for h in family.ladder():
        beta = beta_at_scale(h, table, params, quad=quad, family=family)
        worst = max(worst, abs(beta.betaMplus), abs(beta.betaMminus))
    return worst

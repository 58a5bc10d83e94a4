"""Adaptive tensor-product Gauss-Kronrod quadrature and angular reductions.

The integrals in this package are low-dimensional (one to three axes after
symmetry reduction) but must be evaluated to tight relative tolerances with
honest error estimates, including integrands supported on narrow annular
bands.  The engine below subdivides axis-aligned boxes, ranks cells by an
embedded Gauss 7 / Kronrod 15 error indicator, and always splits the axis
that dominates the indicator.  Everything is deterministic: the refinement
order depends only on the integrand values, never on hashing or timing.

Angular reductions used by the loop integrals live here too: exact
six-direction octahedral averaging for integrands of spatial degree at most
three, and a four-node azimuthal average for geometries with a single
distinguished spatial axis.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, QuadratureError

# Kronrod 15 abscissae on [-1, 1] (nonnegative half) and weights, with the
# embedded Gauss 7 weights on the shared nodes.  Values are the classical
# double-precision constants.
_XGK = np.array(
    [
        0.9914553711208126,
        0.9491079123427585,
        0.8648644233597691,
        0.7415311855993944,
        0.5860872354676911,
        0.4058451513773972,
        0.2077849550078985,
        0.0,
    ]
)
_WGK = np.array(
    [
        0.0229353220105292,
        0.0630920926299785,
        0.1047900103222502,
        0.1406532597155259,
        0.1690047266392679,
        0.1903505780647854,
        0.2044329400752989,
        0.2094821410847278,
    ]
)
_WG = np.array(
    [
        0.1294849661688697,
        0.2797053914892767,
        0.3818300505051189,
        0.4179591836734694,
    ]
)


def _build_rule():
    # Full 15-point rule sorted ascending, plus the Gauss 7 weights scattered
    # onto the shared nodes (zeros elsewhere) so both sums reuse one grid.
    nodes = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
    w15 = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
    w7 = np.zeros(15)
    # Gauss nodes sit at every other Kronrod abscissa: indices 1,3,5,7 in the
    # half rule, mirrored in the full rule.
    for j, wq in zip((1, 3, 5), _WG[:3]):
        w7[j] = wq
        w7[14 - j] = wq
    w7[7] = _WG[3]
    return nodes, w15, w7


_NODES, _W15, _W7 = _build_rule()
_NPTS = _NODES.size


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and budget for one adaptive integration."""

    relTolerance: float = 1.0e-8
    absTolerance: float = 1.0e-14
    maxSubdivisions: int = 4000

    def __post_init__(self):
        if self.relTolerance < 0 or self.absTolerance < 0:
            raise DomainError("quadrature tolerances must be nonnegative")
        if self.relTolerance == 0 and self.absTolerance == 0:
            raise DomainError("at least one quadrature tolerance must be positive")
        if self.maxSubdivisions < 1:
            raise DomainError("maxSubdivisions must be at least 1")


class _Cell:
    __slots__ = ("lo", "hi", "value", "err", "err_axes")

    def __init__(self, lo, hi, value, err, err_axes):
        self.lo = lo
        self.hi = hi
        self.value = value
        self.err = err
        self.err_axes = err_axes


def _cell_grids(los, his, dim):
    """Tensor grids for a batch of cells.

    los, his: (ncell, dim).  Returns points (ncell * 15**dim, dim) ordered
    cell-major, plus the per-axis node index arrays used to form weights.
    """
    ncell = los.shape[0]
    axes_1d = []
    for j in range(dim):
        mid = 0.5 * (los[:, j] + his[:, j])
        half = 0.5 * (his[:, j] - los[:, j])
        axes_1d.append(mid[:, None] + half[:, None] * _NODES[None, :])
    # mesh over dim copies of the 15 nodes, cell by cell
    idx = np.indices((_NPTS,) * dim).reshape(dim, -1)
    pts = np.empty((ncell, idx.shape[1], dim))
    for j in range(dim):
        pts[:, :, j] = axes_1d[j][:, idx[j]]
    return pts.reshape(ncell * idx.shape[1], dim), idx


def _tensor_weights(idx, dim):
    """Kronrod weights and one embedded-Gauss variant per axis, on the grid."""
    wk = np.ones(idx.shape[1])
    for j in range(dim):
        wk = wk * _W15[idx[j]]
    variants = []
    for j in range(dim):
        w = np.ones(idx.shape[1])
        for i in range(dim):
            w = w * (_W7[idx[i]] if i == j else _W15[idx[i]])
        variants.append(w)
    return wk, np.array(variants)


def _eval_cells(f, los, his, dim, wk, wvar):
    """Evaluate a batch of cells: Kronrod values, total error, split axes."""
    ncell = los.shape[0]
    pts, _ = _cell_grids(los, his, dim)
    vals = np.asarray(f(pts))
    if vals.shape[0] != pts.shape[0]:
        raise DomainError(
            "integrand must return one value per point "
            f"(got {vals.shape[0]} for {pts.shape[0]} points)"
        )
    vals = vals.reshape(ncell, -1, *vals.shape[1:])
    jac = np.prod(0.5 * (his - los), axis=1)
    flat = vals.reshape(ncell, vals.shape[1], -1)
    kron = np.einsum("p,cps->cs", wk, flat)
    cells = []
    for c in range(ncell):
        err_axes = np.empty(dim)
        for j in range(dim):
            gauss_j = wvar[j] @ flat[c]
            err_axes[j] = np.max(np.abs(kron[c] - gauss_j))
        err_axes *= abs(jac[c])
        value = (kron[c] * jac[c]).reshape(vals.shape[2:])
        cells.append(_Cell(los[c], his[c], value, float(err_axes.sum()), err_axes))
    return cells


def adaptive_quadrature(f, box, spec=None, initial_grid=None):
    """Integrate a batch-evaluating integrand over an axis-aligned box.

    f takes points of shape (n, dim) and returns shape (n,) or (n, ...)
    values (real or complex).  Returns (value, error_estimate).  Raises
    QuadratureError, carrying the best value and estimate, if the tolerance
    is not reached within the subdivision budget.

    initial_grid, when given, lists per axis how many equal slices to cut
    before refinement starts; use it when the integrand lives on a narrow
    band a single coarse cell could miss entirely.
    """
    if spec is None:
        spec = QuadratureSpec()
    box = [(float(lo), float(hi)) for lo, hi in box]
    dim = len(box)
    if dim < 1 or dim > 3:
        raise DomainError("adaptive_quadrature supports 1 to 3 axes")
    for lo, hi in box:
        if not hi > lo:
            raise DomainError(f"empty integration axis [{lo}, {hi}]")

    if initial_grid is None:
        initial_grid = [1] * dim
    if len(initial_grid) != dim:
        raise DomainError("initial_grid must give one slice count per axis")
    edges = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(box, initial_grid)]
    counts = [len(e) - 1 for e in edges]
    cell_idx = np.indices(counts).reshape(dim, -1).T
    los = np.array([[edges[j][i[j]] for j in range(dim)] for i in cell_idx])
    his = np.array([[edges[j][i[j] + 1] for j in range(dim)] for i in cell_idx])

    _, idx = _cell_grids(los[:1], his[:1], dim)
    wk, wvar = _tensor_weights(idx, dim)

    heap = []
    counter = 0
    total = None
    total_err = 0.0
    for cell in _eval_cells(f, los, his, dim, wk, wvar):
        total = cell.value if total is None else total + cell.value
        total_err += cell.err
        heapq.heappush(heap, (-cell.err, counter, cell))
        counter += 1

    splits = 0
    while True:
        scale = np.max(np.abs(total)) if np.ndim(total) else abs(total)
        tol = max(spec.absTolerance, spec.relTolerance * float(scale))
        if total_err <= tol:
            return total, total_err
        if splits >= spec.maxSubdivisions:
            raise QuadratureError(
                f"subdivision budget {spec.maxSubdivisions} exhausted "
                f"(error {total_err:.3e}, needed {tol:.3e})",
                value=total,
                error_estimate=total_err,
            )
        nbatch = min(8, spec.maxSubdivisions - splits, len(heap))
        parents = [heapq.heappop(heap)[2] for _ in range(nbatch)]
        child_lo = []
        child_hi = []
        for cell in parents:
            axis = int(np.argmax(cell.err_axes))
            mid = 0.5 * (cell.lo[axis] + cell.hi[axis])
            lo2 = cell.lo.copy()
            lo2[axis] = mid
            hi1 = cell.hi.copy()
            hi1[axis] = mid
            child_lo.extend([cell.lo, lo2])
            child_hi.extend([hi1, cell.hi])
            total = total - cell.value
            total_err -= cell.err
        splits += nbatch
        children = _eval_cells(
            f, np.array(child_lo), np.array(child_hi), dim, wk, wvar
        )
        for cell in children:
            total = total + cell.value
            total_err += cell.err
            heapq.heappush(heap, (-cell.err, counter, cell))
            counter += 1


# ---------------------------------------------------------------------------
# Angular reductions.

# Six unit spatial directions (the octahedron vertices).  Averaging over them
# with equal weight 1/6 reproduces the continuum angular average exactly for
# any integrand of degree at most three in the direction cosines; the loop
# integrands reduced this way are at most quadratic.
OCTAHEDRAL_DIRECTIONS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)

# Azimuthal quarter-turn nodes: exact for trigonometric degree at most three.
_AZIMUTH = np.array([0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi])

# Solid-angle factors for the reduced measures, divided by the (2 pi)^4 of
# the momentum-space normalization.
FOUR_PI_MEASURE = 4.0 * np.pi / (2.0 * np.pi) ** 4
TWO_PI_MEASURE = 2.0 * np.pi / (2.0 * np.pi) ** 4


def octahedral_embed(q0, r):
    """Four-vectors (q0, r * n) for the six octahedral directions.

    q0, r: arrays of shape (n,).  Returns shape (n, 6, 4).  Radial weight for
    the full momentum integral is FOUR_PI_MEASURE * r**2 per point, with the
    directional mean (weight 1/6 each) taken over axis 1.
    """
    q0 = np.asarray(q0, dtype=float)
    r = np.asarray(r, dtype=float)
    out = np.zeros((q0.size, 6, 4))
    out[:, :, 0] = q0[:, None]
    out[:, :, 1:] = r[:, None, None] * OCTAHEDRAL_DIRECTIONS[None, :, :]
    return out


def orthonormal_frame(axis):
    """Two unit vectors completing a right-handed frame with a given axis."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise DomainError("cannot build a frame around the zero vector")
    axis = axis / norm
    seed = np.array([1.0, 0.0, 0.0])
    if abs(axis @ seed) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    e1 = seed - (seed @ axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


def collinear_embed(q0, r, u, axis):
    """Four-vectors for geometries whose externals share one spatial axis.

    q0, r, u: arrays of shape (n,); u is the direction cosine against the
    axis.  Returns shape (n, 4, 4): the four azimuthal nodes of the spatial
    momentum r*(u*axis + sqrt(1-u^2)*e_perp(phi)).  Radial weight is
    TWO_PI_MEASURE * r**2 per point, with the azimuthal mean (weight 1/4
    each) over axis 1; u is integrated over [-1, 1].
    """
    q0 = np.asarray(q0, dtype=float)
    r = np.asarray(r, dtype=float)
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    axis = np.asarray(axis, dtype=float)
    nhat = axis / np.linalg.norm(axis)
    e1, e2 = orthonormal_frame(nhat)
    s = np.sqrt(1.0 - u * u)
    out = np.zeros((q0.size, 4, 4))
    out[:, :, 0] = q0[:, None]
    for i, phi in enumerate(_AZIMUTH):
        direction = (
            u[:, None] * nhat[None, :]
            + (s * np.cos(phi))[:, None] * e1[None, :]
            + (s * np.sin(phi))[:, None] * e2[None, :]
        )
        out[:, i, 1:] = r[:, None] * direction
    return out

"""Multiscale triangle vertex at a finite ultraviolet cutoff.

The triangle is the one-loop vertex correction built from two undressed
fermion slices and the heavy boson line.  Pairs of slices whose lower
scale sits at the ladder bottom are summed as they stand; every pair of
higher slices is summed after subtracting its value at zero external
momenta, which is the renormalization step that makes the cutoff limit
finite.  Slices more than two octaves apart never overlap inside the
allowed external window and are dropped.

All external momenta handled here lie on the Euclidean time axis, so
every loop integrand depends on the direction of the spatial loop
momentum through degree three at most and the six-direction angular
average is exact; the remaining two-dimensional integrals run in polar
coordinates over the support annulus of the slice pair.

The same vertex admits a closed one-dimensional form after a Feynman
parametrization and an exact angular cancellation of the quadratic
frequency terms; that form, its analytic parameter derivatives, and
numerical probes of the cancellation mechanism live here as well.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .cutoffs import CutoffFamily
from .errors import DomainError, NumericError
from .gammas import gamma, gamma5, upsilon
from .jets import derivatives_from_jet, jet_div, jet_from_poly
from .propagators import (
    PhysicalParams,
    boson_propagator,
    free_cutoff,
    free_cutoff_gradient,
    free_slice,
)
from .quadrature import (
    FOUR_PI_MEASURE,
    TWO_PI_MEASURE,
    QuadratureSpec,
    adaptive_quadrature,
    collinear_embed,
    octahedral_embed,
)

# slice pairs further apart than this never overlap for external momenta
# inside the allowed window
_PAIR_WINDOW = 2

_GAMMA_STACK = np.stack([gamma(mu) for mu in range(4)])

# spatial permutation signs for the antisymmetric trace term
_EPS3_TERMS = (
    (1, 2, 3, 1.0),
    (2, 3, 1, 1.0),
    (3, 1, 2, 1.0),
    (3, 2, 1, -1.0),
    (1, 3, 2, -1.0),
    (2, 1, 3, -1.0),
)


@dataclasses.dataclass(frozen=True)
class TriangleResult:
    """Vertex matrices per vector index with the accumulated error."""

    value: np.ndarray
    errorEstimate: float
    scalesSummed: range

    def __post_init__(self):
        self.value.setflags(write=False)


@dataclasses.dataclass(frozen=True)
class CutoffScanPoint:
    Lambda: float
    value: complex
    deviation: float
    errorEstimate: float


@dataclasses.dataclass(frozen=True)
class CutoffRemovalScan:
    """Cutoff ladder of vertex values against the richest point."""

    points: tuple
    slope: float
    referenceLambda: float


# ---------------------------------------------------------------------------
# Closed-form pieces.


def t_poly(z, q, params: PhysicalParams):
    """Numerator polynomial of the reduced triangle integrand.

    Quadratic in the loop frequency, linear in the chirality mix through
    kappa^2; the (q0)^2 - q.q/3 combination is the part that cancels
    under the exact angular average.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise DomainError("momenta must have four components")
    z = complex(z)
    k2 = params.kappa**2
    q0 = q[..., 0]
    qs = np.sum(q[..., 1:] ** 2, axis=-1)
    even = (k2 + 1.0) * (2.0 * z * z - 3.0 * z * q0 + q0 * q0 - qs / 3.0)
    odd = 2.0j * params.m * (k2 - 1.0) * (z - q0)
    out = even + odd
    return complex(out) if out.ndim == 0 else out


def delta_sq(x, z, params: PhysicalParams):
    """Feynman-parametrized denominator mass: interpolates M^2 to m^2."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("Feynman parameter must lie in [0, 1]")
    z = complex(z)
    out = (1.0 - x) * params.M**2 + z * z * x * (1.0 - x) + params.m**2 * x
    return complex(out) if out.ndim == 0 else out


def feynman_param_identity_check(a, b, quad: QuadratureSpec = None):
    """Compare 1/(a b^2) against its one-parameter integral form.

    Returns (lhs, rhs, diff) with rhs from adaptive quadrature of
    2x/[a(1-x)+bx]^3 over [0, 1].
    """
    a, b = complex(a), complex(b)
    if a == 0 or b == 0:
        raise DomainError("the identity needs nonvanishing denominators")
    # distance from the segment a -> b to the origin guards the x-path
    d = b - a
    t = np.clip(-np.real(np.conj(d) * a) / max(abs(d) ** 2, 1e-300), 0.0, 1.0)
    if abs(a + t * d) < 1e-9 * max(abs(a), abs(b)):
        raise DomainError("denominator vanishes along the Feynman path")
    lhs = 1.0 / (a * b * b)

    def integrand(pts):
        x = pts[:, 0]
        den = a * (1.0 - x) + b * x
        return 2.0 * x / den**3

    rhs, _ = adaptive_quadrature(integrand, [(0.0, 1.0)], quad)
    return lhs, complex(rhs), abs(lhs - rhs)


def _a2_numerator_coeffs(x, params: PhysicalParams):
    # closed-form integrand is c2*z^2 + c1*z over the denominator mass
    k2 = params.kappa**2
    c2 = (k2 + 1.0) * x * (x * x - 3.0 * x + 2.0)
    c1 = 2.0j * params.m * (k2 - 1.0) * x * (1.0 - x)
    return c1, c2


def _check_holomorphy_window(z, params):
    if abs(z) >= 0.5 * params.M:
        warnings.warn(
            "argument leaves the holomorphy disk |z| < M/2; the "
            "closed-form denominator may approach zero",
            stacklevel=3,
        )


def a2_of_z(z, params: PhysicalParams, quad: QuadratureSpec = None):
    """Closed-form anomaly kernel as a one-dimensional integral.

    Analytic in z on the disk |z| < M/2; vanishes identically at z = 0.
    """
    z = complex(z)
    _check_holomorphy_window(z, params)
    M2 = params.M**2

    def integrand(pts):
        x = pts[:, 0]
        c1, c2 = _a2_numerator_coeffs(x, params)
        den = (1.0 - x) * M2 + z * z * x * (1.0 - x) + params.m**2 * x
        if np.any(np.abs(den) < 1e-12 * M2):
            raise NumericError("closed-form denominator vanishes on the x-path")
        return (c2 * z * z + c1 * z) / den

    value, _ = adaptive_quadrature(integrand, [(0.0, 1.0)], quad)
    return params.lambda_**2 / (4.0 * np.pi**2) * complex(value)


def a2_derivatives(z, params: PhysicalParams, order: int,
                   quad: QuadratureSpec = None):
    """Derivatives of the closed-form kernel at z, analytically in z.

    The integrand is differentiated as a truncated series before the
    quadrature, so no finite difference crosses the integral sign.
    Returns derivatives 0..order as a complex array.
    """
    if order < 0:
        raise DomainError("derivative order must be nonnegative")
    z = complex(z)
    _check_holomorphy_window(z, params)
    M2 = params.M**2

    def integrand(pts):
        x = pts[:, 0]
        c1, c2 = _a2_numerator_coeffs(x, params)
        e = x * (1.0 - x)
        num = jet_from_poly(
            [c2 * z * z + c1 * z, 2.0 * c2 * z + c1, c2 * np.ones_like(x)],
            order,
        )
        d0 = (1.0 - x) * M2 + params.m**2 * x + e * z * z
        if np.any(np.abs(d0) < 1e-12 * M2):
            raise NumericError("closed-form denominator vanishes on the x-path")
        den = jet_from_poly([d0, 2.0 * e * z, e], order)
        return np.stack(jet_div(num, den), axis=-1)

    value, _ = adaptive_quadrature(integrand, [(0.0, 1.0)], quad)
    coeffs = params.lambda_**2 / (4.0 * np.pi**2) * np.asarray(value)
    return np.array(derivatives_from_jet(coeffs))


# ---------------------------------------------------------------------------
# Multiscale vertex sum.


def _vertex_stack(kappa):
    return np.stack([upsilon(nu, kappa) for nu in range(4)])


def _sandwich(vertices, left, right):
    # Upsilon_nu . left . gamma^mu . right . Upsilon^nu, batched over n.
    # Contracted pairwise; a single five-factor einsum falls back to a
    # nested loop over every index and is orders of magnitude slower.
    lv = np.einsum("vab,nbc->nvac", vertices, left)
    rv = np.einsum("nde,vef->nvdf", right, vertices)
    mid = np.einsum("nvac,mcd->nvmad", lv, _GAMMA_STACK)
    return np.einsum("nvmad,nvdf->nmaf", mid, rv)


def _pair_box(h1, h2, params, family, slack):
    lo_scale = min(h1, h2)
    lo = 0.0 if lo_scale == family.hStar else 2.0 ** (lo_scale - 1)
    lo = max(lo - slack, 0.0)
    hi = min(2.0 ** (max(h1, h2) + 1) + slack, 2.0 ** (params.N + 1))
    return lo, hi


def _pair_term(h1, h2, zPrime, z, params, family, quad, subtract):
    """One slice-pair integral of the vertex sum (without the overall sign).

    With subtract=True the integrand carries its own value at zero
    external momenta, so the result is the renormalized pair term.
    """
    vertices = _vertex_stack(params.kappa)
    m = params.m
    slack = max(abs(zPrime), abs(z), m)
    lo, hi = _pair_box(h1, h2, params, family, slack)
    box = [(lo, hi), (0.0, np.pi)]

    def integrand(pts):
        rho, phi = pts[:, 0], pts[:, 1]
        q0 = rho * np.cos(phi)
        r = rho * np.sin(phi)
        emb = octahedral_embed(q0, r).reshape(-1, 4)
        vhat = boson_propagator(emb, params, family)
        neg = -emb
        arg1 = neg.copy()
        arg1[:, 0] += zPrime
        arg2 = neg.copy()
        arg2[:, 0] += z
        prod = _sandwich(
            vertices,
            free_slice(h1, arg1, m, family),
            free_slice(h2, arg2, m, family),
        )
        if subtract:
            prod -= _sandwich(
                vertices,
                free_slice(h1, neg, m, family),
                free_slice(h2, neg, m, family),
            )
        prod *= vhat[:, None, None, None]
        out = prod.reshape(pts.shape[0], 6, 4, 4, 4).mean(axis=1)
        return out * (FOUR_PI_MEASURE * r * r * rho)[:, None, None, None]

    return adaptive_quadrature(integrand, box, quad, initial_grid=[4, 2])


def _require_time_axis(p, what):
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or not np.all(np.isfinite(p)):
        raise DomainError(f"{what} must be a finite four-vector")
    if np.any(p[1:] != 0.0):
        raise DomainError(
            f"{what} must lie on the Euclidean time axis; the angular "
            "reduction is exact only there"
        )
    return p


def triangle_cutoff(pPrime, p, params: PhysicalParams,
                    quad: QuadratureSpec = None) -> TriangleResult:
    """Renormalized multiscale vertex at two soft external momenta.

    Sums slice pairs with the lower scale pinned at the ladder bottom as
    they stand, and all higher pairs with their zero-momentum value
    subtracted.  External momenta must be soft (norm at most m/2) and
    lie on the Euclidean time axis.  The reported errorEstimate is the
    sum of the per-pair quadrature estimates.
    """
    if quad is None:
        quad = QuadratureSpec()
    pPrime = _require_time_axis(pPrime, "pPrime")
    p = _require_time_axis(p, "p")
    half = 0.5 * params.m
    if np.linalg.norm(pPrime) > half or np.linalg.norm(p) > half:
        raise DomainError("external momenta must satisfy |p| <= m/2")
    family = params.family()
    hs, N = family.hStar, params.N
    zPrime, z = float(pPrime[0]), float(p[0])

    bottom = [
        (h1, h2)
        for (h1, h2) in [
            (hs, hs), (hs, hs + 1), (hs, hs + 2), (hs + 1, hs), (hs + 2, hs)
        ]
        if max(h1, h2) <= N
    ]
    # the subtracted sum vanishes identically at zero momenta; the high
    # ladder is also truncated once its tail bound m^2 4^-h drops below
    # the absolute tolerance
    hTop = N
    if zPrime == 0.0 and z == 0.0:
        high = []
    else:
        while hTop > hs and params.m**2 * 4.0 ** (-hTop) < quad.absTolerance:
            hTop -= 1
        high = [
            (h1, h2)
            for h1 in range(hs + 1, N + 1)
            for h2 in range(max(hs + 1, h1 - _PAIR_WINDOW),
                            min(N, h1 + _PAIR_WINDOW) + 1)
            if min(h1, h2) <= hTop
        ]

    count = len(bottom) + len(high)
    inner = QuadratureSpec(
        relTolerance=quad.relTolerance,
        absTolerance=quad.absTolerance / count,
        maxSubdivisions=quad.maxSubdivisions,
    )
    total = np.zeros((4, 4, 4), dtype=complex)
    err = 0.0
    for h1, h2 in bottom:
        value, e = _pair_term(h1, h2, zPrime, z, params, family, inner, False)
        total += value
        err += e
    for h1, h2 in high:
        value, e = _pair_term(h1, h2, zPrime, z, params, family, inner, True)
        total += value
        err += e
    return TriangleResult(
        value=-total,
        errorEstimate=err,
        scalesSummed=range(hs, min(N, hTop) + 1),
    )


def triangle_single_cutoff(pPrime, p, params: PhysicalParams,
                           quad: QuadratureSpec = None):
    """Unrenormalized vertex with both fermion lines at the full cutoff.

    The multiscale sum differs from this object by a momentum-independent
    matrix, so soft-momentum differences of the two agree exactly; the
    tests pin that identity down.  Returns (value, errorEstimate).
    """
    if quad is None:
        quad = QuadratureSpec()
    pPrime = _require_time_axis(pPrime, "pPrime")
    p = _require_time_axis(p, "p")
    family = params.family()
    zPrime, z = float(pPrime[0]), float(p[0])
    vertices = _vertex_stack(params.kappa)
    m = params.m
    box = [(0.0, 2.0 ** (params.N + 1) + max(abs(zPrime), abs(z))),
           (0.0, np.pi)]

    def integrand(pts):
        rho, phi = pts[:, 0], pts[:, 1]
        q0 = rho * np.cos(phi)
        r = rho * np.sin(phi)
        emb = octahedral_embed(q0, r).reshape(-1, 4)
        vhat = boson_propagator(emb, params, family)
        arg1 = -emb
        arg1 = arg1.copy()
        arg1[:, 0] += zPrime
        arg2 = -emb
        arg2 = arg2.copy()
        arg2[:, 0] += z
        prod = _sandwich(
            vertices,
            free_cutoff(arg1, m, family),
            free_cutoff(arg2, m, family),
        )
        prod *= vhat[:, None, None, None]
        out = prod.reshape(pts.shape[0], 6, 4, 4, 4).mean(axis=1)
        return out * (FOUR_PI_MEASURE * r * r * rho)[:, None, None, None]

    value, err = adaptive_quadrature(integrand, box, quad, initial_grid=[6, 2])
    return -value, err


def _signed_gradient(z, params, family, quad):
    """Antisymmetric spatial momentum derivative of the cutoff vertex.

    Computes (d/dpPrime - d/dp)^a applied to the full-cutoff vertex at
    pPrime = p = z e0, for spatial a, through the analytic propagator
    gradient; the integrand direction degree stays at most three, so the
    six-direction average remains exact.  Returns ((3, 4, 4, 4), err).
    """
    vertices = _vertex_stack(params.kappa)
    m = params.m
    box = [(0.0, 2.0 ** (params.N + 1) + abs(z)), (0.0, np.pi)]

    def integrand(pts):
        rho, phi = pts[:, 0], pts[:, 1]
        q0 = rho * np.cos(phi)
        r = rho * np.sin(phi)
        emb = octahedral_embed(q0, r).reshape(-1, 4)
        vhat = boson_propagator(emb, params, family)
        arg = -emb
        arg = arg.copy()
        arg[:, 0] += z
        g = free_cutoff(arg, m, family)
        dg = free_cutoff_gradient(arg, m, family)
        out = np.empty((pts.shape[0], 3, 4, 4, 4), dtype=complex)
        for a in range(3):
            prod = _sandwich(vertices, dg[a + 1], g)
            prod -= _sandwich(vertices, g, dg[a + 1])
            prod *= vhat[:, None, None, None]
            out[:, a] = prod.reshape(pts.shape[0], 6, 4, 4, 4).mean(axis=1)
        return out * (FOUR_PI_MEASURE * r * r * rho)[:, None, None, None, None]

    value, err = adaptive_quadrature(integrand, box, quad, initial_grid=[6, 2])
    return -value, err


def _trace_combination(z, value, grad):
    # antisymmetric derivative trace + vector trace - time-projector trace;
    # annihilates any constant built from the gamma and chiral-gamma stacks.
    # The derivative-trace sign is fixed by the representation used here
    # (gamma(0)gamma(1)gamma(2)gamma(3) = -gamma5): with it the combination
    # reduces to the closed-form kernel t_poly; the opposite sign leaves a
    # spurious even term 2z(kappa^2+1)(z - q0) in the reduction.
    g5 = gamma5()
    t1 = 0.0j
    for a, b, c, sign in _EPS3_TERMS:
        t1 += sign * np.trace(g5 @ grad[a - 1, b] @ gamma(c))
    t2 = 2.0 * sum(np.trace(gamma(a) @ value[a]) for a in range(1, 4))
    t3 = -6.0 * np.trace((np.eye(4) + gamma(0)) @ value[0])
    return -z * t1 + t2 + t3


def _combination_error(z, valueErr, gradErr, lam):
    # crude linear propagation: 4x4 trace against unit-norm matrices
    return lam**2 / 24.0 * (
        abs(z) * 6.0 * 16.0 * gradErr + (2.0 * 3.0 + 6.0 * 2.0) * 16.0 * valueErr
    )


def a2_from_triangle(z, params: PhysicalParams, quad: QuadratureSpec = None):
    """Anomaly kernel extracted from the multiscale vertex at p = z e0.

    Combines the renormalized vertex matrices with the antisymmetric
    derivative term; the momentum-independent part dropped by the
    renormalization cannot contribute because the combination
    annihilates it.  Returns (value, errorEstimate).
    """
    if quad is None:
        quad = QuadratureSpec()
    z = float(z)
    pz = np.array([z, 0.0, 0.0, 0.0])
    tri = triangle_cutoff(pz, pz, params, quad)
    grad, gerr = _signed_gradient(z, params, params.family(), quad)
    combo = _trace_combination(z, tri.value, grad)
    value = params.lambda_**2 / 24.0 * combo
    return complex(value), _combination_error(
        z, tri.errorEstimate, gerr, params.lambda_
    )


def a2_single_cutoff(z, params: PhysicalParams, quad: QuadratureSpec = None):
    """Anomaly kernel from the full-cutoff vertex difference at p = z e0.

    Evaluates the vertex minus its zero-momentum value in a single
    difference integrand; equals the multiscale extraction exactly up to
    quadrature since the two vertices differ by a constant matrix the
    combination annihilates.  Returns (value, errorEstimate).
    """
    if quad is None:
        quad = QuadratureSpec()
    z = float(z)
    family = params.family()
    vertices = _vertex_stack(params.kappa)
    m = params.m
    box = [(0.0, 2.0 ** (params.N + 1) + abs(z)), (0.0, np.pi)]

    def integrand(pts):
        rho, phi = pts[:, 0], pts[:, 1]
        q0 = rho * np.cos(phi)
        r = rho * np.sin(phi)
        emb = octahedral_embed(q0, r).reshape(-1, 4)
        vhat = boson_propagator(emb, params, family)
        neg = -emb
        arg = neg.copy()
        arg[:, 0] += z
        g = free_cutoff(arg, m, family)
        g0 = free_cutoff(neg, m, family)
        prod = _sandwich(vertices, g, g) - _sandwich(vertices, g0, g0)
        prod *= vhat[:, None, None, None]
        out = prod.reshape(pts.shape[0], 6, 4, 4, 4).mean(axis=1)
        return out * (FOUR_PI_MEASURE * r * r * rho)[:, None, None, None]

    diff, derr = adaptive_quadrature(integrand, box, quad, initial_grid=[6, 2])
    grad, gerr = _signed_gradient(z, params, family, quad)
    combo = _trace_combination(z, -diff, grad)
    value = params.lambda_**2 / 24.0 * combo
    return complex(value), _combination_error(z, derr, gerr, params.lambda_)


def cutoff_removal_scan(params: PhysicalParams, cutoffExponents,
                        quad: QuadratureSpec = None,
                        z=None) -> CutoffRemovalScan:
    """Anomaly-kernel values along a ladder of ultraviolet cutoffs.

    Each exponent replaces N in the parameter set; deviations are taken
    against the richest cutoff of the ladder and fitted with a log-log
    slope.  Requires at least four points with cutoff/M inside [4, 64].
    """
    exps = sorted(set(int(n) for n in cutoffExponents))
    if len(exps) < 4:
        raise DomainError("cutoff scan needs at least four ladder points")
    for n in exps:
        ratio = 2.0**n / params.M
        if not 4.0 <= ratio <= 64.0:
            raise DomainError(
                f"cutoff/M = {ratio} outside the scan window [4, 64]"
            )
    if z is None:
        z = 0.25 * params.m
    z = float(z)

    values = {}
    errors = {}
    for n in exps:
        pt = dataclasses.replace(params, N=n)
        values[n], errors[n] = a2_single_cutoff(z, pt, quad)
    ref = values[exps[-1]]
    points = tuple(
        CutoffScanPoint(
            Lambda=2.0**n,
            value=values[n],
            deviation=abs(values[n] - ref) if n != exps[-1] else 0.0,
            errorEstimate=errors[n],
        )
        for n in exps
    )
    fit = [(np.log(p.Lambda), np.log(p.deviation))
           for p in points if p.deviation > 0.0]
    if len(fit) < 2:
        raise NumericError("not enough nonzero deviations to fit a slope")
    xs, ys = np.array(fit).T
    slope = float(np.polyfit(xs, ys, 1)[0])
    return CutoffRemovalScan(
        points=points, slope=slope, referenceLambda=2.0 ** exps[-1]
    )


def scan_csv(scan: CutoffRemovalScan) -> str:
    """CSV rows for a cutoff scan."""
    lines = ["Lambda,value_re,value_im,deviation,error_estimate"]
    for p in scan.points:
        lines.append(
            f"{p.Lambda:.17g},{p.value.real:.17g},{p.value.imag:.17g},"
            f"{p.deviation:.17g},{p.errorEstimate:.17g}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Mechanism probes.


def rotational_cancellation_check(params: PhysicalParams, x, z,
                                  quad: QuadratureSpec = None,
                                  variant: str = "centered") -> float:
    """Magnitude of the angular cancellation integral.

    The centered variant integrates the quadratic frequency combination
    against the cubed cutoff profile over a rotation-invariant
    denominator; it vanishes exactly.  The shifted variant measures the
    off-center cutoff residual through its integrable envelope (absolute
    numerator times absolute profile difference), which decays like the
    inverse cutoff.  The shifted_signed variant keeps signs; it decays
    one power faster because the leading residual is odd in the loop
    frequency.  The dropped variant removes the spatial counterterm and
    stays finite.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError("Feynman parameter must lie in [0, 1]")
    if variant not in ("centered", "shifted", "shifted_signed", "dropped"):
        raise DomainError(f"unknown variant {variant!r}")
    z = complex(z)
    offCenter = variant in ("shifted", "shifted_signed")
    if offCenter:
        if z.imag != 0.0:
            raise DomainError("the shifted variants need a real axis point")
        shiftA = x * z.real
        shiftB = (x - 1.0) * z.real
    d2 = delta_sq(x, z, params)
    family = params.family()
    N = params.N
    hi = 2.0 ** (N + 1) + (abs(z.real) if offCenter else 0.0)

    def integrand(pts):
        rho, phi = pts[:, 0], pts[:, 1]
        q0 = rho * np.cos(phi)
        r = rho * np.sin(phi)
        if variant == "dropped":
            num = q0 * q0
        else:
            num = q0 * q0 - r * r / 3.0
        if offCenter:
            w = family.chi_radial(N, np.hypot(q0 + shiftA, r))
            w = w * family.chi_radial(N, np.hypot(q0 + shiftB, r)) ** 2
            # the centered profile integrates the numerator to zero, so
            # the replaced integral equals the profile-difference one
            w = w - family.chi_radial(N, rho) ** 3
            if variant == "shifted":
                num = np.abs(num)
                w = np.abs(w)
        else:
            w = family.chi_radial(N, rho) ** 3
        den = (rho * rho + d2) ** 3
        return num * w / den * (FOUR_PI_MEASURE * r * r * rho)

    value, _ = adaptive_quadrature(
        integrand, [(0.0, hi), (0.0, np.pi)], quad, initial_grid=[6, 2]
    )
    return float(abs(value))


def _bubble_trace(vertices, g1, g2):
    # tr[Upsilon^nu g1 gamma^mu g2] -> (n, nu, mu), contracted pairwise
    mid = np.einsum("nbc,mcd->nmbd", g1, _GAMMA_STACK)
    loop = np.einsum("nmbd,nda->nmba", mid, g2)
    return np.einsum("vab,nmba->nvm", vertices, loop)


def _bubble_pair_box(h1, h2, family, params, shift):
    los, his = [], []
    for h, pad in ((h1, shift), (h2, 0.0)):
        lo = 0.0 if h == family.hStar else 2.0 ** (h - 1)
        los.append(max(lo - pad, 0.0))
        his.append(2.0 ** (h + 1) + pad)
    return max(los), min(min(his), 2.0 ** (params.N + 1) + shift)


def bubble_matrix(params: PhysicalParams, quad: QuadratureSpec = None,
                  h1: int = None, h2: int = None, k=None):
    """Response-pair trace matrix at external momentum k.

    D[nu, mu] integrates tr[Upsilon^nu g_h1(k+q) gamma^mu g_h2(q)] over
    the loop momentum with undressed slices.  k may vanish, lie on the
    time axis, or lie on a single spatial axis (handled by the
    collinear reduction); anything else is rejected.
    """
    if quad is None:
        quad = QuadratureSpec()
    family = params.family()
    if h1 is None:
        h1 = params.N - 1
    if h2 is None:
        h2 = params.N - 1
    family._check_scale(h1, lo=family.hStar)
    family._check_scale(h2, lo=family.hStar)
    if k is None:
        k = np.zeros(4)
    k = np.asarray(k, dtype=float)
    if k.shape != (4,) or not np.all(np.isfinite(k)):
        raise DomainError("bubble momentum must be a finite four-vector")
    spatial = np.nonzero(k[1:])[0]
    if spatial.size > 1:
        raise DomainError(
            "bubble momentum must lie in a plane spanned by the time axis "
            "and one spatial axis"
        )
    vertices = _vertex_stack(params.kappa)
    m = params.m
    shift = float(np.linalg.norm(k))
    lo, hi = _bubble_pair_box(h1, h2, family, params, shift)
    if hi <= lo:
        return np.zeros((4, 4), dtype=complex), 0.0

    if spatial.size == 0:
        # time-axis momentum: polar coordinates, six-direction average
        def integrand(pts):
            rho, phi = pts[:, 0], pts[:, 1]
            q0 = rho * np.cos(phi)
            r = rho * np.sin(phi)
            emb = octahedral_embed(q0, r).reshape(-1, 4)
            g2 = free_slice(h2, emb, m, family)
            g1 = free_slice(h1, emb + k, m, family)
            tr = _bubble_trace(vertices, g1, g2)
            out = tr.reshape(pts.shape[0], 6, 4, 4).mean(axis=1)
            return out * (FOUR_PI_MEASURE * r * r * rho)[:, None, None]

        return adaptive_quadrature(
            integrand, [(lo, hi), (0.0, np.pi)], quad, initial_grid=[4, 2]
        )

    axis = np.zeros(3)
    axis[spatial[0]] = 1.0

    def integrand(pts):
        q0, r, u = pts[:, 0], pts[:, 1], pts[:, 2]
        emb = collinear_embed(q0, r, u, axis).reshape(-1, 4)
        g2 = free_slice(h2, emb, m, family)
        g1 = free_slice(h1, emb + k, m, family)
        tr = _bubble_trace(vertices, g1, g2)
        out = tr.reshape(pts.shape[0], 4, 4, 4).mean(axis=1)
        return out * (TWO_PI_MEASURE * r * r)[:, None, None]

    return adaptive_quadrature(
        integrand,
        [(-hi, hi), (0.0, hi), (-1.0, 1.0)],
        quad,
        initial_grid=[4, 4, 2],
    )


def bubble_contribution_check(params: PhysicalParams,
                              quad: QuadratureSpec = None,
                              h1: int = None, h2: int = None) -> float:
    """Isotropy residual of the zero-momentum response-pair matrix.

    Returns the largest off-diagonal magnitude plus the largest
    deviation of a diagonal entry from the diagonal mean; both vanish
    when the matrix is proportional to the identity.
    """
    value, _ = bubble_matrix(params, quad, h1, h2)
    off = value - np.diag(np.diag(value))
    offNorm = float(np.max(np.abs(off)))
    diag = np.diag(value)
    aniso = float(np.max(np.abs(diag - diag.mean())))
    return offNorm + aniso

"""Multiscale cluster trees and their power-counting bookkeeping.

A cluster tree organizes one term of the scale-by-scale expansion: the
root carries the lowest scale, every child sits exactly one scale above
its parent, and the leaves are endpoints of three kinds.  A "coupling"
endpoint is the quartic interaction and lives on the top scale, a
"source" endpoint is an external fermion leg and also lives on the top
scale, and a "current" endpoint is the probe insertion and may sit on
any scale as long as its parent vertex is a genuine branch point.

The quantitative content is the exponent algebra: each vertex gets a
scaling dimension from its external-field count and a renormalization
gain from a small lookup table, and the product of per-vertex factors
2^(scale span times dimension deficit) bounds the kernel the tree
stands for.  This module enumerates admissible trees, evaluates those
exponents, redistributes a chosen damping weight along a root-to-
coupling path (the short-memory step), counts the undamped scale sums
that turn into logarithms, and evaluates the resulting geometric scale
sums exactly.  Kernels themselves are never evaluated; everything here
is integer bookkeeping plus one closed-form geometric series.
"""

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .errors import DomainError, EnumerationLimitError

ENUMERATION_LIMIT = 10**6

COUPLING = "coupling"
CURRENT = "current"
SOURCE = "source"
INTERNAL = "internal"

# fermion legs carried by each endpoint kind
_ENDPOINT_FIELDS = {COUPLING: 4, CURRENT: 2, SOURCE: 1}


@dataclass(frozen=True)
class TreeVertex:
    """One tree vertex: identity, position, kind, and field data.

    externalFieldCount is the number of fermion fields the cluster at
    this vertex leaves uncontracted; derivativeCount is the number of
    derivatives already sitting on those fields.  Enumerated trees
    leave internal counts at zero until an assignment is chosen.
    """

    id: int
    parent: Optional[int]
    scale: int
    kind: str
    externalFieldCount: int = 0
    derivativeCount: int = 0


@dataclass(frozen=True)
class GNTree:
    """A validated cluster tree over the window [rootScale, maxScale].

    Endpoints of kind coupling/source sit on scale maxScale + 1; a
    current endpoint may sit lower but its parent must branch.  The
    root is simple: it has exactly one child, the first vertex above
    the root scale.
    """

    vertices: tuple
    rootScale: int
    maxScale: int

    def __post_init__(self):
        _validate_tree(self)

    # -- structure helpers -------------------------------------------------

    def vertex(self, vertexId):
        for v in self.vertices:
            if v.id == vertexId:
                return v
        raise DomainError(f"no vertex with id {vertexId}")

    def children_map(self):
        kids = {v.id: [] for v in self.vertices}
        for v in self.vertices:
            if v.parent is not None:
                kids[v.parent].append(v.id)
        return kids

    @property
    def root(self):
        for v in self.vertices:
            if v.parent is None:
                return v
        raise DomainError("tree has no root")

    @property
    def first_nonroot(self):
        rootId = self.root.id
        for v in self.vertices:
            if v.parent == rootId:
                return v
        raise DomainError("root has no child")

    def is_endpoint(self, vertexId):
        return self.vertex(vertexId).kind != INTERNAL

    def source_counts(self, vertexId):
        """(nCurrent, nSource, nCoupling) endpoints at or above a vertex."""
        kids = self.children_map()
        counts = {CURRENT: 0, SOURCE: 0, COUPLING: 0}
        stack = [vertexId]
        while stack:
            v = self.vertex(stack.pop())
            if v.kind != INTERNAL:
                counts[v.kind] += 1
            stack.extend(kids[v.id])
        return counts[CURRENT], counts[SOURCE], counts[COUPLING]

    def child_field_sum(self, vertexId):
        kids = self.children_map()[vertexId]
        return sum(self.vertex(k).externalFieldCount for k in kids)

    def is_nontrivial(self, vertexId):
        """A vertex that contracts at least one field pair internally.

        Meaningful only once external-field counts are assigned; with
        the zero defaults of a freshly enumerated tree every internal
        vertex looks nontrivial.
        """
        v = self.vertex(vertexId)
        if v.kind != INTERNAL or v.parent is None:
            return False
        return self.child_field_sum(vertexId) - v.externalFieldCount > 0


def _validate_tree(tree):
    if len(tree.vertices) < 2:
        raise DomainError("a cluster tree needs a root and at least one "
                          "endpoint")
    if tree.maxScale < tree.rootScale:
        raise DomainError("scale window is empty")
    ids = [v.id for v in tree.vertices]
    if len(set(ids)) != len(ids):
        raise DomainError("vertex ids must be unique")
    byId = {v.id: v for v in tree.vertices}
    roots = [v for v in tree.vertices if v.parent is None]
    if len(roots) != 1:
        raise DomainError("tree must have exactly one root")
    root = roots[0]
    if root.scale != tree.rootScale or root.kind != INTERNAL:
        raise DomainError("root must be an internal vertex on the root "
                          "scale")
    kids = {i: [] for i in ids}
    for v in tree.vertices:
        if v.parent is None:
            continue
        if v.parent not in byId:
            raise DomainError(f"vertex {v.id} has unknown parent {v.parent}")
        if v.scale != byId[v.parent].scale + 1:
            raise DomainError("child scale must exceed the parent scale by "
                              "exactly one")
        kids[v.parent].append(v.id)
    if len(kids[root.id]) != 1:
        raise DomainError("root must be simple: exactly one child")
    top = tree.maxScale + 1
    for v in tree.vertices:
        if v.externalFieldCount < 0 or v.derivativeCount < 0:
            raise DomainError("field and derivative counts must be "
                              "nonnegative")
        if v.kind == INTERNAL:
            if v.parent is not None and not kids[v.id]:
                raise DomainError(f"internal vertex {v.id} has no children")
            if v.scale > tree.maxScale:
                raise DomainError("internal vertices must not exceed the "
                                  "window top")
        elif v.kind in (COUPLING, SOURCE):
            if kids[v.id]:
                raise DomainError("endpoints cannot have children")
            if v.scale != top:
                raise DomainError(f"{v.kind} endpoints live on scale "
                                  f"{top}")
            if v.externalFieldCount != _ENDPOINT_FIELDS[v.kind]:
                raise DomainError(f"{v.kind} endpoints carry "
                                  f"{_ENDPOINT_FIELDS[v.kind]} fields")
        elif v.kind == CURRENT:
            if kids[v.id]:
                raise DomainError("endpoints cannot have children")
            if v.scale > top:
                raise DomainError("current endpoints must not exceed the "
                                  "window top")
            if len(kids[v.parent]) < 2:
                raise DomainError("a current endpoint needs a branching "
                                  "parent vertex")
            if v.externalFieldCount != _ENDPOINT_FIELDS[CURRENT]:
                raise DomainError("current endpoints carry 2 fields")
        else:
            raise DomainError(f"unknown vertex kind {v.kind!r}")
    # contraction parity: whenever a vertex and all its children carry
    # assigned counts, the surplus must split into pairs
    for v in tree.vertices:
        if v.kind != INTERNAL or not kids[v.id]:
            continue
        childCounts = [byId[k].externalFieldCount for k in kids[v.id]]
        if v.externalFieldCount == 0 or any(c == 0 for c in childCounts):
            continue
        surplus = sum(childCounts) - v.externalFieldCount
        if surplus < 0:
            raise DomainError("a vertex cannot expose more fields than its "
                              "children provide")
        if surplus % 2 != 0:
            raise DomainError("contracted fields must come in pairs")


# ---------------------------------------------------------------------------
# dimension and gain tables


def scaling_dimension(externalFields, nCurrent, derivatives):
    """Power-counting dimension 4 - 3/2 fields - insertions - derivatives."""
    if externalFields < 0 or nCurrent < 0 or derivatives < 0:
        raise DomainError("counts must be nonnegative")
    value = Fraction(8 - 3 * externalFields, 2) - nCurrent - derivatives
    return int(value) if value.denominator == 1 else float(value)


def renormalization_gain(externalFields, derivatives, nCurrent, nSource,
                         isFirstNonroot=False, isEndpoint=False):
    """Scale powers gained when the subtraction acts on this vertex."""
    if isFirstNonroot or isEndpoint:
        return 0
    if externalFields == 2 and nSource == 0:
        if derivatives == 0 and nCurrent == 0:
            return 3
        if derivatives == 1 and nCurrent == 0:
            return 2
        if derivatives == 0 and nCurrent == 1:
            return 2
    return 0


# ---------------------------------------------------------------------------
# enumeration


def _vector_partitions(demand, bound=None):
    """Multiset partitions of a count vector into nonzero parts.

    Parts are produced in nonincreasing lexicographic order, which is
    what makes the enumeration canonical.
    """
    if bound is None:
        bound = demand
    if demand == (0, 0, 0):
        return ((),)
    out = []
    parts = []
    for a in range(demand[0], -1, -1):
        for b in range(demand[1], -1, -1):
            for c in range(demand[2], -1, -1):
                p = (a, b, c)
                if p != (0, 0, 0) and p <= bound:
                    parts.append(p)
    for p in parts:
        rest = (demand[0] - p[0], demand[1] - p[1], demand[2] - p[2])
        for tail in _vector_partitions(rest, p):
            out.append((p,) + tail)
    return tuple(out)


def _multiset_choices(options, multiplicity):
    """Nondecreasing index tuples: multisets of realizations."""
    return itertools.combinations_with_replacement(options, multiplicity)


class _Enumerator:
    """Shared recursion for counting and materializing admissible trees.

    demand vectors are (nCoupling, nCurrent, nSource).  A vertex on
    scale s receives a demand and splits it among children on scale
    s + 1; a singleton part may terminate as an endpoint when the
    endpoint rules allow it, and any part may continue as an internal
    child while s + 1 stays inside the window.
    """

    _LEAF = {(1, 0, 0): COUPLING, (0, 1, 0): CURRENT, (0, 0, 1): SOURCE}

    def __init__(self, rootScale, maxScale):
        self.rootScale = rootScale
        self.maxScale = maxScale
        self.top = maxScale + 1
        self._countMemo = {}
        self._sigMemo = {}

    def _leaf_kind(self, demand, scale, branching):
        kind = self._LEAF.get(demand)
        if kind is None:
            return None
        if kind in (COUPLING, SOURCE):
            return kind if scale == self.top else None
        # current endpoints demand a branching parent
        return kind if branching and scale <= self.top else None

    # -- counting ----------------------------------------------------------

    def count_options(self, demand, scale, branching):
        n = 1 if self._leaf_kind(demand, scale, branching) else 0
        if scale <= self.maxScale:
            n += self.count_internal(demand, scale)
        return n

    def count_internal(self, demand, scale):
        key = (demand, scale)
        if key in self._countMemo:
            return self._countMemo[key]
        total = 0
        for parts in _vector_partitions(demand):
            branching = len(parts) >= 2
            product = 1
            for part in set(parts):
                c = self.count_options(part, scale + 1, branching)
                m = parts.count(part)
                product *= math.comb(c + m - 1, m)
                if product == 0:
                    break
            total += product
        self._countMemo[key] = total
        return total

    # -- materialization ---------------------------------------------------

    def signature_options(self, demand, scale, branching):
        out = []
        kind = self._leaf_kind(demand, scale, branching)
        if kind:
            out.append((kind,))
        if scale <= self.maxScale:
            out.extend(self.signatures_internal(demand, scale))
        return sorted(out)

    def signatures_internal(self, demand, scale):
        key = (demand, scale)
        if key in self._sigMemo:
            return self._sigMemo[key]
        sigs = []
        for parts in _vector_partitions(demand):
            branching = len(parts) >= 2
            perPart = []
            for part in sorted(set(parts), reverse=True):
                options = self.signature_options(part, scale + 1, branching)
                m = parts.count(part)
                perPart.append(list(_multiset_choices(options, m)))
            for combo in itertools.product(*perPart):
                children = tuple(sorted(c for group in combo for c in group))
                if children:
                    sigs.append(("node", children))
        sigs = sorted(set(sigs))
        self._sigMemo[key] = sigs
        return sigs


def _materialize(signature, rootScale, maxScale):
    vertices = [TreeVertex(id=0, parent=None, scale=rootScale, kind=INTERNAL)]
    counter = [0]

    def walk(sig, parentId, scale):
        counter[0] += 1
        vid = counter[0]
        if sig[0] == "node":
            vertices.append(TreeVertex(id=vid, parent=parentId, scale=scale,
                                       kind=INTERNAL))
            for child in sig[1]:
                walk(child, vid, scale + 1)
        else:
            kind = sig[0]
            vertices.append(TreeVertex(
                id=vid, parent=parentId, scale=scale, kind=kind,
                externalFieldCount=_ENDPOINT_FIELDS[kind]))

    walk(signature, 0, rootScale + 1)
    return GNTree(vertices=tuple(vertices), rootScale=rootScale,
                  maxScale=maxScale)


def count_trees(rootScale, maxScale, nCoupling, nCurrent, nSource):
    """Number of admissible trees for the window, without building them."""
    if nCoupling < 0 or nCurrent < 0 or nSource < 0:
        raise DomainError("endpoint counts must be nonnegative")
    if nCoupling + nCurrent + nSource == 0:
        return 0
    if maxScale < rootScale:
        raise DomainError("scale window is empty")
    enum = _Enumerator(rootScale, maxScale)
    demand = (nCoupling, nCurrent, nSource)
    # the whole tree hangs off the simple root as a single child
    return enum.count_options(demand, rootScale + 1, branching=False)


def enumerate_trees(rootScale, maxScale, nCoupling, nCurrent, nSource):
    """All admissible trees, canonically ordered and deduplicated."""
    if nCoupling + nCurrent + nSource == 0:
        return []
    total = count_trees(rootScale, maxScale, nCoupling, nCurrent, nSource)
    if total > ENUMERATION_LIMIT:
        raise EnumerationLimitError(
            f"window would produce {total} trees, above the "
            f"{ENUMERATION_LIMIT} guard")
    enum = _Enumerator(rootScale, maxScale)
    demand = (nCoupling, nCurrent, nSource)
    sigs = enum.signature_options(demand, rootScale + 1, branching=False)
    return [_materialize(sig, rootScale, maxScale) for sig in sigs]


# ---------------------------------------------------------------------------
# presets


def _preset_builder(rootScale, maxScale):
    vertices = []
    counter = [-1]

    def add(parent, scale, kind, fields):
        counter[0] += 1
        vertices.append(TreeVertex(id=counter[0], parent=parent, scale=scale,
                                   kind=kind, externalFieldCount=fields))
        return counter[0]

    def chain(parent, fromScale, toScale, fields):
        last = parent
        for s in range(fromScale, toScale + 1):
            last = add(last, s, INTERNAL, fields)
        return last

    def finish():
        return GNTree(vertices=tuple(vertices), rootScale=rootScale,
                      maxScale=maxScale)

    return add, chain, finish


def single_log_preset(clusterScales, maxScale):
    """Probe-insertion tree whose bound carries exactly one logarithm.

    clusterScales = (base, s1, s2, s3), strictly increasing with
    s3 <= maxScale.  The cluster on s1 exposes two fields next to the
    current insertion and gets renormalized (dimension 0, gain 2); the
    deeper clusters on s2 and s3 expose four fields each (dimension
    -3).  After the short-memory redistribution at weight 2 only the
    s1 scale sum is undamped.
    """
    base, s1, s2, s3 = _checked_scales(clusterScales, 4, maxScale)
    add, chain, finish = _preset_builder(base - 1, maxScale)
    root = add(None, base - 1, INTERNAL, 0)
    w0 = add(root, base, INTERNAL, 0)
    v1 = chain(chain(w0, base + 1, s1 - 1, 2), s1, s1, 2)
    v2 = chain(chain(v1, s1 + 1, s2 - 1, 4), s2, s2, 4)
    v3 = chain(chain(v2, s2 + 1, s3 - 1, 4), s3, s3, 4)
    innerCoupling = chain(v3, s3 + 1, maxScale, 4)
    add(innerCoupling, maxScale + 1, COUPLING, 4)
    add(v3, s3 + 1, CURRENT, 2)
    midCoupling = chain(v2, s2 + 1, maxScale, 4)
    add(midCoupling, maxScale + 1, COUPLING, 4)
    for _ in range(2):
        tail = chain(w0, base + 1, maxScale, 1)
        add(tail, maxScale + 1, SOURCE, 1)
    return finish()


def double_log_preset(clusterScales, maxScale):
    """Probe-insertion tree with two nested renormalized clusters.

    clusterScales = (base, s1, s2), strictly increasing with
    s2 <= maxScale.  Both the s1 and the s2 cluster expose two fields
    next to the current insertion (dimension 0, gain 2), so the
    short-memory redistribution at weight 2 leaves two undamped scale
    sums: the bound grows with the square of the window logarithm.
    """
    base, s1, s2 = _checked_scales(clusterScales, 3, maxScale)
    add, chain, finish = _preset_builder(base - 1, maxScale)
    root = add(None, base - 1, INTERNAL, 0)
    w0 = add(root, base, INTERNAL, 0)
    v1 = chain(chain(w0, base + 1, s1 - 1, 2), s1, s1, 2)
    v2 = chain(chain(v1, s1 + 1, s2 - 1, 2), s2, s2, 2)
    innerCoupling = chain(v2, s2 + 1, maxScale, 4)
    add(innerCoupling, maxScale + 1, COUPLING, 4)
    add(v2, s2 + 1, CURRENT, 2)
    outerCoupling = chain(v1, s1 + 1, maxScale, 4)
    add(outerCoupling, maxScale + 1, COUPLING, 4)
    for _ in range(2):
        tail = chain(w0, base + 1, maxScale, 1)
        add(tail, maxScale + 1, SOURCE, 1)
    return finish()


def _checked_scales(clusterScales, n, maxScale):
    scales = tuple(int(s) for s in clusterScales)
    if len(scales) != n:
        raise DomainError(f"preset needs {n} cluster scales")
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise DomainError("cluster scales must be strictly increasing")
    if scales[-1] > maxScale:
        raise DomainError("cluster scales must stay at or below the window "
                          "top")
    return scales


PRESETS = {
    "single-log": single_log_preset,
    "double-log": double_log_preset,
}


# ---------------------------------------------------------------------------
# bound bookkeeping


@dataclass(frozen=True)
class VertexBound:
    vertexId: int
    scale: int
    priorScale: int
    dimension: float
    gain: int
    exponent: float


@dataclass(frozen=True)
class EndpointFactor:
    kind: str
    priorScale: int
    exponent: int


@dataclass(frozen=True)
class BoundReport:
    """Exponent bookkeeping for one tree.

    perVertex holds the raw per-cluster factors (span times dimension
    deficit, before any redistribution); endpointFactors the coupling
    and source scale weights; shortMemoryExponent the weight pulled
    out front by the redistribution; logFactorCount the number of
    undamped scale sums left after it.  The raw pieces sum to
    totalExponent, and the redistribution moves weight around without
    changing that sum.
    """

    perVertex: tuple
    endpointFactors: tuple
    shortMemoryExponent: float
    logFactorCount: int
    totalExponent: float
    thetaPath: tuple


def _require_assigned(tree):
    # a nontrivial vertex must expose at least two fields; a fresh
    # enumerated tree (all counts zero) fails this at its deepest
    # internal vertices
    w0 = tree.first_nonroot
    for v in tree.vertices:
        if v.kind != INTERNAL or v.parent is None or v.id == w0.id:
            continue
        if tree.is_nontrivial(v.id) and v.externalFieldCount < 2:
            raise DomainError(
                "external-field counts are unassigned; presets carry them, "
                "enumerated trees need with_field_counts first")


def _effective_scales(tree, clusterScales):
    eff = {v.id: v.scale for v in tree.vertices}
    if not clusterScales:
        return eff
    w0 = tree.first_nonroot
    for vid, scale in clusterScales.items():
        v = tree.vertex(vid)
        if v.kind != INTERNAL or not tree.is_nontrivial(vid):
            raise DomainError("cluster scales can only move nontrivial "
                              "internal vertices")
        if vid == w0.id and scale != w0.scale:
            raise DomainError("the first vertex above the root is pinned to "
                              "its scale")
        if not tree.rootScale < scale <= tree.maxScale:
            raise DomainError("cluster scale outside the window")
        eff[vid] = int(scale)
    # monotonicity along every ancestry chain of nontrivial vertices
    for v in tree.vertices:
        if v.parent is None:
            continue
        prior = _prior_nontrivial(tree, v.id)
        lower = eff[prior] if prior is not None else tree.rootScale
        if tree.is_nontrivial(v.id) and eff[v.id] <= lower:
            raise DomainError("cluster scales must increase along the tree")
    return eff


def _prior_nontrivial(tree, vertexId):
    v = tree.vertex(vertexId)
    cursor = v.parent
    while cursor is not None:
        if tree.is_nontrivial(cursor):
            return cursor
        cursor = tree.vertex(cursor).parent
    return None


def _theta_path(tree, eff):
    """Nontrivial vertices from the first nonroot vertex down to the
    coupling endpoint with the deepest prior nontrivial scale."""
    couplings = [v for v in tree.vertices if v.kind == COUPLING]
    if not couplings:
        return None
    def priorScale(v):
        p = _prior_nontrivial(tree, v.id)
        return eff[p] if p is not None else tree.rootScale
    target = max(couplings, key=lambda v: (priorScale(v), -v.id))
    path = set()
    cursor = target.parent
    while cursor is not None:
        if tree.is_nontrivial(cursor):
            path.add(cursor)
        cursor = tree.vertex(cursor).parent
    return path


def bound_report(tree, clusterScales=None, theta=0.0):
    """Per-vertex exponents, endpoint weights, and the log count."""
    theta = float(theta)
    if theta not in (0.0, 1.0, 2.0):
        raise DomainError("redistribution weight must be 0, 1, or 2")
    _require_assigned(tree)
    eff = _effective_scales(tree, clusterScales)
    w0 = tree.first_nonroot

    perVertex = []
    for v in sorted(tree.vertices, key=lambda u: (eff[u.id], u.id)):
        if v.kind != INTERNAL or v.parent is None:
            continue
        if not tree.is_nontrivial(v.id):
            continue
        nCurrent, nSource, _ = tree.source_counts(v.id)
        dim = scaling_dimension(v.externalFieldCount + nSource, nCurrent,
                                v.derivativeCount)
        gain = renormalization_gain(v.externalFieldCount, v.derivativeCount,
                                    nCurrent, nSource,
                                    isFirstNonroot=(v.id == w0.id))
        prior = _prior_nontrivial(tree, v.id)
        hPrime = eff[prior] if prior is not None else tree.rootScale
        perVertex.append(VertexBound(
            vertexId=v.id, scale=eff[v.id], priorScale=hPrime,
            dimension=dim, gain=gain,
            exponent=(eff[v.id] - hPrime) * (dim - gain)))

    endpointFactors = []
    for v in tree.vertices:
        if v.kind not in (COUPLING, SOURCE):
            continue
        prior = _prior_nontrivial(tree, v.id)
        hPrime = eff[prior] if prior is not None else tree.rootScale
        if v.kind == COUPLING:
            exponent = 2 * (hPrime - tree.maxScale)
        else:
            exponent = -hPrime
        endpointFactors.append(EndpointFactor(kind=v.kind, priorScale=hPrime,
                                              exponent=exponent))

    path = set()
    shortMemory = 0.0
    if theta > 0.0:
        found = _theta_path(tree, eff)
        if found is None:
            raise DomainError("short-memory redistribution needs a coupling "
                              "endpoint")
        path = found
        shortMemory = theta * (eff[w0.id] - tree.maxScale)

    logCount = 0
    for entry in perVertex:
        if entry.vertexId == w0.id:
            continue
        shift = theta if entry.vertexId in path else 0.0
        if abs(entry.dimension - entry.gain + shift) < 1e-12:
            logCount += 1

    total = (sum(e.exponent for e in perVertex)
             + sum(e.exponent for e in endpointFactors))
    return BoundReport(perVertex=tuple(perVertex),
                       endpointFactors=tuple(endpointFactors),
                       shortMemoryExponent=shortMemory,
                       logFactorCount=logCount,
                       totalExponent=total,
                       thetaPath=tuple(sorted(path)))


def scale_sum_value(tree, theta=0.0):
    """Exact value of the per-vertex geometric scale sums.

    Every nontrivial vertex other than the first one contributes a sum
    over its scale span b of 2^(b * exponent), truncated at the window
    width; an exponent of zero contributes the width itself, which is
    where the logarithms come from.  A positive exponent means the
    power counting diverges and is refused.
    """
    report = bound_report(tree, theta=theta)
    w0 = tree.first_nonroot
    width = tree.maxScale - w0.scale
    if width <= 0:
        return 1.0
    value = 1.0
    for entry in report.perVertex:
        if entry.vertexId == w0.id:
            continue
        shift = theta if entry.vertexId in set(report.thetaPath) else 0.0
        exponent = entry.dimension - entry.gain + shift
        if exponent > 1e-12:
            raise DomainError(
                "divergent power counting: a scale sum carries the positive "
                f"exponent {exponent}")
        if abs(exponent) < 1e-12:
            value *= width
        else:
            r = 2.0**exponent
            value *= r * (1.0 - r**width) / (1.0 - r)
    return value


# ---------------------------------------------------------------------------
# field assignments


def with_field_counts(tree, counts):
    """New tree with external-field (and derivative) counts replaced.

    counts maps vertex id to either an integer field count or a pair
    (fields, derivatives).  The result is revalidated.
    """
    newVertices = []
    for v in tree.vertices:
        if v.id in counts:
            spec = counts[v.id]
            if isinstance(spec, tuple):
                fields, ders = spec
            else:
                fields, ders = spec, v.derivativeCount
            newVertices.append(replace(v, externalFieldCount=int(fields),
                                       derivativeCount=int(ders)))
        else:
            newVertices.append(v)
    return GNTree(vertices=tuple(newVertices), rootScale=tree.rootScale,
                  maxScale=tree.maxScale)


def max_dimension_gap(tree):
    """Largest dimension-minus-gain over all admissible field assignments.

    Applies to probe-insertion trees with at most one current endpoint,
    in the regime where source legs ride untouched down to the first
    vertex above the root and only contract there.  Admissibility
    encodes two facts: source legs never pair off higher up, and a
    branch vertex must be bridged by contractions among its children's
    non-source legs (a cluster of disconnected pieces vanishes).  None
    of the endpoint kinds carries derivatives, so the derivative count
    stays zero throughout.  Returns None when no admissible assignment
    makes any vertex beyond the first one nontrivial.
    """
    nCurrentTotal, _, _ = tree.source_counts(tree.first_nonroot.id)
    if nCurrentTotal > 1:
        raise DomainError("gap scan covers trees with at most one current "
                          "endpoint")
    w0 = tree.first_nonroot
    kids = tree.children_map()
    byId = {v.id: v for v in tree.vertices}
    subtreeEta = {v.id: tree.source_counts(v.id)[1] for v in tree.vertices}
    internal = [v for v in tree.vertices
                if v.kind == INTERNAL and v.parent is not None]
    # deepest first, so children are assigned before their parents
    internal.sort(key=lambda v: -v.scale)
    best = [None]

    def child_data(v, fields):
        data = []
        for k in kids[v.id]:
            c = byId[k]
            p = fields[c.id] if c.kind == INTERNAL else c.externalFieldCount
            data.append((p, subtreeEta[c.id]))
        return data

    def admissible(v, fields):
        data = child_data(v, fields)
        total = sum(p for p, _ in data)
        eta = sum(n for _, n in data)
        branches = len(data)
        if v.id == w0.id:
            floor = 0
        else:
            # pass-through source legs stay external; anything else
            # needs at least one pair of exposed fields
            floor = max(1, eta)
            if branches >= 2:
                bridgeable = [p - n for p, n in data]
                if min(bridgeable) < 1:
                    return
                if sum(bridgeable) < 2 * (branches - 1):
                    return
        ceiling = total - 2 * max(0, branches - 1)
        for p in range(floor, ceiling + 1):
            if (total - p) % 2 == 0:
                yield p

    def assign(index, fields):
        if index == len(internal):
            for v in internal:
                p = fields[v.id]
                childSum = sum(p for p, _ in child_data(v, fields))
                if childSum - p <= 0 or v.id == w0.id:
                    continue
                nCur, nSrc, _ = tree.source_counts(v.id)
                gap = (scaling_dimension(p + nSrc, nCur, 0)
                       - renormalization_gain(p, 0, nCur, nSrc))
                if best[0] is None or gap > best[0]:
                    best[0] = gap
            return
        v = internal[index]
        for p in admissible(v, fields):
            fields[v.id] = p
            assign(index + 1, fields)
        fields.pop(v.id, None)

    assign(0, {})
    return best[0]


# ---------------------------------------------------------------------------
# serialization


def tree_to_text(tree):
    """Line format: one vertex per line, id parent scale kind fields ders."""
    lines = [f"# window {tree.rootScale} {tree.maxScale}"]
    for v in sorted(tree.vertices, key=lambda u: u.id):
        parent = "-" if v.parent is None else str(v.parent)
        lines.append(f"{v.id} {parent} {v.scale} {v.kind} "
                     f"{v.externalFieldCount} {v.derivativeCount}")
    return "\n".join(lines) + "\n"


def tree_from_text(text):
    """Parse the line format back into a validated tree."""
    rootScale = None
    maxScale = None
    vertices = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["window"] and len(parts) == 3:
                rootScale, maxScale = int(parts[1]), int(parts[2])
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DomainError(f"malformed vertex line: {raw!r}")
        vid, parent, scale, kind, fields, ders = parts
        vertices.append(TreeVertex(
            id=int(vid),
            parent=None if parent == "-" else int(parent),
            scale=int(scale), kind=kind,
            externalFieldCount=int(fields), derivativeCount=int(ders)))
    if not vertices:
        raise DomainError("no vertices in tree text")
    if rootScale is None:
        rootScale = min(v.scale for v in vertices)
        tops = [v.scale for v in vertices if v.kind in (COUPLING, SOURCE)]
        if not tops:
            raise DomainError("window header required for trees without "
                              "coupling or source endpoints")
        maxScale = max(tops) - 1
    return GNTree(vertices=tuple(vertices), rootScale=rootScale,
                  maxScale=maxScale)

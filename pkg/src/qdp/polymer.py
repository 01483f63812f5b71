"""2-linked structure, closures, polymer partition functions, and dimer sums.

Two same-side vertices are adjacent in the "shared neighbor" sense exactly
when their XOR has popcount 2 (they then share exactly two pre-percolation
neighbors).  A subset decomposes into 2-linked components under that relation;
distinct components automatically have disjoint neighborhoods, so a component
decomposition is the same thing as a configuration of pairwise-compatible
pieces.  A component is a valid polymer when its closure (the largest
same-side set with the same unpercolated neighborhood) has at most
(3/4)*2^(d-1) vertices.

Weights: a piece P carries 2^(-N(P)) where N(P) counts retained neighbors of
P; the tilde variant uses the product of per-vertex weights instead.  All
enumerative sums here are exact dyadic rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import exp

import numpy as np

from .dyadic import DyadicWeight
from .errors import ContractError, SizeError
from .lattice import (
    Dimer,
    PercolatedHypercube,
    Side,
    enumerate_dimers,
    neighborhood_size,
    parity,
    side_vertices,
)

_ENUM_MAX_D = 5  # full subset enumeration: 2^(2^(d-1)) configurations
_DIMER_MAX_D = 20


def _check_side(d: int, S, side: Side):
    for v in S:
        if not 0 <= v < (1 << d):
            raise ContractError(f"vertex {v} out of range for d={d}")
        if parity(v) != side.parity:
            raise ContractError(f"vertex {v} not on side {side.value}")


def two_linked_components(d: int, S, side: Side) -> list[frozenset[int]]:
    """Partition S into maximal pieces connected by the share-a-neighbor relation."""
    _check_side(d, S, side)
    rest = set(S)
    out = []
    while rest:
        seed_v = min(rest)
        comp = {seed_v}
        frontier = [seed_v]
        rest.discard(seed_v)
        while frontier:
            x = frontier.pop()
            near = [y for y in rest if bin(x ^ y).count("1") == 2]
            for y in near:
                rest.discard(y)
                comp.add(y)
                frontier.append(y)
        out.append(frozenset(comp))
    out.sort(key=min)
    return out


def two_linked_components_reference(d: int, S, side: Side) -> list[frozenset[int]]:
    """Quadratic union-find reference for the partition (test oracle)."""
    _check_side(d, S, side)
    items = sorted(S)
    parent = list(range(len(items)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            if bin(items[a] ^ items[b]).count("1") == 2:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
    groups: dict[int, set[int]] = {}
    for a, v in enumerate(items):
        groups.setdefault(find(a), set()).add(v)
    return sorted((frozenset(g) for g in groups.values()), key=min)


def closure(d: int, A, side: Side) -> frozenset[int]:
    """Largest same-side set with the same unpercolated neighborhood as A.

    Only A itself and same-side vertices within Hamming distance 2 of A can
    qualify, since any member's neighbors must all neighbor A.
    """
    A = set(A)
    if not A:
        raise ContractError("closure of the empty set is undefined")
    _check_side(d, A, side)
    nbhd = set()
    for v in A:
        for l in range(d):
            nbhd.add(v ^ (1 << l))
    candidates = set(A)
    for v in A:
        for i in range(d):
            for j in range(i + 1, d):
                candidates.add(v ^ (1 << i) ^ (1 << j))
    out = set()
    for v in candidates:
        if all((v ^ (1 << l)) in nbhd for l in range(d)):
            out.add(v)
    return frozenset(out | A)


def closure_bound_numerator(d: int) -> int:
    """Polymer size cap is (3/4)*2^(d-1); store as integer 3*2^(d-1) vs 4*size."""
    return 3 << (d - 1)


def is_valid_polymer(d: int, component, side: Side) -> bool:
    return 4 * len(closure(d, component, side)) <= closure_bound_numerator(d)


def is_polymer_decomposable(d: int, S, side: Side) -> bool:
    """True iff every 2-linked component of S satisfies the closure-size cap."""
    return all(
        is_valid_polymer(d, comp, side) for comp in two_linked_components(d, S, side)
    )


@dataclass(frozen=True)
class PolymerConfig:
    """A side's defect set as its decomposition into 2-linked components.

    Components are nonempty, pairwise compatible (their unions are not
    2-linked, equivalently their unpercolated neighborhoods are disjoint),
    and sorted by smallest member.
    """

    d: int
    side: Side
    components: tuple[frozenset[int], ...]

    def __post_init__(self):
        for comp in self.components:
            if not comp:
                raise ContractError("polymer components must be nonempty")
        union: set[int] = set()
        for comp in self.components:
            if union & comp:
                raise ContractError("polymer components must be disjoint")
            union |= comp
        if two_linked_components(self.d, union, self.side) != sorted(
            self.components, key=min
        ):
            raise ContractError("components must be maximal 2-linked pieces")

    @staticmethod
    def from_vertices(d: int, S, side: Side) -> "PolymerConfig":
        return PolymerConfig(d, side, tuple(two_linked_components(d, S, side)))

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(v for comp in self.components for v in comp)

    def sizes(self) -> list[int]:
        return [len(c) for c in self.components]

    def is_decomposable(self) -> bool:
        return all(is_valid_polymer(self.d, c, self.side) for c in self.components)


@lru_cache(maxsize=32)
def small_polymer_validity(d: int) -> tuple[bool, bool]:
    """(singleton_ok, dimer_ok) for dimension d.

    Both parity classes are vertex- and dimer-transitive, so one
    representative decides each.  Dimers first fit the closure cap at d=4;
    singletons at d=3 (at d=2 the two even vertices share a neighborhood).
    """
    singleton_ok = is_valid_polymer(d, {0}, Side.EVEN)
    if d < 2:
        return singleton_ok, False
    dimer_ok = is_valid_polymer(d, {0, 3}, Side.EVEN)
    return singleton_ok, dimer_ok


# ---------------------------------------------------------------------------
# partition functions (full enumeration, d <= 5)
# ---------------------------------------------------------------------------


def iter_subsets_with_neighborhood(H: PercolatedHypercube, side: Side):
    """Yield (subset_mask, N(subset)) over all subsets of a side.

    Gray-code order: consecutive subsets differ in one vertex and per-vertex
    coverage counters update N incrementally in O(d) per step.  subset_mask
    has bit r set when the side's r-th vertex (in increasing vertex order)
    is present.
    """
    d = H.d
    verts = side_vertices(d, side).tolist()
    n = len(verts)
    nbr_lists = []
    opp_rank = {v: r for r, v in enumerate(side_vertices(d, side.opposite).tolist())}
    for v in verts:
        nbr_lists.append([opp_rank[w] for w in H.retained_neighbors(v)])
    cov = bytearray(n)
    nn = 0
    g = 0
    yield 0, 0
    for i in range(1, 1 << n):
        j = (i & -i).bit_length() - 1
        g ^= 1 << j
        if (g >> j) & 1:
            for w in nbr_lists[j]:
                cov[w] += 1
                if cov[w] == 1:
                    nn += 1
        else:
            for w in nbr_lists[j]:
                cov[w] -= 1
                if cov[w] == 0:
                    nn -= 1
        yield g, nn


@dataclass(frozen=True)
class PartitionFunctions:
    """Exact polymer-model normalizers for one side of one configuration.

    z_full sums over all decomposable subsets; z_le_k / z_k additionally cap
    every component's size at k / pin it to exactly k; z1 is the singleton
    model.  Tilde variants weight components by per-vertex products instead of
    joint neighborhoods; ztilde_closed is the unrestricted per-vertex model,
    whose closed form is the product of (1 + 2^-N(v)).
    """

    k: int
    z_full: DyadicWeight
    z_le_k: DyadicWeight
    z_k: DyadicWeight
    z1: DyadicWeight
    zt_le_k: DyadicWeight
    zt_k: DyadicWeight
    ztilde_closed: DyadicWeight
    ztilde_log2: float


def ztilde_closed_form(H: PercolatedHypercube, side: Side) -> tuple[DyadicWeight | None, float]:
    """Product of (1 + 2^-N(v)) over the side: exact for d <= 12, log2 always."""
    degs = H.degrees()[side_vertices(H.d, side)]
    log2_val = float(np.sum(np.log1p(np.exp2(-degs.astype(np.float64)))) / np.log(2.0))
    if H.d > 12:
        return None, log2_val
    num = 1
    shift = 0
    for k in degs.tolist():
        num *= (1 << k) + 1
        shift += k
    return DyadicWeight(num, shift), log2_val


def partition_functions(H: PercolatedHypercube, side: Side, k: int = 2) -> PartitionFunctions:
    if H.d > _ENUM_MAX_D:
        raise SizeError(f"partition functions enumerate 2^(2^(d-1)) subsets; d={H.d} > {_ENUM_MAX_D}")
    if k < 1:
        raise ContractError("component size cap k must be >= 1")
    d = H.d
    verts = side_vertices(d, side).tolist()
    degs = H.degrees()

    z_full = DyadicWeight.zero()
    z_le_k = DyadicWeight.zero()
    z_k = DyadicWeight.zero()
    z1 = DyadicWeight.zero()
    zt_le_k = DyadicWeight.zero()
    zt_k = DyadicWeight.zero()

    for mask, nn in iter_subsets_with_neighborhood(H, side):
        S = [verts[r] for r in range(len(verts)) if (mask >> r) & 1]
        comps = two_linked_components(d, S, side)
        if not all(is_valid_polymer(d, c, side) for c in comps):
            continue
        w = DyadicWeight.pow2(-nn)
        wt = DyadicWeight.pow2(-int(sum(degs[v] for v in S)))
        sizes = [len(c) for c in comps]
        z_full = z_full + w
        if all(s <= k for s in sizes):
            z_le_k = z_le_k + w
            zt_le_k = zt_le_k + wt
        if all(s == k for s in sizes):
            z_k = z_k + w
            zt_k = zt_k + wt
        if all(s == 1 for s in sizes):
            z1 = z1 + w

    zt_closed, zt_log2 = ztilde_closed_form(H, side)
    assert zt_closed is not None
    return PartitionFunctions(
        k=k,
        z_full=z_full,
        z_le_k=z_le_k,
        z_k=z_k,
        z1=z1,
        zt_le_k=zt_le_k,
        zt_k=zt_k,
        ztilde_closed=zt_closed,
        ztilde_log2=zt_log2,
    )


# ---------------------------------------------------------------------------
# dimer sums (vectorized over direction pairs; exact via histograms)
# ---------------------------------------------------------------------------


def _dimer_hists(H: PercolatedHypercube, side: Side, ball: np.ndarray | None):
    """Exact histograms of N(pair) and N(u)+N(v) over a side's dimers.

    `ball` is an optional bool[2^d] lookup; a dimer is included when either
    endpoint lies in it (used for adjacency sums).  Joint neighborhoods come
    from N(u)+N(v) minus the number of shared vertices kept on both edges.
    """
    d = H.d
    verts = side_vertices(d, side).astype(np.int64)
    deg = H.degrees()
    eb = H.bit_table
    hist_joint = np.zeros(2 * d + 1, dtype=np.int64)
    hist_split = np.zeros(2 * d + 1, dtype=np.int64)
    for i in range(d):
        for j in range(i + 1, d):
            m = (1 << i) | (1 << j)
            u = verts
            v = verts ^ m
            sel = u < v
            if ball is not None:
                sel = sel & (ball[u] | ball[v])
            uu = u[sel]
            vv = v[sel]
            if uu.size == 0:
                continue
            s = deg[uu] + deg[vv]
            shared = (eb[uu, i] & eb[vv, j]).astype(np.int64) + (
                eb[uu, j] & eb[vv, i]
            ).astype(np.int64)
            hist_joint += np.bincount(s - shared, minlength=2 * d + 1)
            hist_split += np.bincount(s, minlength=2 * d + 1)
    return hist_joint, hist_split


def _hist_to_dyadic(hist: np.ndarray) -> DyadicWeight:
    total = DyadicWeight.zero()
    for k, c in enumerate(hist.tolist()):
        if c:
            total = total + DyadicWeight(c, k)
    return total


def delta_sums(H: PercolatedHypercube, side: Side) -> tuple[DyadicWeight, DyadicWeight]:
    """(sum of 2^-N(pair), sum of 2^-N(u)-N(v)) over the side's dimers, exact."""
    if H.d > _DIMER_MAX_D:
        raise SizeError(f"dimer sums support d <= {_DIMER_MAX_D}")
    if H.d < 2:
        return DyadicWeight.zero(), DyadicWeight.zero()
    hj, hs = _dimer_hists(H, side, None)
    return _hist_to_dyadic(hj), _hist_to_dyadic(hs)


def distance2_ball(d: int, S, side: Side) -> np.ndarray:
    """bool[2^d] marking S and same-side vertices at Hamming distance 2 from S."""
    ball = np.zeros(1 << d, dtype=bool)
    for v in S:
        ball[v] = True
        for i in range(d):
            for j in range(i + 1, d):
                ball[v ^ (1 << i) ^ (1 << j)] = True
    return ball


def dimer_adjacent_to_set(dim: Dimer, S) -> bool:
    """True when the dimer intersects S or shares an unpercolated neighbor with it."""
    for v in S:
        if v == dim.u or v == dim.v:
            return True
        if bin(v ^ dim.u).count("1") == 2 or bin(v ^ dim.v).count("1") == 2:
            return True
    return False


def adjacency(H: PercolatedHypercube, side: Side, S) -> tuple[DyadicWeight, DyadicWeight]:
    """Total (joint, per-vertex) weight of dimers adjacent to or meeting S."""
    if H.d > _DIMER_MAX_D:
        raise SizeError(f"adjacency sums support d <= {_DIMER_MAX_D}")
    _check_side(H.d, S, side)
    if not S or H.d < 2:
        return DyadicWeight.zero(), DyadicWeight.zero()
    ball = distance2_ball(H.d, S, side)
    hj, hs = _dimer_hists(H, side, ball)
    return _hist_to_dyadic(hj), _hist_to_dyadic(hs)


def is_separated_singleton_config(d: int, S, side: Side) -> bool:
    comps = two_linked_components(d, S, side)
    return all(len(c) == 1 and is_valid_polymer(d, c, side) for c in comps)


def compat2(H: PercolatedHypercube, side: Side, S1) -> list[Dimer]:
    """Dimers not adjacent to (and not meeting) the singleton configuration S1."""
    if H.d > 14:
        raise SizeError("compat2 materializes the dimer list; d <= 14")
    if not is_separated_singleton_config(H.d, S1, side):
        raise ContractError("S1 must be a well-separated set of valid singleton polymers")
    return [dim for dim in enumerate_dimers(H.d, side) if not dimer_adjacent_to_set(dim, S1)]


# ---------------------------------------------------------------------------
# layers (deterministic greedy coloring of the dimer conflict graph)
# ---------------------------------------------------------------------------


def _dimer_influence_mask(d: int, dim: Dimer) -> int:
    """Same-side vertices whose membership in S can make this dimer adjacent to S."""
    mask = 0
    for x in (dim.u, dim.v):
        mask |= 1 << x
        for i in range(d):
            for j in range(i + 1, d):
                mask |= 1 << (x ^ (1 << i) ^ (1 << j))
    return mask


@lru_cache(maxsize=16)
def layer_partition(d: int, side: Side) -> tuple[tuple[Dimer, ...], ...]:
    """Partition the side's dimers into classes with disjoint influence sets.

    Within a class no two dimers can be made adjacent-to-S by a single vertex,
    i.e. their endpoints are pairwise at distance >= 3 in the shared-neighbor
    graph.  Greedy first-fit coloring in canonical dimer order; the class
    count is at most the conflict-graph degree plus one.
    """
    if d < 2:
        return ()
    dimers = enumerate_dimers(d, side)
    class_masks: list[int] = []
    classes: list[list[Dimer]] = []
    for dim in dimers:
        m = _dimer_influence_mask(d, dim)
        for idx, cm in enumerate(class_masks):
            if cm & m == 0:
                class_masks[idx] = cm | m
                classes[idx].append(dim)
                break
        else:
            class_masks.append(m)
            classes.append([dim])
    return tuple(tuple(c) for c in classes)


def layer_of(d: int, side: Side) -> dict[Dimer, int]:
    return {dim: l for l, cls in enumerate(layer_partition(d, side)) for dim in cls}


STATUS_OVERLAP_FIRST = "O1"
STATUS_OVERLAP_SECOND = "O2"
STATUS_NEIGHBOR = "N"


@dataclass(frozen=True)
class AdjBreakdown:
    """Cell counts of dimers adjacent to S, by type, layer, and status.

    Type of a dimer (u < v) is (N(u), N(v)); status is O1 if u is in S, O2 if
    only v is, N when the dimer merely shares a neighbor with a singleton of S
    (witnessed by the smallest such vertex, whose degree keys the refined N
    cells).  Every adjacent dimer lands in exactly one cell, and the joint
    weight obeys adj <= sum over cells of count * 4 * 2^(-a-b).
    """

    cells: dict[tuple[int, int, int, str], int]
    neighbor_cells: dict[tuple[int, int, int, int], int]
    n_adjacent: int
    adj: DyadicWeight
    adj_tilde: DyadicWeight

    def weight_upper_bound(self) -> float:
        return sum(4.0 * 2.0 ** (-a - b) * c for (a, b, _, _), c in self.cells.items())


def adj_breakdown(H: PercolatedHypercube, side: Side, S) -> AdjBreakdown:
    if H.d > 12:
        raise SizeError("adjacency breakdown supports d <= 12")
    _check_side(H.d, S, side)
    S = frozenset(S)
    deg = H.degrees()
    layers = layer_of(H.d, side)
    cells: dict[tuple[int, int, int, str], int] = {}
    ncells: dict[tuple[int, int, int, int], int] = {}
    n_adj = 0
    for dim in enumerate_dimers(H.d, side):
        if not dimer_adjacent_to_set(dim, S):
            continue
        n_adj += 1
        a = int(deg[dim.u])
        b = int(deg[dim.v])
        l = layers[dim]
        if dim.u in S:
            status = STATUS_OVERLAP_FIRST
        elif dim.v in S:
            status = STATUS_OVERLAP_SECOND
        else:
            status = STATUS_NEIGHBOR
            witness = min(
                v
                for v in S
                if bin(v ^ dim.u).count("1") == 2 or bin(v ^ dim.v).count("1") == 2
            )
            key = (a, b, int(deg[witness]), l)
            ncells[key] = ncells.get(key, 0) + 1
        cells[(a, b, l, status)] = cells.get((a, b, l, status), 0) + 1
    adj, adj_tilde = adjacency(H, side, S)
    return AdjBreakdown(cells=cells, neighbor_cells=ncells, n_adjacent=n_adj, adj=adj, adj_tilde=adj_tilde)


# ---------------------------------------------------------------------------
# dimer-separation sandwich (exact finite-size inequalities)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DimerSeparationBounds:
    """Exact pieces of the two-sided bound on the compatible-dimer sum.

    restricted: sum over pairwise-compatible dimer families inside
    compat2(S1); excluded: the exact mass of incompatible families,
    so restricted + excluded is the unrestricted product of (1 + w_dimer).
    lower/upper are exp(sum - sum of squares / 2) and exp(sum) over
    compatible-dimer weights; pair_bound is the proof's cap on `excluded`.
    """

    restricted: DyadicWeight
    excluded: DyadicWeight
    unrestricted: DyadicWeight
    lower: float
    upper: float
    pair_bound: float


def dimer_separation_bounds(H: PercolatedHypercube, side: Side, S1) -> DimerSeparationBounds:
    if H.d > _ENUM_MAX_D:
        raise SizeError(f"dimer family enumeration supports d <= {_ENUM_MAX_D}")
    free = compat2(H, side, S1)
    d = H.d
    weights = [
        DyadicWeight.pow2(-neighborhood_size(H, {dim.u, dim.v}, side)) for dim in free
    ]
    unrestricted = DyadicWeight.one()
    for w in weights:
        unrestricted = unrestricted * (DyadicWeight.one() + w)

    def compatible(a: Dimer, b: Dimer) -> bool:
        return not any(
            x == y or bin(x ^ y).count("1") == 2 for x in (a.u, a.v) for y in (b.u, b.v)
        )

    restricted = DyadicWeight.zero()

    def rec(idx: int, chosen: list[int], acc: DyadicWeight):
        nonlocal restricted
        if idx == len(free):
            restricted = restricted + acc
            return
        rec(idx + 1, chosen, acc)
        if all(compatible(free[idx], free[c]) for c in chosen):
            chosen.append(idx)
            rec(idx + 1, chosen, acc * weights[idx])
            chosen.pop()

    rec(0, [], DyadicWeight.one())
    excluded = unrestricted - restricted

    sum_w = sum(float(w) for w in weights)
    all_dimers = enumerate_dimers(d, side)
    all_w = {
        dim: float(DyadicWeight.pow2(-neighborhood_size(H, {dim.u, dim.v}, side)))
        for dim in all_dimers
    }
    sum_sq_all = sum(w * w for w in all_w.values())
    pair_sum = 0.0
    for a in all_dimers:
        for b in all_dimers:
            if a < b and not compatible(a, b):
                pair_sum += 2.0 * all_w[a] * all_w[b]
    lower = exp(-0.5 * sum_sq_all) * exp(sum_w)
    upper = exp(sum_w)
    pair_bound = pair_sum * exp(sum_w)
    return DimerSeparationBounds(
        restricted=restricted,
        excluded=excluded,
        unrestricted=unrestricted,
        lower=lower,
        upper=upper,
        pair_bound=pair_bound,
    )

"""Exact ground truth: independent-set counts, defect laws, a uniform sampler.

Everything here is arbitrary-precision: counts are big integers, laws are
rationals.  Independent sets of the bipartite percolated hypercube are counted
two ways — a direct independence test over all vertex subsets (tiny d), and
the even-side representation

    i = sum over S subset of Even of 2^(2^(d-1) - N(S)),

where N(S) is the number of odd vertices adjacent to S in the percolated
graph: every subset of the odd non-neighbors of S completes S to an
independent set.  The even-side sum runs in Gray-code order with incremental
coverage counters, and at d=6 the 2^32-subset walk drops into a parallel
numba kernel; only the histogram of N(S) is needed to rebuild the exact count.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import polymer, rng
from ._kernels import _evensum_hist
from .dyadic import DyadicWeight
from .errors import SizeError
from .lattice import PercolatedHypercube, Side, side_vertices

_BRUTE_MAX_D = 4
_EVENSUM_MAX_D = 6
_LAW_MAX_D = 5

is_polymer_decomposable = polymer.is_polymer_decomposable


@dataclass(frozen=True)
class ExactCount:
    """An exact independent-set count with its provenance."""

    value: int
    d: int
    p: float
    seed: int
    method: str

    def __str__(self) -> str:
        return str(self.value)


def count_bruteforce(H: PercolatedHypercube) -> ExactCount:
    """Count subsets of all vertices containing no retained edge (d <= 4)."""
    if H.d > _BRUTE_MAX_D:
        raise SizeError(f"brute-force count enumerates 2^(2^d) subsets; d <= {_BRUTE_MAX_D}")
    nv = 1 << H.d
    adj = [H.retained_neighbor_mask(v) for v in range(nv)]
    masks = np.arange(1 << nv, dtype=np.uint32)
    forbidden = np.zeros(1 << nv, dtype=np.uint32)
    for v in range(nv):
        sel = (masks >> np.uint32(v)) & np.uint32(1)
        forbidden |= sel * np.uint32(adj[v])
    independent = (forbidden & masks) == 0
    return ExactCount(int(independent.sum()), H.d, H.p, H.seed, "brute")


def _neighborhood_histogram(H: PercolatedHypercube, side: Side) -> list[int]:
    """hist[k] = number of subsets S of the side with N(S) = k."""
    d = H.d
    n_side = 1 << (d - 1)
    if d <= 4:
        hist = [0] * (n_side + 1)
        for _, nn in polymer.iter_subsets_with_neighborhood(H, side):
            hist[nn] += 1
        return hist
    # flat retained-neighbor lists in opposite-side ranks, for the kernel
    verts = side_vertices(d, side).tolist()
    opp_rank = {v: r for r, v in enumerate(side_vertices(d, side.opposite).tolist())}
    flat: list[int] = []
    off = [0]
    for v in verts:
        flat.extend(opp_rank[w] for w in H.retained_neighbors(v))
        off.append(len(flat))
    nbr_flat = np.asarray(flat, dtype=np.int32)
    nbr_off = np.asarray(off, dtype=np.int32)
    n_blocks = 64 if d == 6 else 8
    hist = _evensum_hist(n_side, nbr_flat, nbr_off, n_side, n_blocks)
    return hist.tolist()


def count_evensum(H: PercolatedHypercube) -> ExactCount:
    """Exact count via the even-side representation (d <= 6)."""
    if H.d > _EVENSUM_MAX_D:
        raise SizeError(f"even-side count walks 2^(2^(d-1)) subsets; d <= {_EVENSUM_MAX_D}")
    n_side = 1 << (H.d - 1)
    hist = _neighborhood_histogram(H, Side.EVEN)
    value = sum(c << (n_side - k) for k, c in enumerate(hist) if c)
    return ExactCount(value, H.d, H.p, H.seed, "evensum")


def log2_of_int(c: int) -> float:
    """Accurate log2 of a (possibly huge) positive integer."""
    nbits = c.bit_length()
    if nbits <= 64:
        return float(np.log2(float(c)))
    top = c >> (nbits - 64)
    return float(np.log2(float(top))) + (nbits - 64)


def log2_exact_count(H: PercolatedHypercube) -> float:
    """log2 of the exact count (d <= 6)."""
    return log2_of_int(count_evensum(H).value)


# ---------------------------------------------------------------------------
# defect-side laws
# ---------------------------------------------------------------------------


def _side_weights(H: PercolatedHypercube, side: Side) -> tuple[list[int], list[int], int]:
    """(subset masks in Gray order, weight exponents 2^(n_side - N(S)), total)."""
    if H.d > _LAW_MAX_D:
        raise SizeError(f"defect laws enumerate all side subsets; d <= {_LAW_MAX_D}")
    n_side = 1 << (H.d - 1)
    masks: list[int] = []
    exps: list[int] = []
    for mask, nn in polymer.iter_subsets_with_neighborhood(H, side):
        masks.append(mask)
        exps.append(n_side - nn)
    total = sum(1 << e for e in exps)
    return masks, exps, total


def _mask_to_set(mask: int, verts: list[int]) -> frozenset[int]:
    return frozenset(verts[r] for r in range(len(verts)) if (mask >> r) & 1)


def defect_distribution(
    H: PercolatedHypercube, side: Side, conditional: bool = False
) -> dict[frozenset[int], Fraction]:
    """Exact law of I's intersection with the side, for uniform independent I.

    P[I cap side = S] is proportional to 2^(-N(S)) over all subsets S of the
    side.  With conditional=True the law is further conditioned on S being
    polymer-decomposable.
    """
    masks, exps, total = _side_weights(H, side)
    verts = side_vertices(H.d, side).tolist()
    if not conditional:
        return {
            _mask_to_set(m, verts): Fraction(1 << e, total) for m, e in zip(masks, exps)
        }
    keep = []
    for m, e in zip(masks, exps):
        S = _mask_to_set(m, verts)
        if polymer.is_polymer_decomposable(H.d, S, side):
            keep.append((S, e))
    z = sum(1 << e for _, e in keep)
    return {S: Fraction(1 << e, z) for S, e in keep}


def sample_uniform_exact(H: PercolatedHypercube, seed: int) -> frozenset[int]:
    """One exactly-uniform independent set (d <= 5).

    The even side S is drawn with probability 2^(2^(d-1)-N(S))/i, then each
    odd non-neighbor of S joins independently with probability 1/2; the
    completion count matches each S's weight, so the output law is exactly
    uniform.  Deterministic in (H, seed).
    """
    cache = H.__dict__.get("_defect_cdf")
    if cache is None:
        masks, exps, total = _side_weights(H, Side.EVEN)
        prefix: list[int] = []
        acc = 0
        for e in exps:
            acc += 1 << e
            prefix.append(acc)
        cache = (masks, prefix, total)
        object.__setattr__(H, "_defect_cdf", cache)
    masks, prefix, total = cache

    key_sel = rng.derive_key(seed, "exact/defect")
    r = rng.randbelow(key_sel, total)
    idx = bisect.bisect_right(prefix, r)
    verts = side_vertices(H.d, Side.EVEN).tolist()
    S = _mask_to_set(masks[idx], verts)

    blocked = set()
    for v in S:
        blocked.update(H.retained_neighbors(v))
    key_fill = rng.derive_key(seed, "exact/fill")
    out = set(S)
    half = 1 << 63
    for rnk, w in enumerate(side_vertices(H.d, Side.ODD).tolist()):
        if w not in blocked and rng.value_at(key_fill, rnk) < half:
            out.add(w)
    return frozenset(out)


# ---------------------------------------------------------------------------
# decomposability accounting (exact inclusion-exclusion inputs)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecomposabilityCounts:
    """Exact counts of independent sets by which sides are polymer-decomposable."""

    total: int
    even_decomposable: int
    odd_decomposable: int
    both_decomposable: int
    neither_decomposable: int


def count_by_decomposability(H: PercolatedHypercube) -> DecomposabilityCounts:
    """Classify every independent set by decomposability of each side (d <= 5).

    Works side-by-side: for each even subset S, the completions are the
    subsets of the odd non-neighbors of S, and the number of decomposable
    completions is a subset-sum over the non-neighbor mask.
    """
    if H.d > _LAW_MAX_D:
        raise SizeError(f"decomposability accounting supports d <= {_LAW_MAX_D}")
    d = H.d
    n_side = 1 << (d - 1)
    evens = side_vertices(d, Side.EVEN).tolist()
    odds = side_vertices(d, Side.ODD).tolist()
    odd_rank = {v: r for r, v in enumerate(odds)}

    # decomposability flag for every odd-side subset, then subset-sums
    dec_count = np.zeros(1 << n_side, dtype=np.int64)
    for mask in range(1 << n_side):
        S = _mask_to_set(mask, odds)
        dec_count[mask] = 1 if polymer.is_polymer_decomposable(d, S, Side.ODD) else 0
    for bit in range(n_side):
        step = 1 << bit
        for mask in range(1 << n_side):
            if mask & step:
                dec_count[mask] += dec_count[mask ^ step]

    total = 0
    n_even = 0
    n_odd = 0
    n_both = 0
    n_neither = 0
    for mask, nn in polymer.iter_subsets_with_neighborhood(H, Side.EVEN):
        S = _mask_to_set(mask, evens)
        contrib = 1 << (n_side - nn)
        blocked = 0
        for v in S:
            for w in H.retained_neighbors(v):
                blocked |= 1 << odd_rank[w]
        free_mask = ((1 << n_side) - 1) ^ blocked
        odd_dec = int(dec_count[free_mask])
        even_ok = polymer.is_polymer_decomposable(d, S, Side.EVEN)
        total += contrib
        n_odd += odd_dec
        if even_ok:
            n_even += contrib
            n_both += odd_dec
        else:
            n_neither += contrib - odd_dec
    return DecomposabilityCounts(
        total=total,
        even_decomposable=n_even,
        odd_decomposable=n_odd,
        both_decomposable=n_both,
        neither_decomposable=n_neither,
    )


def decomposable_weight_sum(H: PercolatedHypercube, side: Side) -> DyadicWeight:
    """Sum of 2^(-N(S)) over polymer-decomposable S (equals the polymer normalizer)."""
    masks, exps, _ = _side_weights(H, side)
    verts = side_vertices(H.d, side).tolist()
    n_side = 1 << (H.d - 1)
    out = DyadicWeight.zero()
    for m, e in zip(masks, exps):
        if polymer.is_polymer_decomposable(H.d, _mask_to_set(m, verts), side):
            out = out + DyadicWeight.pow2(e - n_side)
    return out

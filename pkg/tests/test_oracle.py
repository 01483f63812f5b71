import math
from fractions import Fraction

import pytest

from qdp import Side, SizeError, build_percolation
from qdp import oracle, polymer
from qdp.lattice import side_vertices


def test_bruteforce_examples():
    assert oracle.count_bruteforce(build_percolation(1, 1.0, 0)).value == 3
    assert oracle.count_bruteforce(build_percolation(2, 0.0, 5)).value == 16
    assert oracle.count_bruteforce(build_percolation(2, 1.0, 9)).value == 7
    with pytest.raises(SizeError):
        oracle.count_bruteforce(build_percolation(5, 0.5, 0))


def test_evensum_equals_bruteforce():
    for d in (3, 4):
        for p in (0.3, 0.6, 0.9):
            for seed in range(4):
                H = build_percolation(d, p, seed)
                assert oracle.count_evensum(H).value == oracle.count_bruteforce(H).value


def test_evensum_degenerate_and_size_guard():
    for d in (1, 3, 4):
        assert oracle.count_evensum(build_percolation(d, 0.0, 1)).value == 2 ** (2**d)
    assert oracle.count_evensum(build_percolation(1, 1.0, 1)).value == 3
    with pytest.raises(SizeError):
        oracle.count_evensum(build_percolation(7, 0.5, 0))


def test_evensum_kernel_path_matches_python_gray():
    # d=5 routes through the parallel kernel; recompute with the shared iterator
    H = build_percolation(5, 0.55, 9)
    total = 0
    for _, nn in polymer.iter_subsets_with_neighborhood(H, Side.EVEN):
        total += 1 << (16 - nn)
    assert oracle.count_evensum(H).value == total


def test_count_lower_bound_invariant():
    for d in (2, 3, 4):
        H = build_percolation(d, 0.8, d)
        assert oracle.count_evensum(H).value >= 2 * 2 ** (2 ** (d - 1)) - 1


def test_defect_distribution_sums_to_one_and_matches_count():
    H = build_percolation(4, 0.6, 2)
    law = oracle.defect_distribution(H, Side.EVEN)
    assert sum(law.values()) == 1
    i = oracle.count_bruteforce(H).value
    # unnormalized weights rebuild the exact count
    total = sum(pr * i for pr in law.values())
    assert total == i
    assert law[frozenset()] == Fraction(2 ** (2**3), i)


def test_empty_set_is_largest_atom_for_p_at_least_half():
    for p in (0.5, 0.8):
        H = build_percolation(4, p, 3)
        law = oracle.defect_distribution(H, Side.EVEN)
        assert law[frozenset()] == max(law.values())


def test_p_zero_defect_law_is_uniform():
    H = build_percolation(3, 0.0, 1)
    law = oracle.defect_distribution(H, Side.EVEN)
    assert len(law) == 2**4
    assert set(law.values()) == {Fraction(1, 16)}


def _is_independent(H, I):
    for v in I:
        for l in range(H.d):
            w = v ^ (1 << l)
            if w in I and H.edge_retained(v, w):
                return False
    return True


def test_exact_sampler_outputs_independent_sets():
    for p in (0.0, 0.5, 1.0):
        H = build_percolation(4, p, 8)
        for seed in range(25):
            assert _is_independent(H, oracle.sample_uniform_exact(H, seed))


def test_exact_sampler_multinomial_d2_p1():
    H = build_percolation(2, 1.0, 0)
    counts: dict[frozenset, int] = {}
    n = 100_000
    for seed in range(n):
        I = oracle.sample_uniform_exact(H, seed)
        counts[I] = counts.get(I, 0) + 1
    assert len(counts) == 7
    sigma = math.sqrt(n * (1 / 7) * (6 / 7))
    for c in counts.values():
        assert abs(c - n / 7) <= 4 * sigma


def test_exact_sampler_p0_uniform_over_all_subsets():
    H = build_percolation(2, 0.0, 0)
    seen = {oracle.sample_uniform_exact(H, s) for s in range(4000)}
    assert len(seen) == 16


def test_is_polymer_decomposable():
    assert oracle.is_polymer_decomposable(4, set(), Side.EVEN)
    for d in (2, 3, 4):
        full = set(side_vertices(d, Side.EVEN).tolist())
        assert not oracle.is_polymer_decomposable(d, full, Side.EVEN)
    for d in (3, 4, 5):
        assert oracle.is_polymer_decomposable(d, {0}, Side.EVEN)
    # d=2 is the exception: both even vertices share the same neighborhood
    assert not oracle.is_polymer_decomposable(2, {0}, Side.EVEN)


def test_decomposability_accounting_identity():
    for seed in range(3):
        for p in (0.5, 0.8):
            H = build_percolation(4, p, seed)
            cc = oracle.count_by_decomposability(H)
            i = oracle.count_bruteforce(H).value
            assert cc.total == i
            assert (
                cc.even_decomposable
                + cc.odd_decomposable
                - cc.both_decomposable
                + cc.neither_decomposable
                == i
            )
            # polymer-module route agrees exactly
            pf = oracle.decomposable_weight_sum(H, Side.EVEN)
            assert pf.as_fraction() * 2 ** (2**3) == cc.even_decomposable


def test_conditional_defect_law():
    H = build_percolation(4, 0.7, 5)
    cond = oracle.defect_distribution(H, Side.EVEN, conditional=True)
    assert sum(cond.values()) == 1
    assert all(
        polymer.is_polymer_decomposable(4, S, Side.EVEN) for S in cond
    )


def test_evensum_block_count_invariance():
    # the parallel walk is an exact integer reduction: block layout is irrelevant
    from qdp._kernels import _evensum_hist
    from qdp.lattice import side_vertices

    H = build_percolation(5, 0.45, 13)
    verts = side_vertices(5, Side.EVEN).tolist()
    opp_rank = {v: r for r, v in enumerate(side_vertices(5, Side.ODD).tolist())}
    flat, off = [], [0]
    for v in verts:
        flat.extend(opp_rank[w] for w in H.retained_neighbors(v))
        off.append(len(flat))
    import numpy as np

    nbr_flat = np.asarray(flat, dtype=np.int32)
    nbr_off = np.asarray(off, dtype=np.int32)
    hists = [
        _evensum_hist(16, nbr_flat, nbr_off, 16, blocks).tolist() for blocks in (1, 3, 8, 64)
    ]
    assert all(h == hists[0] for h in hists)


def test_full_cube_counts_match_classical_values():
    # i(Q_d) at p=1 for d=1..6: classical integer sequence, an external
    # anchor for the whole counting stack (d=6 exercises the parallel walk)
    known = {1: 3, 2: 7, 3: 35, 4: 743, 5: 254475, 6: 19768832143}
    for d in (1, 2, 3, 4):
        assert oracle.count_bruteforce(build_percolation(d, 1.0, 0)).value == known[d]
    for d in (5, 6):
        assert oracle.count_evensum(build_percolation(d, 1.0, 0)).value == known[d]

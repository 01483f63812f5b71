import math
import random

import numpy as np
import pytest

from qdp import ContractError, Side, build_percolation
from qdp import oracle, polymer, rng, sampler


def _is_independent(H, I):
    for v in I:
        for l in range(H.d):
            w = v ^ (1 << l)
            if w in I and H.edge_retained(v, w):
                return False
    return True


def test_single_draws_are_sound():
    H = build_percolation(6, 0.7, 2)
    seen_success = seen_failure = False
    for t in range(50):
        out = sampler.approx_sample(H, 99, trial=t)
        assert abs(out.q_even + out.q_odd - 1.0) < 1e-12
        if out.success:
            seen_success = True
            assert _is_independent(H, out.independent_set)
            side_par = out.side.parity
            assert out.defect_set == frozenset(
                v for v in out.independent_set if bin(v).count("1") & 1 == side_par
            )
        else:
            seen_failure = True
            assert out.failure_step in (3, 5)
            assert out.failure_reason in (
                "triple-2-linked",
                "oversized-closure",
                "dimer-collision",
                "dimer-singleton-adjacency",
            )
    assert seen_success and seen_failure


def test_batch_matches_single_draws():
    H = build_percolation(5, 0.6, 4)
    q_even, _ = sampler.side_weights(H)
    u = rng.uniforms(rng.derive_key(77, sampler._SIDE_STREAM), 0, 200)
    for side, ids in (
        (Side.EVEN, np.nonzero(u < q_even)[0]),
        (Side.ODD, np.nonzero(u >= q_even)[0]),
    ):
        codes, defects, n_bad = sampler._run_side_batch(
            H, side, 77, ids.astype(np.int64), do_fill=True
        )
        assert n_bad == 0
        verts = sampler._tables(H, side).verts.tolist()
        for k, t in enumerate(ids.tolist()):
            out = sampler.approx_sample(H, 77, trial=int(t))
            assert out.side == side
            code = int(codes[k])
            if code == 0:
                assert out.success
                mask = int(defects[k])
                got = frozenset(verts[r] for r in range(len(verts)) if (mask >> r) & 1)
                assert got == out.defect_set
            else:
                step, reason = sampler._CODE_INFO[code]
                assert not out.success
                assert (out.failure_step, out.failure_reason) == (step, reason)


def test_success_outputs_verified_independent():
    H = build_percolation(8, 0.9, 1)
    rep = sampler.failure_rate(H, 3000, 5, verify=True)
    assert rep.independence_violations == 0
    assert rep.trials == 3000


def test_step3_predicate_equivalence_d6():
    # at d >= 4, "not in PD<=2" is exactly "some 2-linked component has >= 3 vertices"
    rnd = random.Random(0)
    verts = [v for v in range(64) if bin(v).count("1") % 2 == 0]
    singleton_ok, dimer_ok = polymer.small_polymer_validity(6)
    assert singleton_ok and dimer_ok
    for _ in range(2000):
        S = {v for v in verts if rnd.random() < 0.1}
        comps = polymer.two_linked_components(6, S, Side.EVEN)
        strict = all(
            len(c) <= 2 and polymer.is_valid_polymer(6, c, Side.EVEN) for c in comps
        )
        size_only = all(len(c) <= 2 for c in comps)
        assert strict == size_only


def test_step3_predicate_diverges_at_d3():
    # a single dimer is a valid size-2 component but an invalid polymer at d=3
    comps = polymer.two_linked_components(3, {0, 3}, Side.EVEN)
    assert [len(c) for c in comps] == [2]
    assert not polymer.is_valid_polymer(3, {0, 3}, Side.EVEN)


def test_step5_phrasing_equivalence_d6():
    # membership test vs the explicit adjacency/overlap phrasing, random states
    rnd = random.Random(3)
    H = build_percolation(6, 0.6, 11)
    verts = sampler._tables(H, Side.EVEN).verts.tolist()
    from qdp.lattice import enumerate_dimers

    dimers = enumerate_dimers(6, Side.EVEN)

    def near(x, y):
        return x == y or bin(x ^ y).count("1") == 2

    for _ in range(100_000):
        s1 = [v for v in verts if rnd.random() < 0.04]
        if not polymer.is_separated_singleton_config(6, s1, Side.EVEN):
            continue
        s2 = [dimers[rnd.randrange(len(dimers))] for _ in range(rnd.randrange(3))]
        s2 = list(dict.fromkeys(s2))
        # explicit phrasing
        explicit_fail = any(
            any(near(x, y) for x in (a.u, a.v) for y in (b.u, b.v))
            for i, a in enumerate(s2)
            for b in s2[i + 1 :]
        ) or any(any(near(v, x) for x in (dm.u, dm.v)) for dm in s2 for v in s1)
        # configuration-membership phrasing: all polymers valid + pairwise compatible
        union = list(s1) + [x for dm in s2 for x in (dm.u, dm.v)]
        comps = polymer.two_linked_components(6, set(union), Side.EVEN)
        member = (
            len(set(union)) == len(union)
            and all(len(c) <= 2 and polymer.is_valid_polymer(6, c, Side.EVEN) for c in comps)
            and all(frozenset(dm[:2]) in [frozenset(c) for c in comps if len(c) == 2] for dm in s2)
        )
        assert member == (not explicit_fail)


def test_success_decomposition_matches_s1():
    # conditional on success, the defect set splits uniquely into the kept
    # singletons plus the drawn dimers; dimers never touch the singletons
    H = build_percolation(6, 0.55, 8)
    found = 0
    t = 0
    while found < 30 and t < 3000:
        out = sampler.approx_sample(H, 13, trial=t)
        t += 1
        if not out.success:
            continue
        found += 1
        comps = polymer.two_linked_components(H.d, out.defect_set, out.side)
        assert all(len(c) <= 2 for c in comps)
    assert found == 30


def test_failure_rate_contracts_and_determinism():
    H = build_percolation(6, 0.6, 4)
    with pytest.raises(ContractError):
        sampler.failure_rate(H, 0, 1)
    a = sampler.failure_rate(H, 500, 9)
    b = sampler.failure_rate(H, 500, 9)
    assert a == b
    # thread count must not change any trial's outcome
    import numba

    numba.set_num_threads(1)
    c = sampler.failure_rate(H, 500, 9)
    numba.set_num_threads(2)
    assert c == a


def test_failure_rate_p1():
    # at p=1 defects are rare; failures are a percent-level event, not zero
    H = build_percolation(8, 1.0, 0)
    rep = sampler.failure_rate(H, 10_000, 3)
    assert rep.rate <= 0.05
    assert rep.independence_violations == 0


def test_failure_rate_monotonicity_probe():
    # median failure rate at p=0.5 is at least the median at p=0.8 (d=10)
    rates = {}
    for p in (0.5, 0.8):
        vals = []
        for seed in range(20):
            H = build_percolation(10, p, seed)
            vals.append(sampler.failure_rate(H, 2000, seed, verify=False).rate)
        rates[p] = float(np.median(vals))
    assert rates[0.5] >= rates[0.8]


def test_exact_failure_probability_d3_p0():
    # at p=0 and d=3 the failure law is exactly computable: any two selected
    # same-side vertices are 2-linked and no dimer is a valid polymer there
    H = build_percolation(3, 0.0, 0)
    _, success_p = sampler.exact_sampler_defect_law(H, Side.EVEN)
    rep = sampler.failure_rate(H, 40_000, 7, verify=False)
    se = math.sqrt(success_p * (1 - success_p) / rep.trials)
    assert abs((1.0 - rep.rate) - success_p) <= 4 * se
    # closed form for the step-3 part: P[|S| <= 1] with inclusion prob 1/2,
    # times P[no dimer drawn] with each dimer weight 1/2
    p_step3_pass = (1 + 4) / 16
    p_step5_pass_given_s1_empty = (0.5) ** 6
    assert success_p == pytest.approx(p_step3_pass * p_step5_pass_given_s1_empty, rel=1e-9)


def test_tv_self_path_within_noise():
    H = build_percolation(3, 0.7, 2)
    rep = sampler.empirical_tv_exact_self(H, Side.EVEN, 20_000, 1)
    assert rep.tv <= rep.noise_floor


def test_tv_monotone_in_p_and_matches_exact_law():
    tvs = {}
    for p in (0.5, 0.9):
        H = build_percolation(4, p, 1)
        tvs[p] = sampler.empirical_tv_defect(H, Side.EVEN, 150_000, 3).tv
    assert tvs[0.9] <= tvs[0.5]
    # MC TV converges to the exactly-computed sampler-law TV
    H = build_percolation(4, 0.8, 1)
    law, _ = sampler.exact_sampler_defect_law(H, Side.EVEN)
    exact_cond = oracle.defect_distribution(H, Side.EVEN, conditional=True)
    tv_exact = 0.5 * sum(abs(law.get(S, 0.0) - float(pr)) for S, pr in exact_cond.items())
    rep = sampler.empirical_tv_defect(H, Side.EVEN, 150_000, 3)
    assert rep.tv == pytest.approx(tv_exact, abs=2 * rep.noise_floor)


def test_exact_sampler_law_normalizes():
    H = build_percolation(4, 0.6, 9)
    law, success_p = sampler.exact_sampler_defect_law(H, Side.ODD)
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)
    assert 0.0 < success_p <= 1.0


def test_failure_rate_p1_d10_below_one_percent():
    H = build_percolation(10, 1.0, 0)
    rep = sampler.failure_rate(H, 20_000, 3, verify=False)
    assert rep.rate <= 0.01

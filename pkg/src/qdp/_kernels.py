"""Numba kernels for the hot loops.

Everything here is a deterministic pure function of its arguments: randomness
enters only through 64-bit stream keys and counter indices (same scheme as
`qdp.rng`, reimplemented for nopython mode and covered by equivalence tests).
No fastmath is enabled anywhere, and per-trial accumulation runs in a fixed
loop order, so results are bit-identical regardless of thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _word_at(key, index):
    return _mix64(key + (np.uint64(index) + np.uint64(1)) * _GOLDEN)


@njit(cache=True, inline="always")
def _popcount(x):
    x = np.uint64(x)
    c = 0
    while x:
        x &= x - np.uint64(1)
        c += 1
    return c


@njit(cache=True)
def _fill_bit_table(d, key, threshold, evens, eb):
    """Fill eb[2^d, d] with edge indicators; edge e of even-rank r is index r*d+l.

    threshold 2^64-1 is reserved to mean certainty (retain every edge), so
    p = 1 stays exact rather than losing 2^-64 of mass to the comparison.
    """
    n_even = evens.shape[0]
    all_on = threshold == np.uint64(0xFFFFFFFFFFFFFFFF)
    for r in range(n_even):
        u = evens[r]
        base = np.uint64(r * d)
        for l in range(d):
            if all_on:
                eb[u, l] = np.uint8(1)
            else:
                w = _word_at(key, base + np.uint64(l))
                eb[u, l] = np.uint8(1) if w < threshold else np.uint8(0)
    for r in range(n_even):
        u = evens[r]
        for l in range(d):
            eb[u ^ (1 << l), l] = eb[u, l]


@njit(cache=True)
def _trial_stats(d, key, threshold, evens, odds, p2, logtab, want_wedges, want_delta, out):
    """One percolation trial: per-side vertex sums and dimer sums.

    out columns: 0 phi_log_even, 1 phi_log_odd, 2 dimer_corr_even,
    3 dimer_corr_odd, 4 delta_even, 5 deltat_even, 6 delta_odd,
    7 deltat_odd, 8 phi1_even, 9 phi1_odd, 10 phi2_even, 11 phi2_odd.
    dimer_corr is sum over dimers of (2^-N(pair) - 2^-N(u)-N(v)), accumulated
    through retained wedges at the shared vertices.
    """
    nv = 1 << d
    eb = np.empty((nv, d), dtype=np.uint8)
    _fill_bit_table(d, key, threshold, evens, eb)
    deg = np.empty(nv, dtype=np.int64)
    for x in range(nv):
        s = 0
        for l in range(d):
            s += eb[x, l]
        deg[x] = s

    for side in range(2):
        verts = evens if side == 0 else odds
        phil = 0.0
        phi1 = 0.0
        phi2 = 0.0
        for r in range(verts.shape[0]):
            k = deg[verts[r]]
            phil += logtab[k]
            phi1 += p2[k]
            phi2 += p2[k] * p2[k]
        out[0 + side] = phil
        out[8 + side] = phi1
        out[10 + side] = phi2

    if want_wedges:
        # dimers of side `s` have their shared vertices on the opposite side
        us = np.empty(d, dtype=np.int64)
        ls = np.empty(d, dtype=np.int64)
        fs = np.empty(d, dtype=np.float64)
        for side in range(2):
            centers = odds if side == 0 else evens
            acc = 0.0
            for r in range(centers.shape[0]):
                w = centers[r]
                nr = 0
                for l in range(d):
                    if eb[w, l]:
                        u = w ^ (1 << l)
                        us[nr] = u
                        ls[nr] = l
                        fs[nr] = p2[deg[u]]
                        nr += 1
                for a in range(nr):
                    ua = us[a]
                    la = ls[a]
                    fa = fs[a]
                    for b in range(a + 1, nr):
                        # second shared vertex of the dimer {us[a], us[b]}
                        b2 = eb[ua, ls[b]] & eb[us[b], la]
                        acc += fa * fs[b] * (1.0 + 0.5 * b2)
            out[2 + side] = acc

    if want_delta:
        for side in range(2):
            verts = evens if side == 0 else odds
            delta = 0.0
            deltat = 0.0
            for r in range(verts.shape[0]):
                u = verts[r]
                for i in range(d):
                    for j in range(i + 1, d):
                        v = u ^ (1 << i) ^ (1 << j)
                        if u < v:
                            ft = p2[deg[u]] * p2[deg[v]]
                            shared = (eb[u, i] & eb[v, j]) + (eb[u, j] & eb[v, i])
                            deltat += ft
                            delta += ft * (1 << shared)
            out[4 + 2 * side] = delta
            out[5 + 2 * side] = deltat


@njit(cache=True, parallel=True)
def _stats_batch(d, keys, threshold, evens, odds, p2, logtab, want_wedges, want_delta):
    n = keys.shape[0]
    out = np.zeros((n, 12), dtype=np.float64)
    for t in prange(n):
        _trial_stats(
            d, keys[t], threshold, evens, odds, p2, logtab, want_wedges, want_delta, out[t]
        )
    return out


@njit(cache=True, parallel=True)
def _evensum_hist(n_side, nbr_flat, nbr_off, n_opposite, n_blocks):
    """Histogram of N(S) over all subsets S of a 2^n_side-subset lattice.

    Gray-code walk: subsets are visited so that consecutive subsets differ in
    one vertex, and per-opposite-vertex coverage counters maintain N(S)
    incrementally.  The index range is split into contiguous blocks, each
    re-seeding its own Gray state, so blocks run in parallel and the exact
    integer histogram is independent of the schedule.
    """
    total = np.int64(1) << np.int64(n_side)
    block = (total + n_blocks - 1) // n_blocks
    hists = np.zeros((n_blocks, n_opposite + 1), dtype=np.int64)
    for b in prange(n_blocks):
        start = np.int64(b) * block
        end = min(start + block, total)
        if start >= end:
            continue
        cov = np.zeros(n_opposite, dtype=np.int8)
        hist = hists[b]
        g = start ^ (start >> np.int64(1))
        nn = 0
        for j in range(n_side):
            if (g >> np.int64(j)) & np.int64(1):
                for t in range(nbr_off[j], nbr_off[j + 1]):
                    w = nbr_flat[t]
                    cov[w] += 1
                    if cov[w] == 1:
                        nn += 1
        hist[nn] += 1
        i = start + 1
        while i < end:
            j = 0
            while ((i >> np.int64(j)) & np.int64(1)) == 0:
                j += 1
            g ^= np.int64(1) << np.int64(j)
            if (g >> np.int64(j)) & np.int64(1):
                for t in range(nbr_off[j], nbr_off[j + 1]):
                    w = nbr_flat[t]
                    cov[w] += 1
                    if cov[w] == 1:
                        nn += 1
            else:
                for t in range(nbr_off[j], nbr_off[j + 1]):
                    w = nbr_flat[t]
                    cov[w] -= 1
                    if cov[w] == 0:
                        nn -= 1
            hist[nn] += 1
            i += 1
    out = np.zeros(n_opposite + 1, dtype=np.int64)
    for b in range(n_blocks):
        for k in range(n_opposite + 1):
            out[k] += hists[b, k]
    return out


# ---------------------------------------------------------------------------
# ApproxSampler batch
# ---------------------------------------------------------------------------

# outcome codes
OK = 0
FAIL3_TRIPLE = 1
FAIL3_CLOSURE = 2
FAIL5_DIMER_COLLISION = 3
FAIL5_DIMER_SINGLETON = 4
FAIL5_CLOSURE = 5


@njit(cache=True, inline="always")
def _dist2(x, y):
    return _popcount(np.uint64(x ^ y)) == 2


@njit(cache=True, parallel=True)
def _sampler_batch(
    d,
    side_verts,
    thr_vert,
    du,
    dv,
    thr_dim,
    key_vert,
    key_dim,
    key_fill,
    trial_ids,
    singleton_ok,
    dimer_ok,
    eb,
    do_fill,
    defects_out,
):
    """Run the approximate sampler's defect-side draw for each listed trial id.

    Stream indices are addressed by trial id, so running a subset of trials,
    or the same trials split across calls, always reproduces the same draws.
    Returns (codes, n_bad) where codes[t] is the outcome code of trial t and
    n_bad counts successful trials whose completed independent set failed the
    direct independence re-check (always 0 unless there is a bug).
    defects_out (uint64[len(trial_ids)]) receives the success defect set packed
    as side-rank bits when the side has at most 64 vertices; else stays 0.
    """
    n_side = side_verts.shape[0]
    n_dim = du.shape[0]
    nv = 1 << d
    n_trials = trial_ids.shape[0]
    codes = np.zeros(n_trials, dtype=np.int8)
    bad = np.zeros(n_trials, dtype=np.int8)
    half = np.uint64(1) << np.uint64(63)
    pack = n_side <= 64

    for t in prange(n_trials):
        base_v = np.uint64(trial_ids[t]) * np.uint64(n_side)
        sel = np.empty(n_side, dtype=np.int64)
        nsel = 0
        for r in range(n_side):
            if _word_at(key_vert, base_v + np.uint64(r)) < thr_vert[r]:
                sel[nsel] = side_verts[r]
                nsel += 1

        # 2-linked components among the selected vertices (union-find)
        parent = np.empty(nsel, dtype=np.int64)
        for a in range(nsel):
            parent[a] = a
        for a in range(nsel):
            for b in range(a + 1, nsel):
                if _dist2(sel[a], sel[b]):
                    ra = a
                    while parent[ra] != ra:
                        ra = parent[ra]
                    rb = b
                    while parent[rb] != rb:
                        rb = parent[rb]
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        size = np.zeros(nsel, dtype=np.int64)
        for a in range(nsel):
            ra = a
            while parent[ra] != ra:
                ra = parent[ra]
            parent[a] = ra
            size[ra] += 1

        code = 0
        for a in range(nsel):
            if parent[a] == a:
                if size[a] >= 3:
                    code = FAIL3_TRIPLE
                    break
                if size[a] == 2 and not dimer_ok:
                    code = FAIL3_CLOSURE
                    break
                if size[a] == 1 and not singleton_ok:
                    code = FAIL3_CLOSURE
                    break
        if code != 0:
            codes[t] = code
            continue

        s1 = np.empty(nsel, dtype=np.int64)
        n1 = 0
        for a in range(nsel):
            if size[parent[a]] == 1:
                s1[n1] = sel[a]
                n1 += 1

        base_d = np.uint64(trial_ids[t]) * np.uint64(n_dim)
        s2 = np.empty(n_dim if n_dim < 4096 else 4096, dtype=np.int64)
        n2 = 0
        for k in range(n_dim):
            if _word_at(key_dim, base_d + np.uint64(k)) < thr_dim[k]:
                if n2 < s2.shape[0]:
                    s2[n2] = k
                n2 += 1
        if n2 > s2.shape[0]:
            n2 = s2.shape[0]  # unreachable in practice; keeps bounds safe

        if n2 > 0 and not dimer_ok:
            codes[t] = FAIL5_CLOSURE
            continue
        for a in range(n2):
            if code:
                break
            ka = s2[a]
            for b in range(a + 1, n2):
                kb = s2[b]
                if (
                    du[ka] == du[kb]
                    or du[ka] == dv[kb]
                    or dv[ka] == du[kb]
                    or dv[ka] == dv[kb]
                    or _dist2(du[ka], du[kb])
                    or _dist2(du[ka], dv[kb])
                    or _dist2(dv[ka], du[kb])
                    or _dist2(dv[ka], dv[kb])
                ):
                    code = FAIL5_DIMER_COLLISION
                    break
        if code == 0:
            for a in range(n2):
                if code:
                    break
                ka = s2[a]
                for b in range(n1):
                    x = s1[b]
                    if (
                        x == du[ka]
                        or x == dv[ka]
                        or _dist2(x, du[ka])
                        or _dist2(x, dv[ka])
                    ):
                        code = FAIL5_DIMER_SINGLETON
                        break
        if code != 0:
            codes[t] = code
            continue

        # success: defect set = singletons + chosen dimers
        hat = np.empty(n1 + 2 * n2, dtype=np.int64)
        for b in range(n1):
            hat[b] = s1[b]
        for a in range(n2):
            hat[n1 + 2 * a] = du[s2[a]]
            hat[n1 + 2 * a + 1] = dv[s2[a]]
        if pack:
            mask = np.uint64(0)
            for b in range(hat.shape[0]):
                # rank within side: count side vertices below (side_verts sorted)
                lo, hi = 0, n_side
                x = hat[b]
                while lo < hi:
                    mid = (lo + hi) // 2
                    if side_verts[mid] < x:
                        lo = mid + 1
                    else:
                        hi = mid
                mask |= np.uint64(1) << np.uint64(lo)
            defects_out[t] = mask

        if do_fill:
            in_set = np.zeros(nv, dtype=np.uint8)
            blocked = np.zeros(nv, dtype=np.uint8)
            for b in range(hat.shape[0]):
                x = hat[b]
                in_set[x] = 1
                for l in range(d):
                    if eb[x, l]:
                        blocked[x ^ (1 << l)] = 1
            base_f = np.uint64(trial_ids[t]) * np.uint64(nv - n_side)
            opp_rank = 0
            for x in range(nv):
                px = _popcount(np.uint64(x)) & 1
                ps = _popcount(np.uint64(side_verts[0])) & 1
                if px == ps:
                    continue
                if not blocked[x]:
                    if _word_at(key_fill, base_f + np.uint64(opp_rank)) < half:
                        in_set[x] = 1
                opp_rank += 1
            # direct independence re-check against the bitmap
            for b in range(hat.shape[0]):
                x = hat[b]
                for l in range(d):
                    if eb[x, l] and in_set[x ^ (1 << l)]:
                        bad[t] = 1
        codes[t] = OK

    nbad = 0
    for t in range(n_trials):
        nbad += bad[t]
    return codes, nbad

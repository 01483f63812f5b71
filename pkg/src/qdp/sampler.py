"""Approximate sampling of independent sets, with explicit failure accounting.

One draw: (1) pick a defect side with probability proportional to e^psi;
(2) include each side vertex independently with probability w/(1+w) for
w = 2^-N(v); (3) fail unless the result is a valid configuration of
singletons and dimers, then keep only the singletons S1; (4) include every
dimer of the side independently with probability w/(1+w) for w = 2^-N(pair);
(5) fail unless S1 plus the chosen dimers is still a valid configuration;
(6) fill the opposite side uniformly over non-neighbors.

Membership in the valid-configuration family (components of size <= 2 that
satisfy the polymer closure cap, pairwise compatible) is the single failure
predicate; at d >= 4 it coincides with the size-only phrasing ("no 2-linked
triple" / "no adjacent or overlapping pieces"), and for d <= 3 the closure
cap adds failures reported with their own reason.

Randomness: independent counter-based substreams per step (side choice,
vertex draws, dimer draws, fill draws), each addressed by (trial, item), so
single draws, batches, and parallel batches agree bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import estimator, oracle, polymer, rng
from ._kernels import (
    FAIL3_CLOSURE,
    FAIL3_TRIPLE,
    FAIL5_CLOSURE,
    FAIL5_DIMER_COLLISION,
    FAIL5_DIMER_SINGLETON,
    _sampler_batch,
)
from .errors import ContractError, SizeError
from .lattice import Dimer, PercolatedHypercube, Side, enumerate_dimers, side_vertices

_SAMPLER_MAX_D = 16
_TV_MAX_D = 5

_SIDE_STREAM = "sampler/side"
_VERTEX_STREAM = "sampler/vertices"
_DIMER_STREAM = "sampler/dimers"
_FILL_STREAM = "sampler/fill"

_CODE_INFO = {
    FAIL3_TRIPLE: (3, "triple-2-linked"),
    FAIL3_CLOSURE: (3, "oversized-closure"),
    FAIL5_DIMER_COLLISION: (5, "dimer-collision"),
    FAIL5_DIMER_SINGLETON: (5, "dimer-singleton-adjacency"),
    FAIL5_CLOSURE: (5, "oversized-closure"),
}


@dataclass(frozen=True)
class SampleOutcome:
    success: bool
    side: Side
    q_even: float
    q_odd: float
    independent_set: frozenset[int] | None = None
    defect_set: frozenset[int] | None = None
    failure_step: int | None = None
    failure_reason: str | None = None


@dataclass(frozen=True)
class _SideTables:
    verts: np.ndarray  # int64 side vertices, ascending
    thr_vert: np.ndarray  # uint64 per-rank inclusion thresholds
    du: np.ndarray  # int64 dimer endpoints (canonical order)
    dv: np.ndarray
    thr_dim: np.ndarray  # uint64 per-dimer inclusion thresholds
    singleton_ok: bool
    dimer_ok: bool


def _tables(H: PercolatedHypercube, side: Side) -> _SideTables:
    key = f"_sampler_tables_{side.value}"
    cached = H.__dict__.get(key)
    if cached is not None:
        return cached
    d = H.d
    verts = side_vertices(d, side).astype(np.int64)
    deg = H.degrees()
    thr_by_deg = np.array(
        [rng.bernoulli_threshold(2.0**-k / (1.0 + 2.0**-k)) for k in range(d + 1)],
        dtype=np.uint64,
    )
    thr_vert = thr_by_deg[deg[verts]]
    eb = H.bit_table
    us, vs, ns = [], [], []
    for i in range(d):
        for j in range(i + 1, d):
            m = (1 << i) | (1 << j)
            u = verts
            v = verts ^ m
            sel = u < v
            uu, vv = u[sel], v[sel]
            shared = (eb[uu, i] & eb[vv, j]).astype(np.int64) + (eb[uu, j] & eb[vv, i]).astype(np.int64)
            us.append(uu)
            vs.append(vv)
            ns.append(deg[uu] + deg[vv] - shared)
    if us:
        du = np.concatenate(us)
        dv = np.concatenate(vs)
        nd = np.concatenate(ns)
        order = np.lexsort((dv, du))
        du, dv, nd = du[order], dv[order], nd[order]
        thr_pair = np.array(
            [rng.bernoulli_threshold(2.0**-k / (1.0 + 2.0**-k)) for k in range(2 * d + 1)],
            dtype=np.uint64,
        )
        thr_dim = thr_pair[nd]
    else:
        du = np.zeros(0, dtype=np.int64)
        dv = np.zeros(0, dtype=np.int64)
        thr_dim = np.zeros(0, dtype=np.uint64)
    singleton_ok, dimer_ok = polymer.small_polymer_validity(d)
    tables = _SideTables(
        verts=verts,
        thr_vert=thr_vert.astype(np.uint64),
        du=du,
        dv=dv,
        thr_dim=thr_dim,
        singleton_ok=singleton_ok,
        dimer_ok=dimer_ok,
    )
    object.__setattr__(H, key, tables)
    return tables


def side_weights(H: PercolatedHypercube) -> tuple[float, float]:
    """(q_even, q_odd) proportional to e^psi per side; cached per configuration."""
    cached = H.__dict__.get("_side_weights")
    if cached is None:
        rep = estimator.psi_report(H)
        q_even = 1.0 / (1.0 + math.exp(rep.odd.psi - rep.even.psi))
        cached = (q_even, 1.0 - q_even)
        object.__setattr__(H, "_side_weights", cached)
    return cached


# ---------------------------------------------------------------------------
# single-draw reference implementation (mirrors the batch kernel exactly)
# ---------------------------------------------------------------------------


def _components_in_order(d: int, S: list[int], side: Side) -> list[frozenset[int]]:
    return polymer.two_linked_components(d, S, side)  # sorted by smallest member


def approx_sample(H: PercolatedHypercube, seed: int, trial: int = 0) -> SampleOutcome:
    """One draw of the approximate sampler (d <= 16), deterministic in (H, seed, trial)."""
    if H.d > _SAMPLER_MAX_D:
        raise SizeError(f"approximate sampler supports d <= {_SAMPLER_MAX_D}")
    d = H.d
    q_even, q_odd = side_weights(H)
    u_side = rng.uniform_at(rng.derive_key(seed, _SIDE_STREAM), trial)
    side = Side.EVEN if u_side < q_even else Side.ODD
    t = _tables(H, side)
    n_side = t.verts.shape[0]

    key_vert = rng.derive_key(seed, _VERTEX_STREAM)
    base = trial * n_side
    chosen = [
        int(t.verts[r])
        for r in range(n_side)
        if rng.value_at(key_vert, base + r) < int(t.thr_vert[r])
    ]

    comps = _components_in_order(d, chosen, side)
    for comp in comps:
        if len(comp) >= 3:
            return SampleOutcome(False, side, q_even, q_odd, failure_step=3, failure_reason="triple-2-linked")
        if len(comp) == 2 and not t.dimer_ok:
            return SampleOutcome(False, side, q_even, q_odd, failure_step=3, failure_reason="oversized-closure")
        if len(comp) == 1 and not t.singleton_ok:
            return SampleOutcome(False, side, q_even, q_odd, failure_step=3, failure_reason="oversized-closure")
    s1 = sorted(v for comp in comps if len(comp) == 1 for v in comp)

    key_dim = rng.derive_key(seed, _DIMER_STREAM)
    base_d = trial * t.du.shape[0]
    s2 = [
        (int(t.du[k]), int(t.dv[k]))
        for k in range(t.du.shape[0])
        if rng.value_at(key_dim, base_d + k) < int(t.thr_dim[k])
    ]

    if s2 and not t.dimer_ok:
        return SampleOutcome(False, side, q_even, q_odd, failure_step=5, failure_reason="oversized-closure")

    def near(x: int, y: int) -> bool:
        return x == y or bin(x ^ y).count("1") == 2

    for a in range(len(s2)):
        for b in range(a + 1, len(s2)):
            if any(near(x, y) for x in s2[a] for y in s2[b]):
                return SampleOutcome(False, side, q_even, q_odd, failure_step=5, failure_reason="dimer-collision")
    for pair in s2:
        for v in s1:
            if any(near(v, x) for x in pair):
                return SampleOutcome(
                    False, side, q_even, q_odd, failure_step=5, failure_reason="dimer-singleton-adjacency"
                )

    defect = frozenset(s1) | frozenset(x for pair in s2 for x in pair)
    blocked = set()
    for v in defect:
        blocked.update(H.retained_neighbors(v))
    key_fill = rng.derive_key(seed, _FILL_STREAM)
    opp = side_vertices(d, side.opposite).tolist()
    base_f = trial * len(opp)
    half = 1 << 63
    out = set(defect)
    for rnk, w in enumerate(opp):
        if w not in blocked and rng.value_at(key_fill, base_f + rnk) < half:
            out.add(w)
    return SampleOutcome(
        True,
        side,
        q_even,
        q_odd,
        independent_set=frozenset(out),
        defect_set=defect,
    )


# ---------------------------------------------------------------------------
# batches
# ---------------------------------------------------------------------------


def _run_side_batch(H, side: Side, seed: int, trial_ids: np.ndarray, do_fill: bool):
    t = _tables(H, side)
    defects = np.zeros(trial_ids.shape[0], dtype=np.uint64)
    codes, n_bad = _sampler_batch(
        H.d,
        t.verts,
        t.thr_vert,
        t.du,
        t.dv,
        t.thr_dim,
        np.uint64(rng.derive_key(seed, _VERTEX_STREAM)),
        np.uint64(rng.derive_key(seed, _DIMER_STREAM)),
        np.uint64(rng.derive_key(seed, _FILL_STREAM)),
        trial_ids.astype(np.int64),
        t.singleton_ok,
        t.dimer_ok,
        H.bit_table,
        do_fill,
        defects,
    )
    return codes, defects, int(n_bad)


@dataclass(frozen=True)
class FailureReport:
    trials: int
    failures: int
    rate: float
    std_error: float
    reason_counts: dict[str, int]
    independence_violations: int
    q_even: float
    q_odd: float

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "failures": self.failures,
            "rate": self.rate,
            "std_error": self.std_error,
            "reason_counts": self.reason_counts,
            "independence_violations": self.independence_violations,
            "q_even": self.q_even,
            "q_odd": self.q_odd,
        }


def failure_rate(H: PercolatedHypercube, trials: int, seed: int, verify: bool = True) -> FailureReport:
    """Monte Carlo failure rate with Wald standard error; deterministic in (H, trials, seed)."""
    if trials < 1:
        raise ContractError("trials must be >= 1")
    if H.d > _SAMPLER_MAX_D:
        raise SizeError(f"approximate sampler supports d <= {_SAMPLER_MAX_D}")
    q_even, q_odd = side_weights(H)
    u = rng.uniforms(rng.derive_key(seed, _SIDE_STREAM), 0, trials)
    even_ids = np.nonzero(u < q_even)[0].astype(np.int64)
    odd_ids = np.nonzero(u >= q_even)[0].astype(np.int64)
    codes = np.zeros(trials, dtype=np.int8)
    n_bad = 0
    for side, ids in ((Side.EVEN, even_ids), (Side.ODD, odd_ids)):
        if ids.size:
            c, _, bad = _run_side_batch(H, side, seed, ids, do_fill=verify)
            codes[ids] = c
            n_bad += bad
    failures = int(np.count_nonzero(codes))
    rate = failures / trials
    se = math.sqrt(rate * (1.0 - rate) / trials)
    reason_counts: dict[str, int] = {}
    for code, n in zip(*np.unique(codes, return_counts=True)):
        if code == 0:
            continue
        step, reason = _CODE_INFO[int(code)]
        reason_counts[f"step{step}:{reason}"] = int(n)
    return FailureReport(
        trials=trials,
        failures=failures,
        rate=rate,
        std_error=se,
        reason_counts=reason_counts,
        independence_violations=n_bad,
        q_even=q_even,
        q_odd=q_odd,
    )


# ---------------------------------------------------------------------------
# defect-law comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TvReport:
    tv: float
    noise_floor: float
    trials: int
    successes: int
    support_size: int
    side: str

    def as_dict(self) -> dict:
        return {
            "tv": self.tv,
            "noise_floor": self.noise_floor,
            "trials": self.trials,
            "successes": self.successes,
            "support_size": self.support_size,
            "side": self.side,
        }


def _ranks_mask(S: frozenset[int], verts: list[int]) -> int:
    rank = {v: r for r, v in enumerate(verts)}
    m = 0
    for v in S:
        m |= 1 << rank[v]
    return m


def empirical_tv_defect(H: PercolatedHypercube, side: Side, trials: int, seed: int) -> TvReport:
    """TV between the sampled defect law (given the side, given success) and
    the exact conditional defect law of a uniform independent set (d <= 5).

    The side-choice stream is independent of the rest, so conditioning on the
    side equals forcing it; all `trials` draws run on the requested side.
    """
    if H.d > _TV_MAX_D:
        raise SizeError(f"exact reference laws need d <= {_TV_MAX_D}")
    if trials < 1:
        raise ContractError("trials must be >= 1")
    trial_ids = np.arange(trials, dtype=np.int64)
    codes, defects, _ = _run_side_batch(H, side, seed, trial_ids, do_fill=False)
    ok = codes == 0
    successes = int(np.count_nonzero(ok))
    if successes == 0:
        raise ContractError("no successful draws; cannot form an empirical law")
    masks = defects[ok].astype(np.int64)
    counts = np.bincount(masks, minlength=1 << (1 << (H.d - 1)))

    exact = oracle.defect_distribution(H, side, conditional=True)
    verts = side_vertices(H.d, side).tolist()
    exact_by_mask = {_ranks_mask(S, verts): pr for S, pr in exact.items()}
    tv = Fraction(0)
    emp_total_hit = 0
    for mask, pr in exact_by_mask.items():
        c = int(counts[mask]) if mask < counts.shape[0] else 0
        emp_total_hit += c
        tv += abs(Fraction(c, successes) - pr)
    # empirical mass outside the exact support (impossible unless a bug)
    tv += Fraction(successes - emp_total_hit, successes)
    return TvReport(
        tv=float(tv) / 2.0,
        noise_floor=math.sqrt(len(exact) / trials),
        trials=trials,
        successes=successes,
        support_size=len(exact),
        side=side.value,
    )


def empirical_tv_exact_self(H: PercolatedHypercube, side: Side, trials: int, seed: int) -> TvReport:
    """Sanity path: the exactly-uniform sampler scored against its own law."""
    law = oracle.defect_distribution(H, side, conditional=False)
    counts: dict[frozenset[int], int] = {}
    for t in range(trials):
        I = oracle.sample_uniform_exact(H, rng.derive_key(seed, "self", t))
        S = frozenset(v for v in I if (bin(v).count("1") & 1) == side.parity)
        counts[S] = counts.get(S, 0) + 1
    tv = Fraction(0)
    for S, pr in law.items():
        tv += abs(Fraction(counts.get(S, 0), trials) - pr)
    return TvReport(
        tv=float(tv) / 2.0,
        noise_floor=math.sqrt(len(law) / trials),
        trials=trials,
        successes=trials,
        support_size=len(law),
        side=side.value,
    )


# ---------------------------------------------------------------------------
# exact sampler law (d <= 4): reference for the TV experiments
# ---------------------------------------------------------------------------


def exact_sampler_defect_law(
    H: PercolatedHypercube, side: Side
) -> tuple[dict[frozenset[int], float], float]:
    """(exact law of the defect set given success on `side`, success probability).

    Enumerates step 2 over all side subsets and step 4 over all pairwise
    compatible dimer families; feasible for d <= 4.
    """
    if H.d > 4:
        raise SizeError("exact sampler law enumerates all dimer families; d <= 4")
    d = H.d
    t = _tables(H, side)
    verts = t.verts.tolist()
    n = len(verts)
    deg = H.degrees()
    q_v = [2.0 ** -int(deg[v]) / (1.0 + 2.0 ** -int(deg[v])) for v in verts]

    # step-2/3: P[singleton part = S1] over subsets that pass step 3
    p_s1: dict[frozenset[int], float] = {}
    for mask in range(1 << n):
        S = [verts[r] for r in range(n) if (mask >> r) & 1]
        pr = 1.0
        for r in range(n):
            pr *= q_v[r] if (mask >> r) & 1 else 1.0 - q_v[r]
        comps = polymer.two_linked_components(d, S, side)
        ok = all(
            (len(c) <= 2)
            and (t.singleton_ok if len(c) == 1 else (t.dimer_ok if len(c) == 2 else False))
            for c in comps
        )
        if not ok:
            continue
        s1 = frozenset(v for c in comps if len(c) == 1 for v in c)
        p_s1[s1] = p_s1.get(s1, 0.0) + pr

    dimers = enumerate_dimers(d, side)
    n_dim = len(dimers)
    eb = H.bit_table
    q_d = []
    for dim in dimers:
        i, j = dim.differing_bits
        shared = int(eb[dim.u, i] & eb[dim.v, j]) + int(eb[dim.u, j] & eb[dim.v, i])
        w = 2.0 ** -(int(deg[dim.u] + deg[dim.v]) - shared)
        q_d.append(w / (1.0 + w))

    def near(x: int, y: int) -> bool:
        return x == y or bin(x ^ y).count("1") == 2

    pairs_compatible = [
        [
            not any(near(x, y) for x in (dimers[a].u, dimers[a].v) for y in (dimers[b].u, dimers[b].v))
            for b in range(n_dim)
        ]
        for a in range(n_dim)
    ]

    families: list[tuple[tuple[int, ...], float]] = []

    def rec(idx: int, chosen: tuple[int, ...], pr: float):
        if idx == n_dim:
            families.append((chosen, pr))
            return
        rec(idx + 1, chosen, pr * (1.0 - q_d[idx]))
        if t.dimer_ok and all(pairs_compatible[c][idx] for c in chosen):
            rec(idx + 1, chosen + (idx,), pr * q_d[idx])

    rec(0, (), 1.0)
    # note: families where an incompatible dimer pair would be drawn are
    # handled below via the total mass balance (their joint draw fails)

    law: dict[frozenset[int], float] = {}
    total = 0.0
    for s1, pr1 in p_s1.items():
        for chosen, pr2 in families:
            ok = True
            for k in chosen:
                dk = dimers[k]
                if any(near(v, x) for v in s1 for x in (dk.u, dk.v)):
                    ok = False
                    break
            if not ok:
                continue
            w = pr1 * pr2
            defect = s1 | frozenset(x for k in chosen for x in (dimers[k].u, dimers[k].v))
            law[defect] = law.get(defect, 0.0) + w
            total += w
    return {S: pr / total for S, pr in law.items()}, total

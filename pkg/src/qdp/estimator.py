"""The explicit log-count estimator and its deterministic constants.

Per side, the estimator is

    psi = sum_v ln(1 + 2^-N(v))
        + sum_dimers (2^-N({u,v}) - 2^-N(u)-N(v)),

and the count estimate is log2(i) ~ 2^(d-1) + log2(e^psi_even + e^psi_odd),
combined through a max shift so it stays finite at any d <= 20.  Vertex and
dimer terms are accumulated with exactly-rounded compensated summation
(math.fsum), so results are reproducible bit-for-bit.

ConstantSet collects the closed-form centering and scale constants.  The
dimer-sum means come in three clearly-labeled conventions.  The `*_nominal`
forms use the ordered-pair dimer count d(d-1)*2^(d-2) together with the
simplified per-dimer mean ((1+(1-p)^2)/(2-p))^2 * (1-p/2)^(2d), which treats
all 2d-2 joint neighbors of a dimer as exclusive.  The `*_half` forms halve
those to the unordered-pair count.  The `*_enum` forms are what enumeration
actually gives: the unordered count d(d-1)*2^(d-3) times

    E[2^-N({u,v})] = ((1 + (1-p)^2)/2)^2 * (1 - p/2)^(2d-4),

since a dimer has exactly 2 shared and 2d-4 exclusive potential neighbors
(at p=1 this is the required 2^-(2d-2); the simplified mean is low by
(2/(2-p))^2 there).  All statistical tests use the `_enum` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import entropy
from .errors import SizeError
from .lattice import PercolatedHypercube, Side, dimer_count, side_vertices

_PSI_MAX_D = 20


# ---------------------------------------------------------------------------
# per-configuration estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiSide:
    """One side's estimator pieces: psi = phi_log + delta - delta_tilde."""

    side: str
    phi_log: float
    delta: float
    delta_tilde: float

    @property
    def psi(self) -> float:
        return self.phi_log + (self.delta - self.delta_tilde)


@dataclass(frozen=True)
class PsiReport:
    d: int
    p: float
    seed: int
    even: PsiSide
    odd: PsiSide
    log2_count_estimate: float

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "p": self.p,
            "seed": self.seed,
            "phi_log_even": self.even.phi_log,
            "delta_even": self.even.delta,
            "delta_tilde_even": self.even.delta_tilde,
            "psi_even": self.even.psi,
            "phi_log_odd": self.odd.phi_log,
            "delta_odd": self.odd.delta,
            "delta_tilde_odd": self.odd.delta_tilde,
            "psi_odd": self.odd.psi,
            "log2_count_estimate": self.log2_count_estimate,
        }


def _dimer_term_arrays(H: PercolatedHypercube, side: Side):
    """Vectorized per-dimer (2^-(N(u)+N(v)), shared-kept count) arrays."""
    d = H.d
    verts = side_vertices(d, side).astype(np.int64)
    deg = H.degrees()
    eb = H.bit_table
    split = []
    shared = []
    for i in range(d):
        for j in range(i + 1, d):
            m = (1 << i) | (1 << j)
            u = verts
            v = verts ^ m
            sel = u < v
            uu, vv = u[sel], v[sel]
            split.append(np.exp2(-(deg[uu] + deg[vv]).astype(np.float64)))
            shared.append(
                (eb[uu, i] & eb[vv, j]).astype(np.int64) + (eb[uu, j] & eb[vv, i]).astype(np.int64)
            )
    if not split:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    return np.concatenate(split), np.concatenate(shared)


def psi(H: PercolatedHypercube, side: Side) -> PsiSide:
    """The side's estimator pieces, with exactly-rounded summation (d <= 20)."""
    if H.d > _PSI_MAX_D:
        raise SizeError(f"psi supports d <= {_PSI_MAX_D}")
    degs = H.degrees()[side_vertices(H.d, side)]
    phi_log = math.fsum(np.log1p(np.exp2(-degs.astype(np.float64))).tolist())
    ft, shared = _dimer_term_arrays(H, side)
    delta_tilde = math.fsum(ft.tolist())
    delta = math.fsum((ft * np.exp2(shared.astype(np.float64))).tolist())
    return PsiSide(side=side.value, phi_log=phi_log, delta=delta, delta_tilde=delta_tilde)


def combine_log2(psi_even: float, psi_odd: float, d: int) -> float:
    """log2 estimate 2^(d-1) + log2(e^psi_even + e^psi_odd), max-shifted."""
    m = max(psi_even, psi_odd)
    gap = abs(psi_even - psi_odd)
    ln2 = math.log(2.0)
    return (1 << (d - 1)) + m / ln2 + math.log1p(math.exp(-gap)) / ln2


def psi_report(H: PercolatedHypercube) -> PsiReport:
    ev = psi(H, Side.EVEN)
    od = psi(H, Side.ODD)
    return PsiReport(
        d=H.d,
        p=H.p,
        seed=H.seed,
        even=ev,
        odd=od,
        log2_count_estimate=combine_log2(ev.psi, od.psi, H.d),
    )


def estimate_log2_count(H: PercolatedHypercube) -> float:
    return psi_report(H).log2_count_estimate


# ---------------------------------------------------------------------------
# deterministic constants
# ---------------------------------------------------------------------------


def singleton_moment(d: int, p: float, k: int) -> float:
    """E[(2^-N(v))^k] = (1 - (2^k - 1)/2^k * p)^d for N(v) ~ Bin(d, p)."""
    if k < 0:
        raise ValueError("moment order k must be >= 0")
    if k == 0:
        return 1.0
    return (1.0 - (2.0**k - 1.0) / 2.0**k * p) ** d


def covariance_bound(d: int, p: float) -> float:
    """Upper bound on Cov(phi_log_even, phi_log_odd): one term per retained-edge pair."""
    return 2.0 ** (d - 1) * d * (1.0 - 0.75 * p) * (1.0 - 0.5 * p) ** (2 * d - 2)


def dimer_weight_mean(d: int, p: float) -> float:
    """E[2^-N({u,v})] for a dimer: 2 shared + (2d-4) exclusive potential neighbors."""
    if d < 2:
        return 0.0
    return ((1.0 + (1.0 - p) ** 2) / 2.0) ** 2 * (1.0 - 0.5 * p) ** (2 * d - 4)


def dimer_weight_mean_nominal(d: int, p: float) -> float:
    """Simplified per-dimer mean treating all 2d-2 joint neighbors as exclusive."""
    return ((1.0 + (1.0 - p) ** 2) / (2.0 - p)) ** 2 * (1.0 - 0.5 * p) ** (2 * d)


def dimer_weight_mean_tilde(d: int, p: float) -> float:
    """E[2^-N(u)-N(v)] = (1 - p/2)^(2d): the two vertices' edge sets are disjoint."""
    return (1.0 - 0.5 * p) ** (2 * d)


@dataclass(frozen=True)
class ConstantSet:
    """Closed-form centering/scale constants for dimension d and retention p."""

    d: int
    p: float
    mu1_k: tuple[float, float, float, float]  # k = 1..4
    mu1: float
    sigma_sq: float
    mu_prime: float
    e_phi_pow: tuple[float, float, float, float]  # E[phi_v^k], k = 1..4
    covariance_bound: float
    dimer_count: int
    e_dimer_weight: float
    e_dimer_weight_nominal: float
    e_dimer_weight_tilde: float
    mu2_nominal: float
    mu2_tilde_nominal: float
    mu2_half: float
    mu2_tilde_half: float
    mu2_enum: float
    mu2_tilde_enum: float
    mu_nominal: float
    mu_enum: float
    regime: dict[str, bool]

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)

    def as_dict(self) -> dict:
        out = {
            "d": self.d,
            "p": self.p,
            "mu1": self.mu1,
            "sigma_sq": self.sigma_sq,
            "sigma": self.sigma,
            "mu_prime": self.mu_prime,
            "covariance_bound": self.covariance_bound,
            "dimer_count": self.dimer_count,
            "e_dimer_weight": self.e_dimer_weight,
            "e_dimer_weight_nominal": self.e_dimer_weight_nominal,
            "e_dimer_weight_tilde": self.e_dimer_weight_tilde,
            "mu2_nominal": self.mu2_nominal,
            "mu2_tilde_nominal": self.mu2_tilde_nominal,
            "mu2_half": self.mu2_half,
            "mu2_tilde_half": self.mu2_tilde_half,
            "mu2_enum": self.mu2_enum,
            "mu2_tilde_enum": self.mu2_tilde_enum,
            "mu_nominal": self.mu_nominal,
            "mu_enum": self.mu_enum,
            "regime": self.regime,
        }
        for k in range(1, 5):
            out[f"mu1_{k}"] = self.mu1_k[k - 1]
            out[f"e_phi_pow_{k}"] = self.e_phi_pow[k - 1]
        return out


def regime_flags(p: float) -> dict[str, bool]:
    """Where p sits relative to the named threshold constants."""
    t = entropy.thresholds()
    return {
        "dimers_expected": p <= t["no_dimers"].value,
        "trimers_expected": p <= t["no_trimers"].value,
        "decoupling_proven": p > t["singleton_dimer_decoupling"].value,
        "worst_case_decoupling": p > t["worst_case_adjacency"].value,
        "mean_proxy_valid": p > t["mean_series_truncation"].value,
        "sigma_diverges": p < t["variance_constant"].value,
        "dimer_terms_dominate_sigma": p < t["dimer_mean_vs_sigma"].value,
    }


def constants(d: int, p: float) -> ConstantSet:
    mu1_k = tuple(0.5 * (2.0 - (2.0**k - 1.0) / 2.0 ** (k - 1) * p) ** d for k in range(1, 5))
    mu1 = mu1_k[0] - mu1_k[1] / 2.0 + mu1_k[2] / 3.0
    sigma_sq = 0.5 * (2.0 - 1.5 * p) ** d
    mu_prime = 0.5 * (2.0 - p) ** d - sigma_sq / 2.0
    nd = dimer_count(d)
    e_w = dimer_weight_mean(d, p)
    e_w_nominal = dimer_weight_mean_nominal(d, p)
    e_wt = dimer_weight_mean_tilde(d, p)
    mu2_nominal = d * (d - 1) / 4.0 * ((2.0 - p) ** 2 / 2.0) ** d * ((1.0 + (1.0 - p) ** 2) / (2.0 - p)) ** 2
    mu2_tilde_nominal = d * (d - 1) / 4.0 * ((2.0 - p) ** 2 / 2.0) ** d
    mu2_enum = nd * e_w
    mu2_tilde_enum = nd * e_wt
    return ConstantSet(
        d=d,
        p=p,
        mu1_k=mu1_k,
        mu1=mu1,
        sigma_sq=sigma_sq,
        mu_prime=mu_prime,
        e_phi_pow=tuple(singleton_moment(d, p, k) for k in range(1, 5)),
        covariance_bound=covariance_bound(d, p),
        dimer_count=nd,
        e_dimer_weight=e_w,
        e_dimer_weight_nominal=e_w_nominal,
        e_dimer_weight_tilde=e_wt,
        mu2_nominal=mu2_nominal,
        mu2_tilde_nominal=mu2_tilde_nominal,
        mu2_half=mu2_nominal / 2.0,
        mu2_tilde_half=mu2_tilde_nominal / 2.0,
        mu2_enum=mu2_enum,
        mu2_tilde_enum=mu2_tilde_enum,
        mu_nominal=mu1 + mu2_nominal - mu2_tilde_nominal,
        mu_enum=mu1 + mu2_enum - mu2_tilde_enum,
        regime=regime_flags(p),
    )


# ---------------------------------------------------------------------------
# exact reference moments (binomial sums; test oracles and experiment targets)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _binom_pmf(n: int, p: float) -> tuple[float, ...]:
    return tuple(math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1))


def exact_phi_log_mean(d: int, p: float) -> float:
    """E[sum_v ln(1 + 2^-N(v))], exactly (one side)."""
    pmf = _binom_pmf(d, p)
    return 2.0 ** (d - 1) * math.fsum(pk * math.log1p(2.0**-k) for k, pk in enumerate(pmf))


def exact_phi_log_var(d: int, p: float) -> float:
    """Var[sum_v ln(1 + 2^-N(v))], exactly (one side; vertex terms independent)."""
    pmf = _binom_pmf(d, p)
    e1 = math.fsum(pk * math.log1p(2.0**-k) for k, pk in enumerate(pmf))
    e2 = math.fsum(pk * math.log1p(2.0**-k) ** 2 for k, pk in enumerate(pmf))
    return 2.0 ** (d - 1) * (e2 - e1 * e1)


def exact_cross_covariance(d: int, p: float) -> float:
    """Exact Cov(phi_log_even, phi_log_odd).

    Only the 2^(d-1)*d adjacent pairs are dependent; conditioning on their
    shared edge leaves two independent Bin(d-1, p) remainders.
    """
    pmf = _binom_pmf(d - 1, p)
    cov_pair = 0.0
    for e, pe in ((0, 1.0 - p), (1, p)):
        inner = math.fsum(pa * math.log1p(2.0 ** -(a + e)) for a, pa in enumerate(pmf))
        cov_pair += pe * inner * inner
    full = _binom_pmf(d, p)
    mean = math.fsum(pk * math.log1p(2.0**-k) for k, pk in enumerate(full))
    cov_pair -= mean * mean
    return 2.0 ** (d - 1) * d * cov_pair

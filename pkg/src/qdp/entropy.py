"""Binary relative entropy, binomial tail bounds, and threshold constants.

H_p(q) = q*log2(q/p) + (1-q)*log2((1-q)/(1-p)) governs the binomial tails
P[Bin(n,p) >= nq] <= 2^(-n*H_p(q)).  The optimizations f_m(p) = inf_s (m*s +
H_p(s)) have closed-form minimizers s* = p/((1-p)*2^m + p), which makes
f_m(p) = m - log2(2^m*(1-p) + p); every threshold constant in the package is
the root of a bracketed monotone function built from these, found by
bisection (no derivative methods anywhere: robustness over speed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

from .errors import ContractError, SolverError


def relative_entropy(p: float, q: float) -> float:
    """Base-2 KL divergence between Bernoulli(q) and Bernoulli(p).

    Defined for p in (0,1) and q in [0,1], with 0*log(0) = 0 at the
    boundaries.  For degenerate p the value is only finite when q matches p
    exactly, in which case it is 0; anything else is a domain error.
    """
    if not 0.0 <= q <= 1.0:
        raise ContractError(f"q={q} outside [0, 1]")
    if p <= 0.0 or p >= 1.0:
        if q == p:
            return 0.0
        raise ContractError(f"H_p(q) diverges for p={p}, q={q}")
    out = 0.0
    if q > 0.0:
        out += q * math.log2(q / p)
    if q < 1.0:
        out += (1.0 - q) * math.log2((1.0 - q) / (1.0 - p))
    return out


def binomial_tail_bound(n: int, p: float, q: float) -> float:
    """2^(-n*H_p(q)), an upper bound for P[Bin(n,p) >= n*q] when q >= p."""
    if q < p:
        raise ContractError(f"tail bound needs q >= p, got q={q} < p={p}")
    return 2.0 ** (-n * relative_entropy(p, q))


def exact_binomial_tail(n: int, p: Fraction | float, q: float) -> Fraction:
    """P[Bin(n,p) >= n*q] as an exact rational."""
    pf = Fraction(p).limit_denominator(10**9) if not isinstance(p, Fraction) else p
    k0 = math.ceil(n * q - 1e-12)
    total = Fraction(0)
    for k in range(max(k0, 0), n + 1):
        total += math.comb(n, k) * pf**k * (1 - pf) ** (n - k)
    return total


def f_min(m: int, p: float) -> tuple[float, float]:
    """(inf_s m*s + H_p(s), argmin): minimizer s* = p/((1-p)*2^m + p) < p."""
    if m < 1:
        raise ContractError("f_min needs m >= 1")
    if not 0.0 < p < 1.0:
        raise ContractError("f_min needs p in (0, 1)")
    s_star = p / ((1.0 - p) * 2.0**m + p)
    return m * s_star + relative_entropy(p, s_star), s_star


def dimer_exponent_identity(p: float) -> tuple[float, float, float]:
    """(s*, max of 1-2s-2H_p(s), residual of (2-p)^2/2 = 2^max).

    The maximizer is the m=1 minimizer s* = p/(2-p), so the max equals
    1 - 2*f_min(1, p); the identity ties the dimer-mean base (2-p)^2/2 to it.
    """
    value, s_star = f_min(1, p)
    max_value = 1.0 - 2.0 * value
    residual = abs((2.0 - p) ** 2 / 2.0 - 2.0**max_value)
    return s_star, max_value, residual


# ---------------------------------------------------------------------------
# threshold constants
# ---------------------------------------------------------------------------


def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise SolverError("no sign change on bracket", lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def worst_case_margin(p: float) -> float:
    """sup of 1 - 2*H_p(t) - 2t over t with 1 - 2*H_p(t) < log2(2-p).

    This is the exponent margin of the worst-case adjacency sum: negative
    means the heaviest poly(d)*(2-p)^d dimer weights still vanish.  The
    admissible region excludes an interval around t=p where dimers would be
    too numerous; the unconstrained maximizer s* = p/(2-p) is used when
    admissible, else the sup sits at the left constraint boundary.
    """
    h0 = 0.5 * (1.0 - math.log2(2.0 - p))
    value, s_star = f_min(1, p)
    if h0 <= 0.0 or relative_entropy(p, s_star) > h0:
        return 1.0 - 2.0 * value
    if relative_entropy(p, 0.0) <= h0:
        t_lo = 0.0
    else:
        t_lo = bisect_root(lambda t: relative_entropy(p, t) - h0, 0.0, p)
    return 1.0 - 2.0 * t_lo - 2.0 * h0


@dataclass(frozen=True)
class ThresholdEntry:
    name: str
    value: float
    bracket: tuple[float, float]
    residual: float
    description: str
    companion: float | None = None

    def as_dict(self) -> dict:
        out = {
            "value": self.value,
            "bracket": list(self.bracket),
            "residual": self.residual,
            "description": self.description,
        }
        if self.companion is not None:
            out["companion_root"] = self.companion
        return out


@dataclass(frozen=True)
class ThresholdTable:
    entries: dict[str, ThresholdEntry]

    def __getitem__(self, name: str) -> ThresholdEntry:
        return self.entries[name]

    def names(self) -> list[str]:
        return list(self.entries)

    def as_dict(self) -> dict:
        return {name: e.as_dict() for name, e in self.entries.items()}


def _entry(name, f, lo, hi, description, companion=None) -> ThresholdEntry:
    root = bisect_root(f, lo, hi)
    return ThresholdEntry(
        name=name,
        value=root,
        bracket=(lo, hi),
        residual=abs(f(root)),
        description=description,
        companion=companion,
    )


@lru_cache(maxsize=1)
def thresholds() -> ThresholdTable:
    """All named threshold constants, each solved on its bracketed equation."""
    entries: dict[str, ThresholdEntry] = {}

    for k, (name, what, lo, hi) in enumerate(
        [
            ("no_dimers", "dimers", 0.5, 0.7),
            ("no_trimers", "trimers", 0.35, 0.48),
            ("no_tetramers", "size-4 polymers", 0.25, 0.35),
        ],
        start=1,
    ):
        entries[name] = _entry(
            name,
            lambda p, k=k: (k + 1) * math.log2(2.0 - p) - k,
            lo,
            hi,
            f"root of (2-p)^{k+1} = 2^{k}; above it {what} vanish from typical defect sides",
        )

    entries["worst_case_adjacency"] = _entry(
        "worst_case_adjacency",
        worst_case_margin,
        0.50,
        0.60,
        "root of the worst-case adjacency exponent margin; above it even the "
        "worst singleton set repels independently drawn dimers",
    )

    def decouple(p: float) -> float:
        return f_min(1, p)[0] + f_min(2, p)[0] - 1.0

    root_a = bisect_root(decouple, 0.40, 0.55)
    root_b = bisect_root(lambda p: f_min(1, p)[0] - 1.0 / 3.0, 0.35, 0.48)
    gamma_value = max(root_a, root_b)
    entries["singleton_dimer_decoupling"] = ThresholdEntry(
        name="singleton_dimer_decoupling",
        value=gamma_value,
        bracket=(0.40, 0.55),
        residual=abs(decouple(gamma_value) if gamma_value == root_a else f_min(1, gamma_value)[0] - 1.0 / 3.0),
        description="largest root of {f_1(p)+f_2(p)=1, f_1(p)=1/3}: the proven "
        "singleton/dimer independence threshold (zero proof slack)",
        companion=min(root_a, root_b),
    )

    entries["variance_constant"] = _entry(
        "variance_constant",
        lambda p: (2.0 - 1.5 * p) - 1.0,
        0.60,
        0.72,
        "root of 2 - 3p/2 = 1: the estimator variance is 1/2 at every d",
    )

    def mean_trunc(p: float) -> float:
        return (2.0 - 1.875 * p) ** 2 - (2.0 - 1.5 * p)

    entries["mean_series_truncation"] = _entry(
        "mean_series_truncation",
        mean_trunc,
        0.40,
        0.50,
        "smaller root of (2-15p/8)^2 = 2-3p/2; above it the three-term "
        "centering proxy is within o(sigma) of the true mean",
        companion=bisect_root(mean_trunc, 1.2, 1.3),
    )

    entries["dimer_mean_vs_sigma"] = _entry(
        "dimer_mean_vs_sigma",
        lambda p: ((2.0 - p) ** 2 / 2.0) ** 2 - (2.0 - 1.5 * p),
        0.45,
        0.55,
        "root of ((2-p)^2/2)^2 = 2-3p/2; below it the dimer-sum means "
        "outgrow sigma and must enter the centering",
    )

    def centering(p: float) -> float:
        return (2.0 - 1.75 * p) ** 2 - (2.0 - 1.5 * p)

    entries["centering_simplification"] = _entry(
        "centering_simplification",
        centering,
        0.45,
        0.55,
        "smaller root of (2-7p/4)^2 = 2-3p/2; above it the third centering "
        "term is o(sigma) and mu' may replace mu1",
        companion=bisect_root(centering, 1.25, 1.33),
    )

    entries["dimer_sum_concentration"] = _entry(
        "dimer_sum_concentration",
        lambda p: 2.0 * (1.0 - 0.75 * p) ** 2 - 1.0,
        0.35,
        0.43,
        "root of 2(1-3p/4)^2 = 1, i.e. (2/3)(2-sqrt(2)); above it the dimer "
        "sums concentrate (vanishing variance)",
    )

    return ThresholdTable(entries=entries)

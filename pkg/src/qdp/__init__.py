"""Independent sets in edge-percolated hypercubes: exact counts at desk
scale, an explicit log-count estimator with CLT constants, entropy-based
threshold solvers, and an approximate sampler with failure accounting."""

from .dyadic import DyadicWeight
from .errors import ContractError, ParseError, RegimeError, SizeError, SolverError
from .lattice import (
    Dimer,
    PercolatedHypercube,
    Side,
    build_percolation,
    deserialize,
    dimer_count,
    enumerate_dimers,
    neighborhood_size,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "Dimer",
    "DyadicWeight",
    "ParseError",
    "PercolatedHypercube",
    "RegimeError",
    "Side",
    "SizeError",
    "SolverError",
    "build_percolation",
    "deserialize",
    "dimer_count",
    "enumerate_dimers",
    "neighborhood_size",
    "serialize",
]

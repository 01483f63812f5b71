"""Hypercube geometry and reproducible edge percolation.

Vertices of the d-dimensional hypercube are integers in [0, 2^d) with bit i
holding coordinate i; an edge joins x and x^(1<<i).  The even/odd bipartition
is by parity of popcount.  Each edge has a canonical index derived from its
(unique) even endpoint u: ``index = even_rank(u)*d + i`` for the edge toward
u^(1<<i), where even_rank(u) is u's rank among even vertices in increasing
integer order.

Percolation keeps each edge independently with probability p.  Edge bits are
counter-based: bit e is a pure function of (seed, e), so partial queries,
parallel construction, and full builds all agree.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import rng
from .errors import ContractError, ParseError, SizeError

MAX_DIMENSION = 24
_EDGE_STREAM = "edges"

_MAGIC = b"QDPC"
_VERSION = 1
_HEADER = struct.Struct("<4sBBdQ2x")  # 24 bytes
assert _HEADER.size == 24


class Side(str, Enum):
    EVEN = "even"
    ODD = "odd"

    @property
    def parity(self) -> int:
        return 0 if self is Side.EVEN else 1

    @property
    def opposite(self) -> "Side":
        return Side.ODD if self is Side.EVEN else Side.EVEN


def n_edges(d: int) -> int:
    return d << (d - 1)


def parity(v: int) -> int:
    return bin(v).count("1") & 1


def side_of(v: int) -> Side:
    return Side.EVEN if parity(v) == 0 else Side.ODD


@lru_cache(maxsize=8)
def _tables(d: int):
    """(evens, odds, rank) for dimension d.

    rank[v] is v's rank within its own parity class; evens/odds list the
    vertices of each class in increasing order.
    """
    x = np.arange(1 << d, dtype=np.int64)
    pc = np.bitwise_count(x)
    even_mask = (pc & 1) == 0
    evens = np.nonzero(even_mask)[0].astype(np.int32)
    odds = np.nonzero(~even_mask)[0].astype(np.int32)
    rank = np.empty(1 << d, dtype=np.int32)
    rank[evens] = np.arange(evens.size, dtype=np.int32)
    rank[odds] = np.arange(odds.size, dtype=np.int32)
    return evens, odds, rank


def side_vertices(d: int, side: Side) -> np.ndarray:
    evens, odds, _ = _tables(d)
    return evens if side is Side.EVEN else odds


def even_rank(d: int, u: int) -> int:
    """Rank of even vertex u among even vertices, in closed form.

    Counts even-parity integers below u block by block: each set bit j >= 1
    of u contributes half of its 2^j block; a set bit 0 contributes the
    single integer u-1, which has even parity iff u is odd (never here).
    """
    if parity(u) != 0:
        raise ContractError(f"vertex {u} is odd; edge indices anchor at even endpoints")
    rank = 0
    m = u
    while m:
        j = m.bit_length() - 1
        if j >= 1:
            rank += 1 << (j - 1)
        else:
            rank += 1 if parity(u & ~1) == 0 else 0
        m ^= 1 << j
    return rank


def edge_index(d: int, x: int, direction: int) -> int:
    """Canonical index of the edge between x and x^(1<<direction)."""
    if not 0 <= direction < d:
        raise ContractError(f"direction {direction} out of range for d={d}")
    u = x if parity(x) == 0 else x ^ (1 << direction)
    return even_rank(d, u) * d + direction


class Dimer(NamedTuple):
    """Same-side vertex pair at Hamming distance 2 (u < v).

    The two vertices share exactly the two pre-percolation neighbors
    u^(1<<i) and u^(1<<j), where {i, j} are the differing bits.
    """

    u: int
    v: int
    side: Side

    @property
    def differing_bits(self) -> tuple[int, int]:
        m = self.u ^ self.v
        i = (m & -m).bit_length() - 1
        j = m.bit_length() - 1
        return i, j

    @property
    def shared_neighbors(self) -> tuple[int, int]:
        i, j = self.differing_bits
        return self.u ^ (1 << i), self.u ^ (1 << j)


def dimer_count(d: int) -> int:
    """Number of unordered same-side distance-2 pairs per side: d(d-1)*2^(d-3)."""
    if d < 2:
        return 0
    return (d * (d - 1) << (d - 1)) >> 2


def enumerate_dimers(d: int, side: Side) -> list[Dimer]:
    """All dimers of a side, each exactly once, sorted by (u, v)."""
    if d < 2:
        return []
    out = []
    for u in side_vertices(d, side).tolist():
        for i in range(d):
            for j in range(i + 1, d):
                v = u ^ (1 << i) ^ (1 << j)
                if u < v:
                    out.append(Dimer(u, v, side))
    out.sort(key=lambda t: (t.u, t.v))
    return out


@dataclass(frozen=True)
class PercolatedHypercube:
    """A quenched percolation configuration on Q_d.

    `packed` stores one bit per edge in canonical edge-index order,
    little-endian within each byte, zero-padded to a byte boundary.
    Instances are immutable; derived arrays are cached on first use.
    """

    d: int
    p: float
    seed: int
    packed: bytes

    def __post_init__(self):
        expect = (n_edges(self.d) + 7) // 8
        if len(self.packed) != expect:
            raise ContractError(
                f"bitmap must hold {n_edges(self.d)} bits ({expect} bytes), got {len(self.packed)}"
            )

    # -- cached derived arrays ------------------------------------------------

    @property
    def edge_bits(self) -> np.ndarray:
        """uint8[n_edges] of 0/1 edge indicators in canonical index order."""
        cached = self.__dict__.get("_edge_bits")
        if cached is None:
            raw = np.frombuffer(self.packed, dtype=np.uint8)
            cached = np.unpackbits(raw, bitorder="little")[: n_edges(self.d)]
            cached.flags.writeable = False
            object.__setattr__(self, "_edge_bits", cached)
        return cached

    @property
    def bit_table(self) -> np.ndarray:
        """uint8[2^d, d]; entry (x, l) is the indicator of edge {x, x^(1<<l)}."""
        cached = self.__dict__.get("_bit_table")
        if cached is None:
            d = self.d
            evens, odds, rank = _tables(d)
            eb = np.empty((1 << d, d), dtype=np.uint8)
            eb[evens] = self.edge_bits.reshape(-1, d)
            for l in range(d):
                eb[odds, l] = eb[odds ^ (1 << l), l]
            eb.flags.writeable = False
            cached = eb
            object.__setattr__(self, "_bit_table", cached)
        return cached

    def degrees(self) -> np.ndarray:
        """int64[2^d] of retained degrees."""
        cached = self.__dict__.get("_degrees")
        if cached is None:
            cached = self.bit_table.sum(axis=1, dtype=np.int64)
            cached.flags.writeable = False
            object.__setattr__(self, "_degrees", cached)
        return cached

    # -- point queries ---------------------------------------------------------

    def _check_vertex(self, v: int):
        if not 0 <= v < (1 << self.d):
            raise ContractError(f"vertex {v} out of range for d={self.d}")

    def edge_retained(self, x: int, y: int) -> bool:
        self._check_vertex(x)
        self._check_vertex(y)
        m = x ^ y
        if bin(m).count("1") != 1:
            raise ContractError(f"{x} and {y} are not hypercube neighbors")
        direction = m.bit_length() - 1
        e = edge_index(self.d, x, direction)
        return bool(self.packed[e >> 3] >> (e & 7) & 1)

    def degree(self, v: int) -> int:
        """Retained degree of one vertex; never materializes the full table."""
        self._check_vertex(v)
        cached = self.__dict__.get("_degrees")
        if cached is not None:
            return int(cached[v])
        total = 0
        for l in range(self.d):
            e = edge_index(self.d, v, l)
            total += self.packed[e >> 3] >> (e & 7) & 1
        return total

    def retained_neighbors(self, v: int) -> list[int]:
        self._check_vertex(v)
        row = self.bit_table[v]
        return [v ^ (1 << l) for l in range(self.d) if row[l]]

    def retained_neighbor_mask(self, v: int) -> int:
        """Neighbors of v in the percolated graph, as a 2^d-bit integer mask."""
        mask = 0
        for w in self.retained_neighbors(v):
            mask |= 1 << w
        return mask


def build_percolation(d: int, p: float, seed: int) -> PercolatedHypercube:
    """Draw the quenched configuration for (d, p, seed)."""
    if not 1 <= d <= MAX_DIMENSION:
        raise SizeError(f"d must be in [1, {MAX_DIMENSION}], got {d}")
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"p must be in [0, 1], got {p}")
    key = rng.derive_key(seed, _EDGE_STREAM)
    total = n_edges(d)
    chunk = 1 << 22  # keep the transient uint64 word buffer small at d=24
    parts = []
    for start in range(0, total, chunk):
        bits = rng.bernoulli_bits(key, start, min(chunk, total - start), p)
        parts.append(np.packbits(bits, bitorder="little"))
    packed = np.concatenate(parts).tobytes() if parts else b""
    return PercolatedHypercube(d=d, p=float(p), seed=seed & rng.MASK64, packed=packed)


def edge_stream_key(seed: int) -> int:
    """Key of the edge-bit stream for a seed (bit e = bernoulli at index e)."""
    return rng.derive_key(seed & rng.MASK64, _EDGE_STREAM)


def neighborhood_size(H: PercolatedHypercube, S, side: Side) -> int:
    """|union of retained neighborhoods of S|, S a set on the stated side."""
    seen = 0
    for v in S:
        H._check_vertex(v)
        if parity(v) != side.parity:
            raise ContractError(f"vertex {v} is not on side {side.value}")
        seen |= H.retained_neighbor_mask(v)
    return bin(seen).count("1")


def serialize(H: PercolatedHypercube) -> bytes:
    """Binary config: QDPC | version | d | p (f64 LE) | seed (u64 LE) | pad | bitmap."""
    return _HEADER.pack(_MAGIC, _VERSION, H.d, H.p, H.seed) + H.packed


def deserialize(data: bytes) -> PercolatedHypercube:
    if len(data) < _HEADER.size:
        raise ParseError(f"header needs {_HEADER.size} bytes, got {len(data)}", len(data))
    magic, version, d, p, seed = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}", 0)
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}", 4)
    if not 1 <= d <= MAX_DIMENSION:
        raise ParseError(f"d={d} out of range [1, {MAX_DIMENSION}]", 5)
    if not (p == p and 0.0 <= p <= 1.0):
        raise ParseError(f"p={p} out of range [0, 1]", 6)
    nbytes = (n_edges(d) + 7) // 8
    body = data[_HEADER.size :]
    if len(body) != nbytes:
        raise ParseError(
            f"bitmap truncated or oversized: need {nbytes} bytes, got {len(body)}",
            _HEADER.size + min(len(body), nbytes),
        )
    pad_bits = nbytes * 8 - n_edges(d)
    if pad_bits and body[-1] >> (8 - pad_bits):
        raise ParseError("nonzero padding bits in final bitmap byte", len(data) - 1)
    return PercolatedHypercube(d=d, p=p, seed=seed, packed=bytes(body))

"""Counter-based deterministic randomness.

Every random quantity in the package is a pure function of a 64-bit key and a
counter index: ``value(key, i) = mix64(key + (i+1)*GOLDEN mod 2^64)`` with the
splitmix64 finalizer.  Keys are derived from a user seed and a chain of stream
tags, so distinct logical streams (edge bits, per-step sampler draws, per-trial
substreams) never share counters.  Because draws are addressed by index rather
than consumed sequentially, any subset of a stream can be evaluated in any
order, in parallel, or vectorized, and always yields the same bits.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB

_U64 = np.uint64


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int (mod 2^64)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, int):
        return tag & MASK64
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_key(seed: int, *tags: int | str) -> int:
    """Derive a stream key from a seed and a chain of tags."""
    key = mix64(seed & MASK64)
    for tag in tags:
        key = mix64(key ^ _tag_to_int(tag))
    return key


def value_at(key: int, index: int) -> int:
    """The `index`-th raw 64-bit word of stream `key`."""
    return mix64((key + ((index + 1) * GOLDEN)) & MASK64)


def uniform_at(key: int, index: int) -> float:
    """The `index`-th uniform in [0,1) of stream `key` (53-bit resolution)."""
    return (value_at(key, index) >> 11) * 2.0**-53


def bernoulli_threshold(p: float) -> int:
    """Integer threshold t so that `value < t` is a Bernoulli(p) event.

    p <= 0 maps to 0 (never), p >= 1 to 2^64 (always); the raw words are
    compared as exact integers so the same p gives the same bits everywhere.
    """
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return 1 << 64
    return min(int(p * 2.0**64), MASK64)


def bernoulli_at(key: int, index: int, threshold: int) -> bool:
    return value_at(key, index) < threshold


def values(key: int, start: int, count: int) -> np.ndarray:
    """Vectorized raw words for indices [start, start+count)."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = (_U64(key) + idx * _U64(GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> _U64(30))) * _U64(_C1)
    z = (z ^ (z >> _U64(27))) * _U64(_C2)
    return z ^ (z >> _U64(31))


def uniforms(key: int, start: int, count: int) -> np.ndarray:
    return (values(key, start, count) >> _U64(11)).astype(np.float64) * 2.0**-53


def bernoulli_bits(key: int, start: int, count: int, p: float) -> np.ndarray:
    """uint8 array of Bernoulli(p) bits for stream indices [start, start+count)."""
    t = bernoulli_threshold(p)
    if t == 0:
        return np.zeros(count, dtype=np.uint8)
    if t == 1 << 64:
        return np.ones(count, dtype=np.uint8)
    return (values(key, start, count) < _U64(t)).astype(np.uint8)


def randbelow(key: int, n: int, counter_start: int = 0) -> int:
    """Exact uniform integer in [0, n) by rejection on 64-bit chunks.

    `n` may be an arbitrary-precision integer; draws are taken from fixed
    counter positions so the result is a pure function of (key, n).
    """
    if n <= 0:
        raise ValueError("randbelow needs n >= 1")
    nbits = n.bit_length()
    nwords = (nbits + 63) // 64
    ctr = counter_start
    while True:
        r = 0
        for w in range(nwords):
            r = (r << 64) | value_at(key, ctr + w)
        ctr += nwords
        r >>= nwords * 64 - nbits
        if r < n:
            return r


def trial_key(seed: int, step_tag: str, trial: int) -> int:
    """Per-(step, trial) substream key used by samplers and experiments."""
    return derive_key(seed, step_tag, trial)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    z = x.astype(np.uint64)
    z = (z ^ (z >> _U64(30))) * _U64(_C1)
    z = (z ^ (z >> _U64(27))) * _U64(_C2)
    return z ^ (z >> _U64(31))


def derived_keys(seed: int, tag: int | str, count: int) -> np.ndarray:
    """uint64 keys derive_key(seed, tag, t) for t = 0..count-1, vectorized."""
    base = _U64(derive_key(seed, tag))
    idx = np.arange(count, dtype=np.uint64)
    return mix64_array(base ^ idx)

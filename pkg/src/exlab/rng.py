"""Deterministic randomness.

Two kinds of streams, both pure functions of their keys so that results never
depend on evaluation order, worker count or thread scheduling:

* per-path Gaussian increments come from numpy seed-sequence streams keyed by
  (master seed, path index);
* per-excursion sign draws come from a stateless splitmix64-style hash keyed
  by (seed, epoch, rank), vectorized over whole index arrays.
"""

from __future__ import annotations

import numpy as np

SeedLike = int | tuple[int, ...]

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)


def _to_entropy(seed: SeedLike) -> list[int]:
    if isinstance(seed, (tuple, list)):
        return [int(s) & _MASK64 for s in seed]
    return [int(seed) & _MASK64]


def path_stream(seed: SeedLike) -> np.random.Generator:
    """Generator for one path; identical seed gives bitwise-identical draws."""
    return np.random.default_rng(_to_entropy(seed))


def substream(master_seed: int, index: int) -> tuple[int, int]:
    """Seed token of path `index` within a run keyed by `master_seed`."""
    return (int(master_seed), int(index))


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2^64 by design
    x = (x ^ (x >> np.uint64(30))) * _MUL1
    x = (x ^ (x >> np.uint64(27))) * _MUL2
    return x ^ (x >> np.uint64(31))


def _absorb(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    return _mix((h + _GOLDEN) ^ v)


def keyed_uniform(seed: int, epoch, rank) -> np.ndarray:
    """Uniform(0,1) draw keyed by (seed, epoch, rank), elementwise.

    `epoch` and `rank` may be scalars or equal-length integer arrays; the
    result depends only on the key triple, never on call order.
    """
    e = np.asarray(epoch, dtype=np.uint64)
    r = np.asarray(rank, dtype=np.uint64)
    s = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        h = _absorb(_absorb(_absorb(np.uint64(0), s), e), r)
        u = (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return u


def keyed_sign(seed: int, epoch, rank, p: float) -> np.ndarray:
    """±1 draw, +1 with probability p, keyed by (seed, epoch, rank)."""
    u = keyed_uniform(seed, epoch, rank)
    return np.where(u < p, 1, -1).astype(np.int8)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Integer seed derived from a master seed and a purpose/path index chain."""
    with np.errstate(over="ignore"):
        h = _absorb(np.uint64(0), np.uint64(int(master_seed) & _MASK64))
        for ix in indices:
            h = _absorb(h, np.uint64(int(ix) & _MASK64))
    return int(h)

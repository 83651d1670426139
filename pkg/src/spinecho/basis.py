"""Bitwise enumeration of spin-1/2 basis states and magnetization sectors.

Basis states are N-bit integers: bit ``i`` set means spin ``i`` points up.
Bit 0 is the injected/measured spin (site 1 in the usual 1-based labelling),
so the subset ``A`` of states with the first spin up is simply ``bits & 1``.
All Hamiltonians in this package conserve the total magnetization, so states
are organized into sectors of fixed popcount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapacityError

MAX_SITES = 24  # 2^24 complex amplitudes is the desk-scale memory ceiling


def check_sites(n: int) -> None:
    if not 2 <= n <= MAX_SITES:
        raise CapacityError(f"site count n={n} outside supported range [2, {MAX_SITES}]")


def popcount(bits) -> np.ndarray:
    """Number of up spins, vectorized over integer arrays."""
    return np.bitwise_count(np.asarray(bits, dtype=np.uint64)).astype(np.int64)


def all_states(n: int) -> np.ndarray:
    check_sites(n)
    return np.arange(1 << n, dtype=np.uint64)


@dataclass(frozen=True)
class FullSpace:
    """The full 2^n product space, states ordered by bit-pattern value."""

    n: int

    def __post_init__(self):
        check_sites(self.n)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def states(self) -> np.ndarray:
        return all_states(self.n)

    def index_of(self, bits: np.ndarray) -> np.ndarray:
        return np.asarray(bits, dtype=np.int64)

    def key(self):
        return ("full", self.n)


@dataclass
class SectorIndex:
    """All basis states with a fixed number of up spins, ascending bit value."""

    n: int
    n_up: int
    states: np.ndarray
    _rank: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def rank(self, bits: int) -> int:
        """Position of one basis state in this sector (constant time)."""
        if not self._rank:
            self._rank.update({int(s): k for k, s in enumerate(self.states)})
        return self._rank[int(bits)]

    def index_of(self, bits: np.ndarray) -> np.ndarray:
        # states are sorted, so positions come from binary search
        return np.searchsorted(self.states, np.asarray(bits, dtype=np.uint64))

    def key(self):
        return ("sector", self.n, self.n_up)


@lru_cache(maxsize=None)
def _sector_states(n: int, n_up: int) -> np.ndarray:
    states = all_states(n)
    return states[popcount(states) == n_up]


def enumerate_sector(n: int, n_up: int) -> SectorIndex:
    """All C(n, n_up) states of one magnetization sector, in canonical order."""
    check_sites(n)
    if not 0 <= n_up <= n:
        raise ValueError(f"n_up={n_up} outside [0, {n}]")
    states = _sector_states(n, n_up)
    assert len(states) == math.comb(n, n_up)
    return SectorIndex(n=n, n_up=n_up, states=states)


def sz_expectation(site: int, bits: int, n: int) -> float:
    """<S_site^z> of a basis state: +1/2 if the bit is set, -1/2 otherwise."""
    if not 0 <= site < n:
        raise IndexError(f"site {site} outside chain of {n} spins")
    return 0.5 if (int(bits) >> site) & 1 else -0.5


def first_up_mask(states: np.ndarray) -> np.ndarray:
    """Boolean membership in the subset A (first spin pointing up)."""
    return (np.asarray(states, dtype=np.uint64) & np.uint64(1)).astype(bool)


def s1z_diagonal(states: np.ndarray) -> np.ndarray:
    """Diagonal of S_1^z over the given states."""
    return np.where(first_up_mask(states), 0.5, -0.5)

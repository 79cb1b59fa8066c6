"""Truncated hyperlattice state space and its canonical tour order.

States are weak compositions ``(n_1, ..., n_I)`` with total ``k <= K``.
The tour lists levels in ascending ``k``; within a level, states are in
ascending lexicographic order with ``n_1`` most significant.  That order
admits closed-form ranking through the combinatorial number system, so no
lookup tables are needed to map a state to its index.
"""
from __future__ import annotations

import math
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .errors import CountOverflow, IndexOutOfRange, LevelExceedsK

UINT64_MAX = 2**64 - 1
# Above this many states neighbour lookups rank on the fly instead of
# materialising a U_K x I table.
NEIGHBOR_TABLE_LIMIT = 10**6


def checked_binom(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    value = math.comb(n, k)
    if value > UINT64_MAX:
        raise CountOverflow(f"C({n}, {k}) exceeds the 64-bit unsigned range")
    return value


def level_size(servers: int, k: int) -> int:
    """Number of states with exactly ``k`` calls: C(k+I-1, I-1)."""
    if servers < 1 or k < 0:
        raise ValueError("need servers >= 1 and k >= 0")
    return checked_binom(k + servers - 1, servers - 1)


def cumulative_size(servers: int, K: int) -> int:
    """U_K = C(K+I, I), the number of states with at most ``K`` calls."""
    if servers < 1 or K < 0:
        raise ValueError("need servers >= 1 and K >= 0")
    return checked_binom(K + servers, servers)


class StateIndexer:
    """Bijection between truncated states and ``0 .. U_K - 1``."""

    def __init__(self, servers: int, K: int):
        self.servers = int(servers)
        self.K = int(K)
        self.size = cumulative_size(self.servers, self.K)
        if self.size >= 2**63:
            raise CountOverflow("state count does not fit signed 64-bit indices")
        n, m = self.K + self.servers + 1, self.servers + 1
        table = np.zeros((n, m), dtype=np.int64)
        for a in range(n):
            for b in range(min(a, m - 1) + 1):
                table[a, b] = math.comb(a, b)
        self._binom = table

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"StateIndexer(servers={self.servers}, K={self.K}, size={self.size})"

    # -- level bookkeeping -------------------------------------------------

    def level_offset(self, k: int) -> int:
        """Index of the first state on level ``k``."""
        return 0 if k == 0 else math.comb(k - 1 + self.servers, self.servers)

    @cached_property
    def states(self) -> np.ndarray:
        out = kernels.enumerate_states(self.servers, self.K)
        out.flags.writeable = False
        return out

    @cached_property
    def levels(self) -> np.ndarray:
        out = self.states.sum(axis=1)
        out.flags.writeable = False
        return out

    # -- rank / unrank -----------------------------------------------------

    def unrank(self, u: int) -> tuple[int, ...]:
        if not 0 <= u < self.size:
            raise IndexOutOfRange(f"index {u} outside [0, {self.size})")
        I = self.servers
        k = 0
        while k < self.K and self.level_offset(k + 1) <= u:
            k += 1
        r = u - self.level_offset(k)
        state = []
        remaining = k
        for j in range(I - 1):
            parts_after = I - j - 1
            v = 0
            while True:
                block = math.comb(remaining - v + parts_after - 1, parts_after - 1)
                if r < block:
                    break
                r -= block
                v += 1
            state.append(v)
            remaining -= v
        state.append(remaining)
        return tuple(state)

    def rank(self, state: Sequence[int]) -> int:
        s = [int(x) for x in state]
        if len(s) != self.servers or min(s) < 0:
            raise ValueError(f"state must hold {self.servers} nonnegative entries")
        k = sum(s)
        if k > self.K:
            raise LevelExceedsK(f"level {k} exceeds truncation K={self.K}")
        u = self.level_offset(k)
        remaining = k
        for j in range(self.servers - 1):
            m = self.servers - j - 1
            # compositions of `remaining` whose j-th part is below s[j]
            u += math.comb(remaining + m, m) - math.comb(remaining - s[j] + m, m)
            remaining -= s[j]
        return u

    def rank_many(self, states: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`rank` for an ``(N, I)`` integer array."""
        S = np.asarray(states, dtype=np.int64)
        I = self.servers
        k = S.sum(axis=1)
        if S.size and (S.min() < 0 or k.max() > self.K):
            raise LevelExceedsK("state outside the truncated lattice")
        B = self._binom
        u = np.where(k > 0, B[np.maximum(k - 1 + I, 0), I], 0)
        remaining = k.copy()
        for j in range(I - 1):
            m = I - j - 1
            u += B[remaining + m, m] - B[remaining - S[:, j] + m, m]
            remaining -= S[:, j]
        return u

    # -- neighbours ----------------------------------------------------------

    def neighbor_up(self, u: int, server: int) -> int | None:
        """Index of the state with one more call at ``server``; None at level K."""
        if self.size <= NEIGHBOR_TABLE_LIMIT:
            v = int(self.up_table[u, server])
            return None if v < 0 else v
        state = list(self.unrank(u))
        if sum(state) == self.K:
            return None
        state[server] += 1
        return self.rank(state)

    def neighbor_down(self, u: int, server: int) -> int | None:
        state = list(self.unrank(u))
        if state[server] == 0:
            return None
        state[server] -= 1
        return self.rank(state)

    @cached_property
    def up_table(self) -> np.ndarray:
        """``(U_K, I)`` array of upward neighbour indices, -1 when truncated."""
        return self._shift_table(+1)

    @cached_property
    def down_table(self) -> np.ndarray:
        """``(U_K, I)`` array of downward neighbour indices, -1 when ``n_i = 0``."""
        return self._shift_table(-1)

    def _shift_table(self, step: int) -> np.ndarray:
        S = self.states
        out = np.full(S.shape, -1, dtype=np.int64)
        if step > 0:
            valid_rows = self.levels < self.K
        for i in range(self.servers):
            rows = valid_rows if step > 0 else S[:, i] > 0
            shifted = S[rows].copy()
            shifted[:, i] += step
            out[rows, i] = self.rank_many(shifted)
        out.flags.writeable = False
        return out

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlattice import kernels
from hyperlattice.errors import CountOverflow, IndexOutOfRange, LevelExceedsK
from hyperlattice.states import StateIndexer, checked_binom, cumulative_size, level_size
from oracles import brute_states

TABLE = {
    2: {1: 3, 2: 6, 3: 10, 5: 21, 10: 66, 15: 136, 20: 231},
    3: {1: 4, 2: 10, 3: 20, 5: 56, 10: 286, 15: 816, 20: 1771},
    4: {1: 5, 2: 15, 3: 35, 5: 126, 10: 1001, 15: 3876, 20: 10626},
}


@pytest.mark.parametrize("I", sorted(TABLE))
def test_table_counts(I):
    for K, n in TABLE[I].items():
        assert cumulative_size(I, K) == n
        assert StateIndexer(I, K).size == n


def test_level_sizes_sum():
    for I in range(1, 6):
        for K in range(8):
            assert sum(level_size(I, k) for k in range(K + 1)) == cumulative_size(I, K)


def test_tour_order_matches_brute_force():
    for I in range(1, 5):
        for K in range(6):
            idx = StateIndexer(I, K)
            assert [tuple(s) for s in idx.states] == brute_states(I, K)


@pytest.mark.parametrize("I,K", [(1, 30), (2, 40), (3, 20), (4, 12), (5, 8), (6, 6)])
def test_rank_unrank_exhaustive(I, K):
    idx = StateIndexer(I, K)
    assert idx.size <= 10**4
    for u in range(idx.size):
        s = idx.unrank(u)
        assert sum(s) <= K
        assert idx.rank(s) == u
    assert np.array_equal(idx.rank_many(idx.states), np.arange(idx.size))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=7))
def test_rank_roundtrip_random(state):
    idx = StateIndexer(len(state), sum(state) + 2)
    assert idx.unrank(idx.rank(state)) == tuple(state)


def test_errors():
    idx = StateIndexer(3, 4)
    with pytest.raises(LevelExceedsK):
        idx.rank((2, 2, 1))
    with pytest.raises(IndexOutOfRange):
        idx.unrank(idx.size)
    with pytest.raises(IndexOutOfRange):
        idx.unrank(-1)
    with pytest.raises(CountOverflow):
        checked_binom(200, 100)


def test_small_cases():
    idx = StateIndexer(3, 0)
    assert idx.size == 1 and idx.unrank(0) == (0, 0, 0)
    idx = StateIndexer(1, 5)
    assert [idx.unrank(u) for u in range(6)] == [(k,) for k in range(6)]


def test_neighbors():
    idx = StateIndexer(3, 4)
    for u in range(idx.size):
        s = idx.unrank(u)
        for i in range(3):
            up = idx.neighbor_up(u, i)
            if sum(s) == 4:
                assert up is None
                assert idx.up_table[u, i] == -1
            else:
                t = list(s)
                t[i] += 1
                assert up == idx.rank(t) == idx.up_table[u, i]
            dn = idx.neighbor_down(u, i)
            if s[i] == 0:
                assert dn is None and idx.down_table[u, i] == -1
            else:
                t = list(s)
                t[i] -= 1
                assert dn == idx.rank(t) == idx.down_table[u, i]


def test_levels_sorted():
    idx = StateIndexer(4, 6)
    assert np.all(np.diff(idx.levels) >= 0)
    assert idx.level_offset(0) == 0
    for k in range(1, 7):
        assert idx.level_offset(k) == math.comb(k - 1 + 4, 4)


@pytest.mark.skipif(kernels.BACKEND != "compiled", reason="extension not built")
def test_enumerate_backends_agree():
    for I, K in itertools.product(range(1, 5), range(7)):
        a = kernels.get_backend("python").enumerate_states(I, K)
        b = kernels.get_backend("compiled").enumerate_states(I, K)
        assert np.array_equal(a, b)

import numpy as np
import pytest

from hyperlattice.errors import DimensionOverflow, InvalidSystem, NotPairwiseOverlaps
from hyperlattice.generator import (
    REFLECTING,
    SUBGENERATOR,
    build_generator,
    build_generator_two_server,
    load_dump,
    upward_rate,
    upward_rate_two_server,
    upward_rates,
)
from hyperlattice.system import DefaultPolicy, IdlePreferencePolicy, build_system
from oracles import brute_generator


def test_matches_brute_force(tri):
    s, p = tri
    Q = build_generator(s, p, 5)
    _, ref = brute_generator(s.primary_rates, [(o.members, o.rate) for o in s.overlaps],
                             s.service_rates, 5)
    assert np.abs(Q.matrix.toarray() - ref).max() < 1e-14


def test_row_sums(tri):
    s, p = tri
    Qr = build_generator(s, p, 6, REFLECTING)
    assert np.abs(np.asarray(Qr.matrix.sum(axis=1)).ravel()).max() < 1e-12
    assert not Qr.leak.any()
    Qs = build_generator(s, p, 6, SUBGENERATOR)
    rows = np.asarray(Qs.matrix.sum(axis=1)).ravel()
    assert np.allclose(rows, -Qs.leak, atol=1e-12)
    top = Qs.indexer.levels == 6
    assert np.allclose(Qs.leak[top], s.total_arrival_rate)
    assert not Qs.leak[~top].any()
    assert np.allclose(Qs.dropped, Qr.dropped)


def test_random_rows_invariants():
    s = build_system(5, [0.1, 0.2, 0.0, 0.3, 0.1], [([0, 1, 2], 0.3), ([2, 3, 4], 0.25), ([0, 4], 0.1)],
                     [1.0, 0.9, 1.1, 1.3, 0.7])
    Q = build_generator(s, DefaultPolicy(s), 12)
    rng = np.random.default_rng(3)
    rows = rng.choice(Q.dim, size=10_000, replace=True)
    S = Q.indexer.states
    M = Q.matrix
    for u in rows:
        lo, hi = M.indptr[u], M.indptr[u + 1]
        cols, vals = M.indices[lo:hi], M.data[lo:hi]
        assert abs(vals.sum()) < 1e-12
        off = cols != u
        assert np.all(vals[off] > 0)
        dist = np.abs(S[cols[off]] - S[u]).sum(axis=1)
        assert np.all(dist == 1)


def test_upward_sum_is_lambda(tri):
    s, p = tri
    Q = build_generator(s, p, 5)
    up = upward_rates(s, p, Q.indexer.states)
    assert np.allclose(up.sum(axis=1), s.total_arrival_rate, atol=1e-12)
    assert upward_rate(s, p, (0, 0, 0), 0) == pytest.approx(0.2 + 0.2)


def test_two_server_identity():
    s = build_system(3, [0.1, 0.2, 0.3], [([0, 1], 0.2), ([1, 2], 0.15), ([0, 2], 0.05)], [1, 1, 1])
    eta = np.full((3, 3), 0.5)
    for K in range(7):
        a = build_generator(s, DefaultPolicy(s), K).matrix.toarray()
        b = build_generator_two_server(s, eta, K).matrix.toarray()
        assert np.abs(a - b).max() < 1e-12


def test_two_server_general_eta():
    s = build_system(2, [0.3, 0.1], [([0, 1], 0.4)], [1, 1])
    eta = np.array([[0, 0.8], [0.2, 0]])
    pol = IdlePreferencePolicy(s, {0: [0.8, 0.2]})
    a = build_generator(s, pol, 5).matrix.toarray()
    b = build_generator_two_server(s, eta, 5).matrix.toarray()
    assert np.abs(a - b).max() < 1e-12
    assert upward_rate_two_server(s, eta, (0, 3), 0) == pytest.approx(0.7)
    assert upward_rate_two_server(s, eta, (2, 3), 0) == pytest.approx(0.3 + 0.32)


def test_two_server_errors():
    s = build_system(3, [0.1] * 3, [([0, 1, 2], 0.2)], [1] * 3)
    with pytest.raises(NotPairwiseOverlaps):
        build_generator_two_server(s, np.full((3, 3), 0.5), 3)
    s = build_system(2, [0.1] * 2, [([0, 1], 0.2)], [1] * 2)
    with pytest.raises(InvalidSystem):
        build_generator_two_server(s, np.array([[0, 0.7], [0.7, 0]]), 3)


def test_dump_roundtrip(tmp_path, sym2):
    s, p = sym2
    Q = build_generator(s, p, 4)
    path = tmp_path / "q.txt"
    Q.dump(path)
    M, mode = load_dump(path)
    assert mode == REFLECTING
    assert (M != Q.matrix).nnz == 0
    first = path.read_text().splitlines()[0].split()
    assert first == [str(Q.dim), str(Q.nnz), REFLECTING]


def test_size_guard(sym2):
    s, p = sym2
    with pytest.raises(DimensionOverflow):
        build_generator(s, p, 100, max_nnz=1000)
    with pytest.raises(ValueError):
        build_generator(s, p, -1)
    with pytest.raises(ValueError):
        build_generator(s, p, 3, mode="bogus")

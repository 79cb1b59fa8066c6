import json

import numpy as np
import pytest

from hyperlattice.errors import ZeroTotalRate
from hyperlattice.metrics import (
    aggregate_from_pi,
    check_report,
    dispatch_fractions,
    evaluate,
    workload_imbalance,
    workloads,
)
from hyperlattice.solver import solve
from hyperlattice.states import StateIndexer
from hyperlattice.system import build_system, default_policy
from oracles import mm1_geometric

TABLE3_G = (0.29, 0.23, 0.45, 0.21, 0.28, 0.21, 0.20, 0.28, 0.28, 0.25, 0.13, 0.22)


def test_mm1_workload():
    s = build_system(1, [0.5], [], [1.0])
    st, Q = solve(s, default_policy(s), 60)
    assert workloads(st.pi, Q.indexer)[0] == pytest.approx(0.5, abs=1e-12)
    assert np.abs(aggregate_from_pi(st.pi, Q.indexer) - mm1_geometric(0.5, 60)).max() < 1e-10


def test_symmetry(sym2):
    s, p = sym2
    r = evaluate(s, p, 8)
    assert abs(r.workloads[0] - r.workloads[1]) < 1e-12
    assert abs(r.overlap_fractions[0, 0] - r.overlap_fractions[1, 0]) < 1e-12
    assert r.imbalance < 1e-12


def test_point_mass():
    idx = StateIndexer(3, 4)
    pi = np.zeros(idx.size)
    pi[0] = 1.0
    assert workloads(pi, idx).tolist() == [0.0, 0.0, 0.0]


def test_dispatch_fractions():
    s = build_system(3, [0.2, 0.1, 0.3], [([0, 1], 0.4)], [1, 1, 1])
    st, Q = solve(s, default_policy(s), 6)
    ov, prim = dispatch_fractions(st.pi, s, default_policy(s), Q.indexer)
    assert ov[2, 0] == 0.0
    assert np.allclose(prim, np.array([0.2, 0.1, 0.3]) / 1.0)
    assert ov.sum() == pytest.approx(0.4 * st.mass)
    # rho_ii does not depend on pi
    _, prim2 = dispatch_fractions(np.zeros(Q.dim), s, default_policy(s), Q.indexer)
    assert np.array_equal(prim, prim2)


def test_zero_rate():
    s = build_system(2, [0.0, 0.0], [], [1, 1])
    with pytest.raises(ZeroTotalRate):
        dispatch_fractions(np.ones(3) / 3, s, default_policy(s), StateIndexer(2, 1))


def test_imbalance():
    assert workload_imbalance([0.3, 0.3, 0.3]) == 0.0
    assert workload_imbalance([0.2, 0.4]) == pytest.approx(0.1)
    assert abs(workload_imbalance(TABLE3_G) - 0.07) <= 0.005
    with pytest.raises(ValueError):
        workload_imbalance([])


def test_aggregate_partition(tri):
    s, p = tri
    st, Q = solve(s, p, 7)
    agg = aggregate_from_pi(st.pi, Q.indexer)
    assert agg.shape == (8,)
    assert agg.sum() == pytest.approx(st.pi.sum(), abs=1e-14)


def test_report_invariants_and_io(tmp_path, tri):
    s, p = tri
    r = evaluate(s, p, 6)
    assert check_report(r, s) == []
    assert r.truncation_mass - 1e-9 <= r.dispatch_total <= 1 + 1e-9
    d = json.loads(r.to_json(tmp_path / "r.json"))
    assert d["K"] == 6 and len(d["workloads"]) == 3
    r.to_csv(tmp_path / "r.csv", s)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "server,workload,rho_ii,rho_{1-2-3}"
    assert len(lines) == 4


def test_renormalised_workloads(sym2):
    s, p = sym2
    st, Q = solve(s, p, 4)
    a = workloads(st.pi, Q.indexer)
    b = workloads(st.pi, Q.indexer, renormalize=True)
    assert np.allclose(b, a / st.mass)

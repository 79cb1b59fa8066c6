import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperlattice.errors import (
    DuplicateHyperedge,
    InvalidSystem,
    NonErgodicWarning,
    NonPositiveServiceRate,
    SubsetHyperedge,
    UnknownHyperedge,
)
from hyperlattice.system import (
    DefaultPolicy,
    FixedEtaPolicy,
    Geometry,
    IdlePreferencePolicy,
    TablePolicy,
    build_system,
    eval_policy,
    load_config,
    system_from_config,
    system_to_config,
)


def test_basic_properties(sym2):
    s, _ = sym2
    assert s.server_count == 2 and s.overlap_count == 1
    assert s.total_arrival_rate == pytest.approx(1.0)
    assert s.load == pytest.approx(0.5)
    assert s.ergodic
    assert s.edge_index([1, 0]) == 0
    assert s.membership().tolist() == [[True, True]]


def test_validation():
    with pytest.raises(SubsetHyperedge):
        build_system(3, [0, 0, 0], [([0, 1], 0.1), ([0, 1, 2], 0.1)], [1, 1, 1])
    with pytest.raises(DuplicateHyperedge):
        build_system(2, [0, 0], [([0, 1], 0.1), ([1, 0], 0.1)], [1, 1])
    with pytest.raises(NonPositiveServiceRate):
        build_system(2, [0, 0], [], [1, 0])
    with pytest.raises(InvalidSystem):
        build_system(2, [-1, 0], [], [1, 1])
    with pytest.raises(InvalidSystem):
        build_system(2, [0, 0], [([0], 0.2)], [1, 1])
    with pytest.raises(InvalidSystem):
        build_system(2, [0, 0], [([0, 2], 0.2)], [1, 1])
    with pytest.raises(UnknownHyperedge):
        build_system(3, [0.1] * 3, [([0, 1], 0.1)], [1] * 3).edge_index([1, 2])
    with pytest.warns(NonErgodicWarning):
        build_system(1, [2.0], [], [1.0])


def test_geometry_validation():
    with pytest.raises(InvalidSystem):
        Geometry(primary=(((0, 0, 0, 1),),), overlaps=())
    with pytest.raises(InvalidSystem):
        Geometry(primary=(((0, 0, 2, 2),), ((1, 1, 3, 3),)), overlaps=())
    g = Geometry(primary=(((0, 0, 1, 1),), ((1, 0, 2, 1),)), overlaps=(((2, 0, 3, 1),),))
    s = build_system(2, [0.1, 0.1], [([0, 1], 0.1)], [1, 1], geometry=g)
    assert g.region_rects(0, s) == ((0, 0, 1, 1), (2, 0, 3, 1))
    assert g.home(1, s) == (1.5, 0.5)


def test_default_policy_rule(tri):
    s, p = tri
    assert np.allclose(p.probs(0, (0, 0, 0)), [1 / 3] * 3)
    assert np.allclose(p.probs(0, (1, 0, 0)), [0, 0.5, 0.5])
    assert np.allclose(p.probs(0, (1, 2, 0)), [0, 0, 1])
    assert np.allclose(p.probs(0, (1, 2, 3)), [1 / 3] * 3)
    assert eval_policy(p, 0, (1, 0, 0), 1) == 0.5


def test_non_member_is_zero():
    s = build_system(3, [0.1] * 3, [([0, 1], 0.2)], [1] * 3)
    p = DefaultPolicy(s)
    assert eval_policy(p, [0, 1], (0, 0, 0), 2) == 0.0


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=4, max_size=4), st.integers(0, 2))
def test_policies_normalise(state, which):
    s = build_system(4, [0.1] * 4, [([0, 1, 2], 0.3), ([2, 3], 0.2)], [1] * 4)
    policies = [
        DefaultPolicy(s),
        IdlePreferencePolicy(s, {0: [1, 2, 3], 1: [5, 1]}),
        FixedEtaPolicy(s, {0: [0.2, 0.3, 0.5], 1: [1.0, 0.0]}),
    ]
    p = policies[which]
    for e, ov in enumerate(s.overlaps):
        probs = p.probs(e, state)
        assert abs(probs.sum() - 1) < 1e-12
        assert np.all(probs >= 0)
        for i in range(4):
            v = eval_policy(p, e, state, i)
            assert (v == 0.0) if i not in ov.members else 0 <= v <= 1


def test_idle_preference_pairs():
    s = build_system(2, [0.1, 0.1], [([0, 1], 0.4)], [1, 1])
    p = IdlePreferencePolicy(s, {0: [0.7, 0.3]})
    assert np.allclose(p.probs(0, (0, 0)), [0.7, 0.3])
    assert np.allclose(p.probs(0, (2, 1)), [0.7, 0.3])
    assert np.allclose(p.probs(0, (0, 1)), [1.0, 0.0])
    assert np.allclose(p.probs(0, (3, 0)), [0.0, 1.0])


def test_table_policy():
    s = build_system(2, [0.1, 0.1], [([0, 1], 0.4)], [1, 1])
    p = TablePolicy(s, {(0, (1, 1)): [0.9, 0.1]})
    assert np.allclose(p.probs(0, (1, 1)), [0.9, 0.1])
    assert np.allclose(p.probs(0, (0, 1)), [1.0, 0.0])
    with pytest.raises(InvalidSystem):
        TablePolicy(s, {(0, (1, 1)): [0.9, 0.2]})


def test_bad_eta():
    s = build_system(2, [0.1, 0.1], [([0, 1], 0.4)], [1, 1])
    with pytest.raises(InvalidSystem):
        FixedEtaPolicy(s, {0: [0.6, 0.6]})
    with pytest.raises(InvalidSystem):
        IdlePreferencePolicy(s, {0: [1.0, 0.0]})


@pytest.mark.parametrize(
    "policy",
    [
        {"kind": "default"},
        {"kind": "fixed_eta", "eta": [{"members": [1, 2], "probs": [0.25, 0.75]}]},
        {"kind": "idle_preference", "weights": [{"members": [1, 2], "probs": [0.4, 0.6]}]},
        {"kind": "table", "entries": [{"members": [2, 1], "state": [1, 1], "probs": [0.2, 0.8]}]},
    ],
)
def test_config_roundtrip(tmp_path, policy):
    cfg = {
        "servers": 2,
        "primary_rates": [0.3, 0.2],
        "service_rates": [1, 1.5],
        "overlaps": [{"members": [1, 2], "rate": 0.4}],
        "policy": policy,
        "geometry": {"primary": [[[0, 0, 1, 1]], [[2, 0, 3, 1]]], "overlaps": [[[1, 0, 2, 1]]]},
    }
    s, p = system_from_config(cfg)
    again = system_to_config(s, p)
    s2, p2 = system_from_config(json.loads(json.dumps(again)))
    assert s2 == s
    for state in [(0, 0), (1, 0), (1, 1), (0, 3)]:
        assert np.allclose(p.probs(0, state), p2.probs(0, state))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    s3, _ = load_config(path)
    assert s3 == s

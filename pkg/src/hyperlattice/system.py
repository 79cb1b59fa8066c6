"""Service-system hypergraph, optional planar geometry, and dispatch policies.

Server indices are 0-based throughout the Python API.  JSON configs use the
1-based convention of the queueing literature; :func:`system_from_config`
and :func:`system_to_config` translate between the two.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateHyperedge,
    InvalidSystem,
    NonErgodicWarning,
    NonPositiveServiceRate,
    SubsetHyperedge,
    UnknownHyperedge,
)

Rect = tuple[float, float, float, float]


@dataclass(frozen=True)
class Overlap:
    members: tuple[int, ...]
    rate: float


@dataclass(frozen=True)
class Geometry:
    """Rectangle unions for each primary and overlapping region.

    Only the simulator (travel) and the hypercube baseline (dispatch
    preferences) look at geometry; the analytical model needs rates only.
    """

    primary: tuple[tuple[Rect, ...], ...]
    overlaps: tuple[tuple[Rect, ...], ...]
    speed: float = 10.0
    server_homes: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.speed <= 0:
            raise InvalidSystem("travel speed must be positive")
        rects = [r for group in self.primary + self.overlaps for r in group]
        for x0, y0, x1, y1 in rects:
            if not (x1 > x0 and y1 > y0):
                raise InvalidSystem(f"rectangle {(x0, y0, x1, y1)} has no area")
        for a, b in itertools.combinations(rects, 2):
            if _interiors_intersect(a, b):
                raise InvalidSystem(f"regions {a} and {b} overlap")

    def region_rects(self, server: int, system: "ServiceSystem") -> tuple[Rect, ...]:
        """All rectangles server ``server`` is responsible for (its S_i)."""
        out = list(self.primary[server])
        for e, ov in enumerate(system.overlaps):
            if server in ov.members:
                out.extend(self.overlaps[e])
        return tuple(out)

    def home(self, server: int, system: "ServiceSystem") -> tuple[float, float]:
        if self.server_homes is not None:
            return self.server_homes[server]
        rects = self.primary[server] or self.region_rects(server, system)
        return centroid(rects)


def rect_area(r: Rect) -> float:
    return (r[2] - r[0]) * (r[3] - r[1])


def centroid(rects: Sequence[Rect]) -> tuple[float, float]:
    areas = np.array([rect_area(r) for r in rects])
    cx = np.array([(r[0] + r[2]) / 2 for r in rects])
    cy = np.array([(r[1] + r[3]) / 2 for r in rects])
    w = areas / areas.sum()
    return float(w @ cx), float(w @ cy)


def _interiors_intersect(a: Rect, b: Rect) -> bool:
    return min(a[2], b[2]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[1], b[1])


@dataclass(frozen=True)
class ServiceSystem:
    primary_rates: tuple[float, ...]
    service_rates: tuple[float, ...]
    overlaps: tuple[Overlap, ...] = ()
    geometry: Geometry | None = field(default=None, compare=True)

    @property
    def server_count(self) -> int:
        return len(self.service_rates)

    @property
    def overlap_count(self) -> int:
        return len(self.overlaps)

    @property
    def total_arrival_rate(self) -> float:
        return math.fsum(self.primary_rates) + math.fsum(o.rate for o in self.overlaps)

    @property
    def total_service_rate(self) -> float:
        return math.fsum(self.service_rates)

    @property
    def load(self) -> float:
        return self.total_arrival_rate / self.total_service_rate

    @property
    def ergodic(self) -> bool:
        return self.total_arrival_rate < self.total_service_rate

    def edge_index(self, edge) -> int:
        """Resolve a hyperedge given by position or by its member set."""
        if isinstance(edge, (int, np.integer)):
            if 0 <= edge < self.overlap_count:
                return int(edge)
            raise UnknownHyperedge(edge)
        key = tuple(sorted(int(i) for i in edge))
        for e, ov in enumerate(self.overlaps):
            if ov.members == key:
                return e
        raise UnknownHyperedge(key)

    def membership(self) -> np.ndarray:
        """Boolean (E, I) incidence matrix."""
        m = np.zeros((self.overlap_count, self.server_count), dtype=bool)
        for e, ov in enumerate(self.overlaps):
            m[e, list(ov.members)] = True
        return m


def build_system(
    server_count: int,
    primary_rates: Sequence[float],
    overlaps: Iterable = (),
    service_rates: Sequence[float] = (),
    geometry: Geometry | None = None,
) -> ServiceSystem:
    """Validate rates and hyperedges and return an immutable system.

    ``overlaps`` holds ``(members, rate)`` pairs or :class:`Overlap` objects,
    with 0-based member indices.  A non-ergodic load only warns.
    """
    if server_count < 1:
        raise InvalidSystem("need at least one server")
    primary = tuple(float(x) for x in primary_rates)
    mu = tuple(float(x) for x in service_rates)
    if len(primary) != server_count or len(mu) != server_count:
        raise InvalidSystem("rate vectors must have one entry per server")
    if any(not math.isfinite(x) or x < 0 for x in primary):
        raise InvalidSystem("arrival rates must be finite and nonnegative")
    if any(not (x > 0) or not math.isfinite(x) for x in mu):
        raise NonPositiveServiceRate("service rates must be positive")

    edges = []
    for ov in overlaps:
        members, rate = (ov.members, ov.rate) if isinstance(ov, Overlap) else ov
        members = tuple(sorted(int(i) for i in members))
        if len(set(members)) != len(members):
            raise InvalidSystem(f"repeated server in hyperedge {members}")
        if len(members) < 2:
            raise InvalidSystem(f"hyperedge {members} needs at least two servers")
        if members[0] < 0 or members[-1] >= server_count:
            raise InvalidSystem(f"hyperedge {members} references unknown server")
        rate = float(rate)
        if not math.isfinite(rate) or rate < 0:
            raise InvalidSystem("overlap rates must be finite and nonnegative")
        edges.append(Overlap(members, rate))

    for a, b in itertools.combinations(edges, 2):
        sa, sb = set(a.members), set(b.members)
        if sa == sb:
            raise DuplicateHyperedge(f"hyperedge {a.members} listed twice")
        if sa < sb or sb < sa:
            raise SubsetHyperedge(f"hyperedges {a.members} and {b.members} are nested")

    if geometry is not None:
        if len(geometry.primary) != server_count or len(geometry.overlaps) != len(edges):
            raise InvalidSystem("geometry must list regions for every server and overlap")
        if geometry.server_homes is not None and len(geometry.server_homes) != server_count:
            raise InvalidSystem("server_homes needs one point per server")

    system = ServiceSystem(primary, mu, tuple(edges), geometry)
    if geometry is not None:
        for i in range(server_count):
            if not geometry.region_rects(i, system):
                raise InvalidSystem(f"server {i} has no service region in the geometry")
    if not system.ergodic:
        warnings.warn(
            f"lambda={system.total_arrival_rate:g} >= mu={system.total_service_rate:g}; "
            "only the truncated model is meaningful",
            NonErgodicWarning,
            stacklevel=2,
        )
    return system


# ---------------------------------------------------------------------------
# dispatch policies


class DispatchPolicy:
    """State-dependent assignment of overlap calls to member servers.

    Subclasses implement :meth:`member_probs`, which is vectorised over a
    block of states and returns, for hyperedge ``e``, an ``(N, |e|)`` array
    whose columns follow the sorted member order.
    """

    kind = "abstract"

    def __init__(self, system: ServiceSystem):
        self.system = system

    def member_probs(self, e: int, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def probs(self, e: int, state: Sequence[int]) -> np.ndarray:
        return self.member_probs(e, np.asarray(state, dtype=np.int64)[None, :])[0]

    def to_config(self) -> dict:
        raise NotImplementedError


class IdlePreferencePolicy(DispatchPolicy):
    """Send the call to an idle member if any, else to any member.

    Within the chosen pool (idle members, or all members when none is idle)
    the server is drawn with probability proportional to ``weights[e]``.
    With pairwise overlaps this is exactly the two-server rule of the
    appendix with ``eta_ij = weights`` renormalised over the pool.
    """

    kind = "idle_preference"

    def __init__(self, system: ServiceSystem, weights: Mapping[int, Sequence[float]]):
        super().__init__(system)
        self.weights = {}
        for e, ov in enumerate(system.overlaps):
            w = np.asarray(weights[e], dtype=float)
            if w.shape != (len(ov.members),) or np.any(w <= 0):
                raise InvalidSystem(f"weights for hyperedge {ov.members} must be positive")
            self.weights[e] = w / w.sum()

    def member_probs(self, e, states):
        members = list(self.system.overlaps[e].members)
        idle = np.asarray(states)[:, members] == 0
        w = self.weights[e][None, :]
        any_idle = idle.any(axis=1, keepdims=True)
        pool = np.where(any_idle, idle, True)
        raw = np.where(pool, w, 0.0)
        return raw / raw.sum(axis=1, keepdims=True)

    def to_config(self):
        return {
            "kind": "idle_preference",
            "weights": [
                {"members": [i + 1 for i in ov.members], "probs": self.weights[e].tolist()}
                for e, ov in enumerate(self.system.overlaps)
            ],
        }


class DefaultPolicy(IdlePreferencePolicy):
    """Uniform over idle members; uniform over all members if none is idle."""

    kind = "default"

    def __init__(self, system: ServiceSystem):
        super().__init__(
            system, {e: np.ones(len(ov.members)) for e, ov in enumerate(system.overlaps)}
        )

    def member_probs(self, e, states):
        members = list(self.system.overlaps[e].members)
        idle = np.asarray(states)[:, members] == 0
        n_idle = idle.sum(axis=1, keepdims=True)
        return np.where(
            n_idle > 0, idle / np.maximum(n_idle, 1), 1.0 / len(members)
        ).astype(float)

    def to_config(self):
        return {"kind": "default"}


class FixedEtaPolicy(DispatchPolicy):
    """State-independent member probabilities, one vector per hyperedge."""

    kind = "fixed_eta"

    def __init__(self, system: ServiceSystem, eta: Mapping[int, Sequence[float]]):
        super().__init__(system)
        self.eta = {}
        for e, ov in enumerate(system.overlaps):
            p = np.asarray(eta[e], dtype=float)
            _check_probs(p, ov.members)
            self.eta[e] = p

    def member_probs(self, e, states):
        return np.broadcast_to(self.eta[e], (len(states), len(self.eta[e]))).copy()

    def to_config(self):
        return {
            "kind": "fixed_eta",
            "eta": [
                {"members": [i + 1 for i in ov.members], "probs": self.eta[e].tolist()}
                for e, ov in enumerate(self.system.overlaps)
            ],
        }


class TablePolicy(DispatchPolicy):
    """Explicit per-state member probabilities with a fallback policy."""

    kind = "table"

    def __init__(
        self,
        system: ServiceSystem,
        table: Mapping[tuple[int, tuple[int, ...]], Sequence[float]],
        fallback: DispatchPolicy | None = None,
    ):
        super().__init__(system)
        self.fallback = fallback or DefaultPolicy(system)
        self.table = {}
        for (e, state), p in table.items():
            e = system.edge_index(e)
            state = tuple(int(x) for x in state)
            if len(state) != system.server_count or min(state) < 0:
                raise InvalidSystem(f"bad state {state} in policy table")
            p = np.asarray(p, dtype=float)
            _check_probs(p, system.overlaps[e].members)
            self.table[(e, state)] = p

    def member_probs(self, e, states):
        out = self.fallback.member_probs(e, states)
        if self.table:
            for row, s in enumerate(np.asarray(states)):
                p = self.table.get((e, tuple(int(x) for x in s)))
                if p is not None:
                    out[row] = p
        return out

    def to_config(self):
        return {
            "kind": "table",
            "fallback": self.fallback.to_config(),
            "entries": [
                {
                    "members": [i + 1 for i in self.system.overlaps[e].members],
                    "state": list(state),
                    "probs": p.tolist(),
                }
                for (e, state), p in sorted(self.table.items())
            ],
        }


def _check_probs(p: np.ndarray, members) -> None:
    if p.shape != (len(members),):
        raise InvalidSystem(f"need {len(members)} probabilities for hyperedge {members}")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidSystem(f"probabilities for hyperedge {members} must sum to one")


def default_policy(system: ServiceSystem) -> DefaultPolicy:
    return DefaultPolicy(system)


def eval_policy(policy: DispatchPolicy, edge, state: Sequence[int], server: int) -> float:
    """eta_{e,u}(i): zero for non-members, a pmf over the members of ``e``."""
    system = policy.system
    e = system.edge_index(edge)
    if not 0 <= server < system.server_count:
        raise IndexError(f"server {server} out of range")
    members = system.overlaps[e].members
    if server not in members:
        return 0.0
    return float(policy.probs(e, state)[members.index(server)])


# ---------------------------------------------------------------------------
# JSON configuration (1-based server ids)


def system_from_config(cfg: Mapping) -> tuple[ServiceSystem, DispatchPolicy]:
    n = int(cfg["servers"])
    overlaps = [
        ([int(m) - 1 for m in ov["members"]], float(ov["rate"]))
        for ov in cfg.get("overlaps", [])
    ]
    geometry = None
    if cfg.get("geometry"):
        geometry = geometry_from_config(cfg["geometry"])
    system = build_system(
        n,
        cfg["primary_rates"],
        overlaps,
        cfg["service_rates"],
        geometry=geometry,
    )
    return system, policy_from_config(system, cfg.get("policy") or {"kind": "default"})


def geometry_from_config(g: Mapping) -> Geometry:
    def rects(groups):
        return tuple(tuple(tuple(float(v) for v in r) for r in grp) for grp in groups)

    homes = g.get("server_homes")
    return Geometry(
        primary=rects(g["primary"]),
        overlaps=rects(g.get("overlaps", [])),
        speed=float(g.get("speed", 10.0)),
        server_homes=None if homes is None else tuple(tuple(map(float, h)) for h in homes),
    )


def _edge_table(system, entries, key="probs"):
    out = {}
    for item in entries:
        e = system.edge_index([int(m) - 1 for m in item["members"]])
        out[e] = item[key]
    return out


def policy_from_config(system: ServiceSystem, cfg: Mapping) -> DispatchPolicy:
    kind = cfg.get("kind", "default")
    if kind == "default":
        return DefaultPolicy(system)
    if kind == "fixed_eta":
        return FixedEtaPolicy(system, _edge_table(system, cfg["eta"]))
    if kind == "idle_preference":
        return IdlePreferencePolicy(system, _edge_table(system, cfg["weights"]))
    if kind == "table":
        fallback = policy_from_config(system, cfg.get("fallback") or {"kind": "default"})
        table = {
            (system.edge_index([int(m) - 1 for m in item["members"]]), tuple(item["state"])):
                item["probs"]
            for item in cfg.get("entries", [])
        }
        return TablePolicy(system, table, fallback)
    raise InvalidSystem(f"unknown policy kind {kind!r}")


def system_to_config(system: ServiceSystem, policy: DispatchPolicy | None = None) -> dict:
    cfg = {
        "servers": system.server_count,
        "primary_rates": list(system.primary_rates),
        "service_rates": list(system.service_rates),
        "overlaps": [
            {"members": [i + 1 for i in ov.members], "rate": ov.rate} for ov in system.overlaps
        ],
        "policy": (policy or DefaultPolicy(system)).to_config(),
    }
    g = system.geometry
    if g is not None:
        cfg["geometry"] = {
            "speed": g.speed,
            "primary": [[list(r) for r in grp] for grp in g.primary],
            "overlaps": [[list(r) for r in grp] for grp in g.overlaps],
        }
        if g.server_homes is not None:
            cfg["geometry"]["server_homes"] = [list(h) for h in g.server_homes]
    return cfg


def load_config(path) -> tuple[ServiceSystem, DispatchPolicy]:
    with open(Path(path)) as fh:
        return system_from_config(json.load(fh))

"""Minimal binary-state hypercube baseline with a shared M/M/I queue tail.

Each call region is split into atoms (the rectangles of its geometry, with
the region rate shared by area).  An atom ranks its eligible servers by
distance from the atom centroid to the server home, ties broken by index,
and appends the remaining servers in the same order, so any idle server can
pick up a call once the eligible ones are busy.  Arrivals that find every
server busy join one shared FIFO queue; beyond the all-busy corner the
chain is a birth-death tail with rates ``lambda`` and ``mu = sum mu_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonErgodic, TooManyServers
from .metrics import PerformanceReport, workload_imbalance
from .system import ServiceSystem, centroid, rect_area

MAX_SERVERS = 16


@dataclass(frozen=True)
class HypercubeModel:
    servers: int
    atom_rates: np.ndarray
    atom_region: np.ndarray  # region id: i for primary of server i, I + e for overlap e
    preference: tuple[tuple[int, ...], ...]
    service_rates: np.ndarray
    generator: sp.csr_matrix
    pi: np.ndarray  # over the 2^I binary states, bit i = server i busy
    tail_mass: float

    @property
    def arrival_rate(self) -> float:
        return float(self.atom_rates.sum())

    @property
    def rho(self) -> float:
        return self.arrival_rate / float(self.service_rates.sum())


def _atoms(system: ServiceSystem):
    """(rate, region, eligible servers, centroid or None) for every atom."""
    I = system.server_count
    regions = [(system.primary_rates[i], (i,)) for i in range(I)]
    regions += [(ov.rate, ov.members) for ov in system.overlaps]
    g = system.geometry
    out = []
    for r, (rate, eligible) in enumerate(regions):
        if rate == 0.0:
            continue
        rects = ()
        if g is not None:
            rects = g.primary[r] if r < I else g.overlaps[r - I]
        if not rects:
            out.append((rate, r, eligible, None))
            continue
        areas = np.array([rect_area(q) for q in rects])
        for q, a in zip(rects, areas):
            out.append((rate * a / areas.sum(), r, eligible, centroid([q])))
    return out


def preference_order(system: ServiceSystem, eligible, point) -> tuple[int, ...]:
    I = system.server_count
    g = system.geometry

    def key(i):
        if point is None or g is None:
            return (0.0, i)
        hx, hy = g.home(i, system)
        return (math.hypot(point[0] - hx, point[1] - hy), i)

    first = sorted(eligible, key=key)
    rest = sorted((i for i in range(I) if i not in eligible), key=key)
    return tuple(first + rest)


def _first_idle(states: np.ndarray, pref) -> np.ndarray:
    """Server chosen in each binary state (``-1`` if all busy)."""
    chosen = np.full(states.shape[0], -1, dtype=np.int64)
    for j in reversed(pref):
        idle = (states >> j) & 1 == 0
        chosen[idle] = j
    return chosen


def build_hypercube(system: ServiceSystem) -> HypercubeModel:
    I = system.server_count
    if I > MAX_SERVERS:
        raise TooManyServers(f"{I} servers; the binary baseline is capped at {MAX_SERVERS}")
    mu = np.asarray(system.service_rates, dtype=float)
    lam = system.total_arrival_rate
    if lam >= mu.sum():
        raise NonErgodic("the shared-queue tail needs lambda < sum(mu)")
    atoms = _atoms(system)
    prefs = tuple(preference_order(system, el, pt) for _, _, el, pt in atoms)

    n = 1 << I
    full = n - 1
    b = np.arange(n, dtype=np.int64)
    rows, cols, vals = [], [], []
    for (rate, _, _, _), pref in zip(atoms, prefs):
        j = _first_idle(b, pref)
        ok = j >= 0
        rows.append(b[ok])
        cols.append(b[ok] | (1 << j[ok]))
        vals.append(np.full(ok.sum(), rate))
    for j in range(I):
        busy = (b >> j) & 1 == 1
        rows.append(b[busy])
        cols.append(b[busy] ^ (1 << j))
        vals.append(np.full(busy.sum(), mu[j]))
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    out = np.bincount(rows, weights=vals, minlength=n)
    Q = sp.csr_matrix(
        (np.concatenate([vals, -out]), (np.concatenate([rows, b]), np.concatenate([cols, b]))),
        shape=(n, n),
    )

    # censored binary chain, then stretch the all-busy corner by the tail
    A = Q.T.tocsr()
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    if n <= 4096:
        A = A.toarray()
        A[-1, :] = 1.0
        p = scipy.linalg.solve(A, rhs)
    else:
        A = sp.vstack([A[:-1], sp.csr_matrix(np.ones((1, n)))], format="csc")
        p = spla.spsolve(A, rhs, permc_spec="MMD_AT_PLUS_A")
    p = np.maximum(p, 0.0)
    p /= p.sum()
    rho = lam / mu.sum()
    tail_ratio = rho / (1.0 - rho)
    p = p / (1.0 + p[full] * tail_ratio)
    tail = float(p[full] * tail_ratio)

    return HypercubeModel(
        servers=I,
        atom_rates=np.array([a[0] for a in atoms]),
        atom_region=np.array([a[1] for a in atoms], dtype=np.int64),
        preference=prefs,
        service_rates=mu,
        generator=Q,
        pi=p,
        tail_mass=tail,
    )


def hypercube_workloads(model: HypercubeModel, system: ServiceSystem | None = None):
    """Workloads (tail counts every server busy) and dispatch fractions.

    Returns ``(rho, overlap_fractions (I, E), primary_fractions (I,))``.
    Calls that find all servers busy are served by whichever server frees
    up first, i.e. server ``j`` with probability ``mu_j / mu``.
    """
    I = model.servers
    b = np.arange(1 << I, dtype=np.int64)
    full = (1 << I) - 1
    busy = ((b[:, None] >> np.arange(I)) & 1).astype(bool)
    rho = model.pi @ busy + model.tail_mass

    n_regions = int(model.atom_region.max(initial=I - 1)) + 1
    if system is not None:
        n_regions = I + system.overlap_count
    frac = np.zeros((I, n_regions))
    lam = model.arrival_rate
    saturated = model.pi[full] + model.tail_mass
    share = model.service_rates / model.service_rates.sum()
    for rate, r, pref in zip(model.atom_rates, model.atom_region, model.preference):
        j = _first_idle(b, pref)
        ok = j >= 0
        np.add.at(frac[:, r], j[ok], rate * model.pi[ok] / lam)
        frac[:, r] += rate * saturated * share / lam
    primary = np.array([frac[i, i] for i in range(I)])
    overlap = frac[:, I:]
    stray = frac[:, :I].copy()
    np.fill_diagonal(stray, 0.0)
    return rho, overlap, primary, stray


def hypercube_report(system: ServiceSystem) -> PerformanceReport:
    model = build_hypercube(system)
    rho, overlap, primary, stray = hypercube_workloads(model, system)
    I = model.servers
    b = np.arange(1 << I)
    level = np.array([bin(x).count("1") for x in b])
    agg = np.bincount(level, weights=model.pi, minlength=I + 1)
    agg[I] += model.tail_mass
    return PerformanceReport(
        workloads=rho,
        overlap_fractions=overlap,
        primary_fractions=primary,
        imbalance=workload_imbalance(rho),
        truncation_mass=1.0,
        aggregate=agg,
        K=None,
        model="hypercube",
        meta={
            "tail_mass": model.tail_mass,
            "cross_primary_fraction": float(stray.sum()),
            "aggregate_note": "last entry holds P{all busy} including the queue tail",
        },
    )

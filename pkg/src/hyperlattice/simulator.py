"""Discrete-event simulation of the overlapping-region service system.

Calls arrive in each region as independent Poisson streams, generated here
as one superposed stream with region marks.  Each call is assigned at
arrival (idle members first for the default policy), joins the end of its
server's FIFO queue, and is served at rate ``mu_i``.  All randomness for a
replication is drawn up front from a Philox stream, so the compiled and the
pure-Python event loops see identical inputs and agree bit for bit.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import kernels
from .errors import MissingGeometry, ShapeMismatch, ZeroTotalRate
from .system import (
    DefaultPolicy,
    DispatchPolicy,
    FixedEtaPolicy,
    IdlePreferencePolicy,
    ServiceSystem,
    rect_area,
)

EVENT_KINDS = ("arrival", "departure")


@dataclass(frozen=True)
class SimConfig:
    events: int = 1000
    replications: int = 1
    seed: int = 0
    warmup: float = 0.1
    travel: bool = False
    busy_includes_travel: bool = False
    record_log: bool = False
    backend: str | None = None
    workers: int = 1
    queue_cap: int = 50
    confidence: float = 0.95

    def __post_init__(self):
        if self.events < 1:
            raise ValueError("event budget must be at least 1")
        if not 0 <= self.warmup < 1:
            raise ValueError("warm-up fraction must lie in [0, 1)")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.busy_includes_travel and not self.travel:
            raise ValueError("busy_includes_travel needs travel enabled")


@dataclass
class Replication:
    workloads: np.ndarray
    overlap_fractions: np.ndarray
    primary_fractions: np.ndarray
    queue_dist: np.ndarray
    mean_queue: np.ndarray
    arrival_rate: np.ndarray  # per-server assignment rate in the window
    mean_sojourn: np.ndarray
    mean_travel: float
    window: float
    horizon: float
    log: tuple | None = field(default=None, repr=False)


@dataclass
class SimResult:
    reps: list
    config: SimConfig
    backend: str
    region_labels: tuple

    def _stack(self, name):
        return np.stack([getattr(r, name) for r in self.reps])

    @property
    def workloads(self) -> np.ndarray:
        return self._stack("workloads")

    @property
    def overlap_fractions(self) -> np.ndarray:
        return self._stack("overlap_fractions")

    @property
    def primary_fractions(self) -> np.ndarray:
        return self._stack("primary_fractions")

    @property
    def queue_dist(self) -> np.ndarray:
        return self._stack("queue_dist")

    def mean(self, name="workloads") -> np.ndarray:
        return self._stack(name).mean(axis=0)

    def ci(self, name="workloads") -> np.ndarray:
        """Half-width of the t confidence interval across replications."""
        x = self._stack(name)
        n = x.shape[0]
        if n < 2:
            return np.full(x.shape[1:], np.nan)
        q = stats.t.ppf(0.5 + self.config.confidence / 2, n - 1)
        return q * x.std(axis=0, ddof=1) / math.sqrt(n)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "busy_time": "service+travel" if self.config.busy_includes_travel else "service only",
            "events": self.config.events,
            "replications": self.config.replications,
            "seed": self.config.seed,
            "warmup": self.config.warmup,
            "workloads": self.mean("workloads").tolist(),
            "workloads_ci": self.ci("workloads").tolist(),
            "overlap_fractions": self.mean("overlap_fractions").tolist(),
            "primary_fractions": self.mean("primary_fractions").tolist(),
            "mean_queue": self.mean("mean_queue").tolist(),
        }

    def log_rows(self, rep: int = 0):
        log = self.reps[rep].log
        if log is None:
            raise ValueError("event log was not recorded; set record_log=True")
        t, kind, region, server, q = log
        for i in range(len(t)):
            yield (repr(float(t[i])), EVENT_KINDS[kind[i]], self.region_labels[region[i]],
                   int(server[i]) + 1, int(q[i]))

    def write_log(self, path, rep: int = 0) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "event_kind", "region", "server", "queue_len_after"])
            w.writerows(self.log_rows(rep))


# ---------------------------------------------------------------------------
# set-up


def region_labels(system: ServiceSystem) -> tuple:
    labels = [f"P{i + 1}" for i in range(system.server_count)]
    labels += ["O" + "-".join(str(i + 1) for i in ov.members) for ov in system.overlaps]
    return tuple(labels)


def _region_tables(system: ServiceSystem, policy: DispatchPolicy):
    """CSR-style member lists, weights and dispatch modes for every region."""
    I = system.server_count
    ptr = [0]
    members, weights, modes = [], [], []
    callback_needed = False
    for i in range(I):
        members.append(i)
        weights.append(1.0)
        modes.append(kernels.MODE_SINGLE)
        ptr.append(len(members))
    for e, ov in enumerate(system.overlaps):
        members.extend(ov.members)
        if isinstance(policy, DefaultPolicy):
            weights.extend([1.0] * len(ov.members))
            modes.append(kernels.MODE_IDLE_PREF)
        elif isinstance(policy, IdlePreferencePolicy):
            weights.extend(policy.weights[e].tolist())
            modes.append(kernels.MODE_IDLE_PREF)
        elif isinstance(policy, FixedEtaPolicy):
            weights.extend(policy.eta[e].tolist())
            modes.append(kernels.MODE_FIXED)
        else:
            weights.extend([0.0] * len(ov.members))
            modes.append(kernels.MODE_CALLBACK)
            callback_needed = True
        ptr.append(len(members))
    return (
        np.array(ptr, dtype=np.int64),
        np.array(members, dtype=np.int64),
        np.array(weights, dtype=float),
        np.array(modes, dtype=np.int64),
        callback_needed,
    )


def _region_rects(system: ServiceSystem):
    g = system.geometry
    I = system.server_count
    return [tuple(g.primary[i]) for i in range(I)] + [tuple(r) for r in g.overlaps]


def _server_rect_tables(system: ServiceSystem):
    g = system.geometry
    ptr = [0]
    rects, cum = [], []
    for i in range(system.server_count):
        acc = 0.0
        for r in g.region_rects(i, system):
            acc += rect_area(r)
            rects.append(r)
            cum.append(acc)
        ptr.append(len(rects))
    return np.array(ptr, dtype=np.int64), np.array(rects, dtype=float), np.array(cum)


def _sample_calls(rng, region_rects, regions, N):
    """Uniform call locations within each call's region."""
    xy = np.zeros((N, 2))
    for r, rects in enumerate(region_rects):
        idx = np.flatnonzero(regions == r)
        if idx.size == 0:
            continue
        areas = np.array([rect_area(q) for q in rects])
        pick = rng.choice(len(rects), size=idx.size, p=areas / areas.sum())
        box = np.array(rects)[pick]
        u = rng.random((idx.size, 2))
        xy[idx, 0] = box[:, 0] + u[:, 0] * (box[:, 2] - box[:, 0])
        xy[idx, 1] = box[:, 1] + u[:, 1] * (box[:, 3] - box[:, 1])
    return xy


def draw_inputs(system: ServiceSystem, config: SimConfig, rng: np.random.Generator) -> dict:
    """Every random quantity one replication consumes."""
    rates = np.array(list(system.primary_rates) + [o.rate for o in system.overlaps])
    lam = rates.sum()
    N = config.events
    gaps = rng.exponential(1.0 / lam, size=N)
    out = {
        "arrival_times": np.cumsum(gaps),
        "regions": rng.choice(rates.size, size=N, p=rates / lam).astype(np.int64),
        "service_exp": rng.standard_exponential(N),
        "dispatch_u": rng.random(N),
    }
    if config.travel:
        out["call_xy"] = _sample_calls(rng, _region_rects(system), out["regions"], N)
        out["idle_u"] = rng.random((N, 3))
    else:
        out["call_xy"] = np.zeros((N, 2))
        out["idle_u"] = np.zeros((N, 3))
    return out


# ---------------------------------------------------------------------------
# run


def _run_one(system, policy, config, tables, rect_tables, backend, child) -> Replication:
    rng = np.random.Generator(np.random.Philox(child))
    inp = draw_inputs(system, config, rng)
    I, E = system.server_count, system.overlap_count
    R = I + E
    N = config.events
    ptr, members, weights, modes, needs_cb = tables
    rect_ptr, rects, rect_cum = rect_tables

    k = int(config.warmup * N)
    t_warm = float(inp["arrival_times"][k - 1]) if k > 0 else 0.0
    busy = np.zeros(I)
    area = np.zeros(I)
    qhist = np.zeros((I, config.queue_cap + 1))
    counts = np.zeros((I, R), dtype=np.int64)
    completion = np.zeros(N)
    assigned = np.zeros(N, dtype=np.int64)
    travel_time = np.zeros(N)
    L = 2 * N if config.record_log else 1
    log = (np.zeros(L), np.zeros(L, dtype=np.int64), np.zeros(L, dtype=np.int64),
           np.zeros(L, dtype=np.int64), np.zeros(L, dtype=np.int64))

    callback = None
    if needs_cb:
        def callback(r, n):
            return policy.probs(r - I, n).tolist()

    n_log = backend.simulate_events(
        inp["arrival_times"], inp["regions"], inp["service_exp"], inp["dispatch_u"],
        ptr, members, weights, modes,
        np.asarray(system.service_rates, dtype=float), t_warm,
        config.travel, config.busy_includes_travel,
        system.geometry.speed if system.geometry is not None else 1.0,
        inp["call_xy"], inp["idle_u"], rect_ptr, rects, rect_cum,
        busy, area, qhist, counts, completion, assigned, travel_time,
        config.record_log, *log, callback=callback,
    )

    horizon = float(inp["arrival_times"][-1])
    window = horizon - t_warm
    if window <= 0:
        raise ValueError("observation window is empty; lower warm-up or raise the event budget")
    total = counts.sum()
    frac = counts / total if total else np.zeros_like(counts, dtype=float)

    arrive = inp["arrival_times"]
    in_window = arrive > t_warm if k > 0 else np.ones(N, dtype=bool)
    done = in_window & (completion >= 0)
    soj = np.full(I, np.nan)
    for i in range(I):
        m = done & (assigned == i)
        if m.any():
            soj[i] = float(np.mean(completion[m] - arrive[m]))
    served = (completion >= 0) & (travel_time > 0)
    mean_travel = float(travel_time[served].mean()) if served.any() else 0.0
    return Replication(
        workloads=busy / window,
        overlap_fractions=frac[:, I:].astype(float),
        primary_fractions=np.diag(frac[:, :I]).astype(float),
        queue_dist=qhist / window,
        mean_queue=area / window,
        arrival_rate=counts.sum(axis=1) / window,
        mean_sojourn=soj,
        mean_travel=mean_travel,
        window=window,
        horizon=horizon,
        log=tuple(a[:n_log].copy() for a in log) if config.record_log else None,
    )


def simulate(system: ServiceSystem, policy: DispatchPolicy | None = None,
             config: SimConfig | None = None) -> SimResult:
    config = config or SimConfig()
    policy = policy or DefaultPolicy(system)
    if system.total_arrival_rate <= 0:
        raise ZeroTotalRate("nothing to simulate: total arrival rate is zero")
    if config.travel and system.geometry is None:
        raise MissingGeometry("travel accounting needs a geometry")
    tables = _region_tables(system, policy)
    backend_name = config.backend
    if tables[4]:
        backend_name = "python"
    backend = kernels.get_backend(backend_name)
    if config.travel:
        rect_tables = _server_rect_tables(system)
    else:
        rect_tables = (np.zeros(system.server_count + 1, dtype=np.int64),
                       np.zeros((1, 4)), np.zeros(1))
    children = np.random.SeedSequence(config.seed).spawn(config.replications)

    def job(child):
        return _run_one(system, policy, config, tables, rect_tables, backend, child)

    if config.workers > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            reps = list(pool.map(job, children))
    else:
        reps = [job(c) for c in children]
    name = "compiled" if backend is not kernels._kernels_py else "python"
    return SimResult(reps, config, name, region_labels(system))


# ---------------------------------------------------------------------------


def _as_arrays(x):
    if isinstance(x, SimResult):
        return x.mean("workloads"), x.mean("overlap_fractions"), x.mean("primary_fractions")
    return (np.asarray(x.workloads), np.asarray(x.overlap_fractions),
            np.asarray(x.primary_fractions))


def compare(report, sim) -> dict:
    """Errors of a model report against a simulation (or another report).

    Frobenius norms are taken over the workload vector and over the
    ``(I, E)`` overlap-dispatch array.  For a :class:`SimResult` the norms
    are also given per replication with their mean and CI.
    """
    w0, o0, p0 = _as_arrays(report)
    w1, o1, p1 = _as_arrays(sim)
    if w0.shape != w1.shape or o0.shape != o1.shape:
        raise ShapeMismatch(f"model shape {w0.shape}/{o0.shape} vs sim {w1.shape}/{o1.shape}")
    out = {
        "workload_abs": np.abs(w0 - w1),
        "workload_frobenius": float(np.linalg.norm(w0 - w1)),
        "overlap_abs": np.abs(o0 - o1),
        "overlap_frobenius": float(np.linalg.norm(o0 - o1)),
        "primary_abs": np.abs(p0 - p1),
        "primary_frobenius": float(np.linalg.norm(p0 - p1)),
    }
    if isinstance(sim, SimResult):
        per_w = np.linalg.norm(sim.workloads - w0, axis=1)
        per_o = np.linalg.norm((sim.overlap_fractions - o0).reshape(len(sim.reps), -1), axis=1)
        n = len(sim.reps)
        q = stats.t.ppf(0.5 + sim.config.confidence / 2, n - 1) if n > 1 else np.nan
        out.update(
            workload_frobenius_reps=per_w,
            workload_frobenius_mean=float(per_w.mean()),
            workload_frobenius_ci=float(q * per_w.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
            overlap_frobenius_reps=per_o,
            overlap_frobenius_mean=float(per_o.mean()),
            overlap_frobenius_ci=float(q * per_o.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        )
    return out

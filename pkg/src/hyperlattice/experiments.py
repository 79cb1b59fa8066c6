"""Scenario sweeps, the state-count table and districting-plan evaluation.

Synthetic systems live on a 100 x 100 square with calls spread uniformly,
so every region's rate is the total rate times its area share.

* overlap sweep: server 1 owns the left half, server 2 the right half, and
  a strip of width ``50 r`` on server 1's side next to the border is shared,
  giving ``r = |O| / (|O| + |P_1|)``.
* eta sweep: a strip of width ``w`` centred on the border is shared, with
  ``w`` chosen so that the same ratio ``r = w / (50 + w / 2)`` holds, and
  overlap calls are split with fixed probabilities ``(eta, 1 - eta)``.
* load sweep: four 50 x 50 cells, one server homed at each cell centre and
  a single overlap made of all four cells, so every server may take any
  call; the grid value is the per-server load ``lambda / (I mu)``.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .aggregate import AggregateModel, truncation_mass
from .errors import InvalidSystem, SweepPointFailed, UncoveredBeat
from .hypercube import hypercube_report
from .metrics import PerformanceReport, evaluate
from .simulator import SimConfig, compare, simulate
from .states import cumulative_size
from .system import DefaultPolicy, FixedEtaPolicy, Geometry, build_system

SIDE = 100.0
HALF = SIDE / 2

DEFAULT_K_SMALL = 5  # sweeps with at most three servers
DEFAULT_K_PLAN = 4  # twelve-server districting plans


def overlap_system(r: float, lam: float = 1.0, mu: float = 1.0):
    """Two servers, shared strip of width ``50 r`` carved from server 1's half."""
    if not 0 <= r <= 1:
        raise InvalidSystem("overlap ratio must lie in [0, 1]")
    w = HALF * r
    p1 = ((0.0, 0.0, HALF - w, SIDE),) if w < HALF else ()
    ov = ((HALF - w, 0.0, HALF, SIDE),) if w > 0 else ()
    p2 = ((HALF, 0.0, SIDE, SIDE),)
    g = Geometry(primary=(p1, p2), overlaps=(ov,),
                 server_homes=((HALF / 2, HALF), (HALF + HALF / 2, HALF)))
    share = 0.5 * lam
    system = build_system(2, [share * (1 - r), share], [([0, 1], share * r)], [mu, mu], geometry=g)
    return system, DefaultPolicy(system)


def strip_width(r: float) -> float:
    """Width of a centred shared strip with overlap ratio ``r``."""
    return HALF * r / (1 - r / 2)


def eta_system(eta: float, r: float = 0.4, lam: float = 1.0, mu: float = 1.0):
    """Symmetric centred overlap split with fixed probabilities (eta, 1 - eta)."""
    if not 0 <= eta <= 1:
        raise InvalidSystem("eta must lie in [0, 1]")
    if not 0 < r < 1:
        raise InvalidSystem("eta sweep needs an overlap ratio in (0, 1)")
    w = strip_width(r)
    lo, hi = HALF - w / 2, HALF + w / 2
    g = Geometry(
        primary=(((0.0, 0.0, lo, SIDE),), ((hi, 0.0, SIDE, SIDE),)),
        overlaps=(((lo, 0.0, hi, SIDE),),),
        server_homes=((lo / 2, HALF), ((hi + SIDE) / 2, HALF)),
    )
    a = lam * lo / SIDE
    system = build_system(2, [a, a], [([0, 1], lam * w / SIDE)], [mu, mu], geometry=g)
    return system, FixedEtaPolicy(system, {0: [eta, 1 - eta]})


GRID_CELLS = (
    (0.0, 0.0, HALF, HALF),
    (HALF, 0.0, SIDE, HALF),
    (0.0, HALF, HALF, SIDE),
    (HALF, HALF, SIDE, SIDE),
)


def load_system(ratio: float, mu: float = 1.0):
    """Four-server grid, one overlap over all cells, per-server load ``ratio``."""
    if not ratio > 0:
        raise InvalidSystem("load must be positive")
    homes = tuple(((c[0] + c[2]) / 2, (c[1] + c[3]) / 2) for c in GRID_CELLS)
    g = Geometry(primary=((),) * 4, overlaps=(GRID_CELLS,), server_homes=homes)
    system = build_system(4, [0.0] * 4, [([0, 1, 2, 3], 4 * mu * ratio)], [mu] * 4, geometry=g)
    return system, DefaultPolicy(system)


def load_sweep_K(ratio: float, eps: float = 3e-3, K_min: int = 20) -> int:
    """Smallest K >= K_min with rho^(K+1) <= eps (geometric tail bound)."""
    if ratio >= 1:
        raise InvalidSystem("load sweep K rule needs ratio < 1")
    if ratio <= 0:
        return K_min
    return max(K_min, math.ceil(math.log(eps) / math.log(ratio)) - 1)


BUILDERS: dict[str, Callable] = {
    "overlap_ratio": overlap_system,
    "eta": eta_system,
    "load": load_system,
}


@dataclass
class Scenario:
    axis: str
    grid: Sequence[float]
    K: int | None = None
    solver: str = "auto"
    mode: str | None = None
    sim: SimConfig | None = field(default_factory=lambda: SimConfig(events=50_000, replications=10))
    hypercube: bool | None = None
    workers: int = 1
    params: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.axis not in BUILDERS:
            raise InvalidSystem(f"unknown sweep axis {self.axis!r}")
        grid = np.asarray(self.grid, dtype=float)
        if self.axis in ("overlap_ratio", "eta") and (grid.min() < 0 or grid.max() > 1):
            raise InvalidSystem(f"{self.axis} grid must lie in [0, 1]")
        if self.axis == "load" and grid.min() <= 0:
            raise InvalidSystem("load grid must be positive")
        if self.hypercube is None:
            self.hypercube = self.axis == "load"

    def K_for(self, value: float) -> int:
        if self.K is not None:
            return self.K
        if self.axis == "load":
            return load_sweep_K(value)
        return DEFAULT_K_SMALL


def default_grid(axis: str, points: int = 100) -> np.ndarray:
    if axis == "load":
        return np.round(np.arange(1, 10) / 10, 10)
    return np.linspace(0.0, 1.0, points)


def _cols(prefix, arr, system):
    arr = np.asarray(arr)
    out = {}
    if arr.ndim == 1:
        for i, v in enumerate(arr):
            out[f"{prefix}_{i + 1}"] = float(v)
    else:
        for i in range(arr.shape[0]):
            for e in range(arr.shape[1]):
                label = "-".join(str(m + 1) for m in system.overlaps[e].members)
                out[f"{prefix}_{i + 1}_{{{label}}}"] = float(arr[i, e])
    return out


def sweep_point(scenario: Scenario, index: int, value: float) -> dict:
    t0 = time.perf_counter()
    system, policy = BUILDERS[scenario.axis](value, **scenario.params)
    K = scenario.K_for(value)
    report = evaluate(system, policy, K, solver=scenario.solver, mode=scenario.mode)
    row = {
        "index": index,
        "axis": scenario.axis,
        "value": float(value),
        "K": K,
        "states": cumulative_size(system.server_count, K),
        "sigma_K": report.truncation_mass,
    }
    row.update(_cols("model_rho", report.workloads, system))
    row.update(_cols("model_rho_ii", report.primary_fractions, system))
    row.update(_cols("model_rho", report.overlap_fractions, system))
    if scenario.hypercube:
        hc = hypercube_report(system)
        row.update(_cols("hypercube_rho", hc.workloads, system))
    if scenario.sim is not None:
        cfg = replace(scenario.sim, seed=scenario.sim.seed + index)
        sim = simulate(system, policy, cfg)
        row.update(_cols("sim_rho", sim.mean("workloads"), system))
        row.update(_cols("sim_rho_ci", sim.ci("workloads"), system))
        row.update(_cols("sim_rho", sim.mean("overlap_fractions"), system))
        err = compare(report, sim)
        row["workload_error"] = err["workload_frobenius_mean"]
        row["workload_error_ci"] = err["workload_frobenius_ci"]
        row["dispatch_error"] = err["overlap_frobenius_mean"]
        row["max_abs_workload_error"] = float(err["workload_abs"].max())
        if scenario.hypercube:
            herr = compare(hc, sim)
            row["hypercube_workload_error"] = herr["workload_frobenius_mean"]
            row["hypercube_workload_error_ci"] = herr["workload_frobenius_ci"]
            row["hypercube_dispatch_error"] = herr["overlap_frobenius_mean"]
    row["runtime_s"] = time.perf_counter() - t0
    return row


def run_sweep(scenario: Scenario) -> list[dict]:
    """One row per grid point, in grid order whatever the completion order."""
    grid = list(np.asarray(scenario.grid, dtype=float))

    def job(item):
        i, v = item
        try:
            return sweep_point(scenario, i, v)
        except Exception as exc:  # noqa: BLE001 - re-raised with the grid point
            raise SweepPointFailed(i, v, exc) from exc

    if scenario.workers > 1:
        with ThreadPoolExecutor(max_workers=scenario.workers) as pool:
            rows = list(pool.map(job, enumerate(grid)))
    else:
        rows = [job(item) for item in enumerate(grid)]
    if scenario.out:
        write_rows(rows, scenario.out)
    return rows


def write_rows(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("nothing to write")
    fields = list(rows[0])
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, restval="")
        w.writeheader()
        w.writerows(rows)


# ---------------------------------------------------------------------------
# state-count table

TABLE_SERVERS = (2, 3, 4)
TABLE_K = (1, 2, 3, 5, 10, 15, 20)


def table_states(I_list=TABLE_SERVERS, K_list=TABLE_K, rho: float = 0.5,
                 timed: bool = True) -> list[dict]:
    """U_K, sigma_K at load ``rho`` and (optionally) build+solve seconds.

    Timing uses a symmetric system with all servers sharing one overlap at
    per-server load ``rho``.
    """
    from .solver import solve

    rows = []
    for I in I_list:
        for K in K_list:
            row = {"I": I, "K": K, "states": cumulative_size(I, K)}
            row["sigma_K"] = truncation_mass(AggregateModel(I, rho * I, I), K) if rho < 1 else None
            if timed:
                overlaps = [(list(range(I)), rho * I)] if I > 1 else []
                prim = [0.0] * I if I > 1 else [rho]
                system = build_system(I, prim, overlaps, [1.0] * I)
                t0 = time.perf_counter()
                solve(system, DefaultPolicy(system), K)
                row["seconds"] = time.perf_counter() - t0
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# districting plans


@dataclass(frozen=True)
class Beat:
    beat_id: str
    arrival_rate: float
    unit: str | None
    covering: tuple[str, ...]


@dataclass(frozen=True)
class DistrictingPlan:
    beats: tuple[Beat, ...]
    service_rate: float = 1.0

    @property
    def units(self) -> tuple[str, ...]:
        ids = {b.unit for b in self.beats if b.unit} | {u for b in self.beats for u in b.covering}
        return tuple(sorted(ids, key=_natural))

    def responders(self, beat: Beat) -> tuple[str, ...]:
        group = set(beat.covering)
        if beat.unit:
            group.add(beat.unit)
        if not group:
            raise UncoveredBeat(f"beat {beat.beat_id} has neither a unit nor covering units")
        return tuple(sorted(group, key=_natural))

    def to_system(self):
        units = self.units
        if not units:
            raise UncoveredBeat("plan has no units")
        pos = {u: i for i, u in enumerate(units)}
        primary = [0.0] * len(units)
        shared: dict[tuple[int, ...], float] = {}
        for b in self.beats:
            group = tuple(pos[u] for u in self.responders(b))
            if len(group) == 1:
                primary[group[0]] += b.arrival_rate
            else:
                shared[group] = shared.get(group, 0.0) + b.arrival_rate
        system = build_system(
            len(units), primary, list(shared.items()), [self.service_rate] * len(units)
        )
        return system, DefaultPolicy(system)


def _natural(s: str):
    return (0, int(s), "") if s.strip().isdigit() else (1, 0, s)


def _split_units(text: str) -> tuple[str, ...]:
    text = (text or "").strip()
    if not text:
        return ()
    for sep in ";| ":
        if sep in text:
            return tuple(t.strip() for t in text.split(sep) if t.strip())
    return (text,)


def read_plan(path, service_rate: float = 1.0) -> DistrictingPlan:
    """CSV with ``beat_id, arrival_rate, unit_id_or_blank, covering_units``.

    ``covering_units`` lists unit ids separated by ``;``.  A beat's call
    group is its own unit plus its covering units; a group of one is that
    unit's primary region, larger groups become shared regions.
    """
    beats = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh, skipinitialspace=True):
            unit = (rec.get("unit_id_or_blank") or "").strip() or None
            beats.append(
                Beat(rec["beat_id"].strip(), float(rec["arrival_rate"]), unit,
                     _split_units(rec.get("covering_units", "")))
            )
    plan = DistrictingPlan(tuple(beats), service_rate)
    for b in plan.beats:
        plan.responders(b)
    return plan


def write_plan(plan: DistrictingPlan, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beat_id", "arrival_rate", "unit_id_or_blank", "covering_units"])
        for b in plan.beats:
            w.writerow([b.beat_id, repr(b.arrival_rate), b.unit or "", ";".join(b.covering)])


def evaluate_plan(plan: DistrictingPlan, K: int = DEFAULT_K_PLAN, **solve_kw) -> tuple[PerformanceReport, float]:
    system, policy = plan.to_system()
    report = evaluate(system, policy, K, **solve_kw)
    report.meta["units"] = list(plan.units)
    return report, report.imbalance


def plan_truncation_check(plan: DistrictingPlan, K: int = DEFAULT_K_PLAN) -> dict:
    """sigma (imbalance) at K and K+1 against the bound 1 - sigma_K."""
    r0, s0 = evaluate_plan(plan, K)
    _, s1 = evaluate_plan(plan, K + 1)
    bound = 1.0 - r0.truncation_mass
    return {"K": K, "sigma_K_plan": s0, "sigma_K1_plan": s1, "difference": abs(s1 - s0),
            "bound": bound, "within": abs(s1 - s0) < bound}


def synthetic_plan(service_rate: float = 1.0, shared: bool = True) -> DistrictingPlan:
    """Twelve beats, one unit each; beat 3 is the busiest.

    With ``shared`` units 2 and 4 also cover beat 3, turning it into a
    shared region of units {2, 3, 4}; otherwise unit 3 serves it alone.
    """
    rates = [0.28, 0.23, 0.55, 0.21, 0.27, 0.21, 0.20, 0.26, 0.27, 0.23, 0.13, 0.21]
    beats = [Beat(str(i + 1), r, str(i + 1), ()) for i, r in enumerate(rates)]
    if shared:
        beats[2] = Beat("3", rates[2], "3", ("2", "4"))
    return DistrictingPlan(tuple(beats), service_rate)

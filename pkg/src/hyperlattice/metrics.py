"""Performance measures read off a solved steady-state vector."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroTotalRate
from .states import StateIndexer


def workloads(pi: np.ndarray, indexer: StateIndexer, renormalize: bool = False) -> np.ndarray:
    """rho_i = sum of pi over truncated states with n_i > 0.

    With ``renormalize`` the sum is taken against ``pi / pi.sum()``, i.e. the
    truncated law conditioned on ``N <= K``.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (indexer.size,):
        raise ValueError(f"pi has {pi.shape[0]} entries, indexer has {indexer.size}")
    rho = pi @ (indexer.states > 0)
    if renormalize:
        rho = rho / pi.sum()
    return rho


def dispatch_fractions(pi: np.ndarray, system, policy, indexer: StateIndexer):
    """(rho_{i,e} as an (I, E) array, rho_{i,i} as an (I,) vector).

    rho_{i,e} = sum_u eta_{e,u}(i) lambda_e pi_u / lambda, zero off-support;
    rho_{i,i} = lambda_i / lambda whatever pi is.
    """
    lam = system.total_arrival_rate
    if lam <= 0:
        raise ZeroTotalRate("total arrival rate is zero")
    pi = np.asarray(pi, dtype=float)
    I, E = system.server_count, system.overlap_count
    overlap = np.zeros((I, E))
    S = indexer.states
    for e, ov in enumerate(system.overlaps):
        if ov.rate == 0.0:
            continue
        overlap[list(ov.members), e] = pi @ policy.member_probs(e, S) * ov.rate / lam
    primary = np.asarray(system.primary_rates) / lam
    return overlap, primary


def workload_imbalance(rho) -> float:
    """Population standard deviation of the workloads."""
    rho = np.asarray(rho, dtype=float)
    if rho.size == 0:
        raise ValueError("need at least one workload")
    return float(np.std(rho))


def aggregate_from_pi(pi: np.ndarray, indexer: StateIndexer) -> np.ndarray:
    """Level sums of pi, i.e. the estimate of P{N_k} for k = 0..K."""
    return np.bincount(indexer.levels, weights=np.asarray(pi, dtype=float), minlength=indexer.K + 1)


@dataclass
class PerformanceReport:
    workloads: np.ndarray
    overlap_fractions: np.ndarray  # (I, E)
    primary_fractions: np.ndarray  # (I,)
    imbalance: float
    truncation_mass: float
    aggregate: np.ndarray
    K: int | None = None
    model: str = "hyperlattice"
    meta: dict = field(default_factory=dict)

    @property
    def dispatch_total(self) -> float:
        return float(self.overlap_fractions.sum() + self.primary_fractions.sum())

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "K": self.K,
            "workloads": self.workloads.tolist(),
            "overlap_fractions": self.overlap_fractions.tolist(),
            "primary_fractions": self.primary_fractions.tolist(),
            "imbalance": self.imbalance,
            "truncation_mass": self.truncation_mass,
            "aggregate": self.aggregate.tolist(),
            "meta": self.meta,
        }

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_jsonable, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def csv_rows(self, system=None) -> list[dict]:
        """One row per server: workload, own-region fraction, overlap fractions."""
        rows = []
        for i, w in enumerate(self.workloads):
            row = {"server": i + 1, "workload": float(w), "rho_ii": float(self.primary_fractions[i])}
            for e in range(self.overlap_fractions.shape[1]):
                label = _edge_label(system, e)
                row[f"rho_{label}"] = float(self.overlap_fractions[i, e])
            rows.append(row)
        return rows

    def to_csv(self, path, system=None) -> None:
        rows = self.csv_rows(system)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def _edge_label(system, e: int) -> str:
    if system is None:
        return f"e{e + 1}"
    return "{" + "-".join(str(i + 1) for i in system.overlaps[e].members) + "}"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def report_from_pi(pi, system, policy, indexer, mass: float, **meta) -> PerformanceReport:
    rho = workloads(pi, indexer)
    overlap, primary = dispatch_fractions(pi, system, policy, indexer)
    return PerformanceReport(
        workloads=rho,
        overlap_fractions=overlap,
        primary_fractions=primary,
        imbalance=workload_imbalance(rho),
        truncation_mass=mass,
        aggregate=aggregate_from_pi(pi, indexer),
        K=indexer.K,
        meta=meta,
    )


def evaluate(system, policy, K: int, solver: str = "auto", mode=None, **solve_kw) -> PerformanceReport:
    """Build, solve and summarise in one call."""
    from .solver import solve

    st, Q = solve(system, policy, K, solver=solver, mode=mode, **solve_kw)
    return report_from_pi(
        st.pi, system, policy, Q.indexer, st.mass,
        solver=st.solver, mode=st.mode, iterations=st.iterations,
        residual=st.residual, normalization=st.normalization,
        converged=st.converged, states=Q.dim,
        **({"note": st.note} if st.note else {}),
    )


def check_report(report: PerformanceReport, system, tol: float = 1e-9) -> list[str]:
    """Invariant violations (empty when the report is consistent)."""
    bad = []
    if np.any(report.workloads < -tol) or np.any(report.workloads > 1 + tol):
        bad.append("workload outside [0, 1]")
    member = system.membership().T
    if np.any(report.overlap_fractions[~member] != 0):
        bad.append("dispatch fraction to a hyperedge the server is not in")
    total = report.dispatch_total
    if total > 1 + tol:
        bad.append(f"dispatch fractions sum to {total:.12g} > 1")
    if total < report.truncation_mass - tol:
        bad.append(f"dispatch fractions sum to {total:.12g} < sigma_K")
    if not np.all(np.isfinite(report.aggregate)):
        bad.append("aggregate not finite")
    return bad

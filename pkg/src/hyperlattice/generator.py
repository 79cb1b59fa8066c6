"""Sparse transition-rate matrix of the truncated hyperlattice."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionOverflow, InvalidSystem, NotPairwiseOverlaps
from .states import StateIndexer
from .system import DispatchPolicy, ServiceSystem

REFLECTING = "reflecting"
SUBGENERATOR = "subgen"
MODES = (REFLECTING, SUBGENERATOR)

DEFAULT_MAX_NNZ = 50_000_000
RATE_FLOOR = 1e-15


@dataclass(frozen=True)
class RateMatrix:
    """Generator ``Q_K`` in CSR form.

    ``leak[u]`` is the upward rate from ``u`` that leaves the truncated
    lattice.  In reflecting mode that mass is removed from the diagonal and
    ``leak`` is all zeros; in subgen mode it stays on the diagonal, so each
    row sums to ``-leak[u]``.  ``dropped`` always records the removed rate.
    """

    matrix: sp.csr_matrix
    mode: str
    leak: np.ndarray
    dropped: np.ndarray
    indexer: StateIndexer

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def dump(self, path) -> None:
        """Write ``dim nnz mode`` then one ``u v rate`` line per stored entry."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {coo.nnz} {self.mode}\n")
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r} {c} {float(v)!r}\n")


def load_dump(path) -> tuple[sp.csr_matrix, str]:
    with open(path) as fh:
        dim, nnz, mode = fh.readline().split()
        data = np.loadtxt(fh, ndmin=2)
    dim, nnz = int(dim), int(nnz)
    if data.shape[0] != nnz:
        raise ValueError(f"expected {nnz} entries, found {data.shape[0]}")
    m = sp.csr_matrix(
        (data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim)
    )
    return m, mode


# ---------------------------------------------------------------------------
# upward rates


def upward_rates(system: ServiceSystem, policy: DispatchPolicy, states: np.ndarray) -> np.ndarray:
    """Rate of moving each state up in each coordinate, shape ``(N, I)``.

    ``lambda_i + sum_e eta_{e,u}(i) * lambda_e``; columns sum to ``lambda``
    on every row whenever the policy is a proper pmf over each hyperedge.
    """
    S = np.asarray(states, dtype=np.int64)
    rates = np.broadcast_to(np.asarray(system.primary_rates), S.shape).copy()
    for e, ov in enumerate(system.overlaps):
        if ov.rate == 0.0:
            continue
        rates[:, list(ov.members)] += policy.member_probs(e, S) * ov.rate
    return rates


def upward_rate(system, policy, state: Sequence[int], server: int) -> float:
    return float(upward_rates(system, policy, np.asarray(state)[None, :])[0, server])


def _validate_pairwise_eta(system: ServiceSystem, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    I = system.server_count
    if eta.shape != (I, I):
        raise InvalidSystem(f"eta must be an {I}x{I} matrix")
    for ov in system.overlaps:
        if len(ov.members) != 2:
            raise NotPairwiseOverlaps(f"hyperedge {ov.members} has more than two servers")
        i, j = ov.members
        if not (0 <= eta[i, j] <= 1) or abs(eta[i, j] + eta[j, i] - 1) > 1e-12:
            raise InvalidSystem(f"eta[{i},{j}] + eta[{j},{i}] must equal 1")
    return eta


def upward_rates_two_server(system: ServiceSystem, eta, states: np.ndarray) -> np.ndarray:
    """Upward rates when every overlap is shared by exactly two servers.

    Server ``i`` takes a fraction ``eta[i, j]`` of pair ``(i, j)`` calls when
    both are busy or both idle, and all of them when it is idle while ``j``
    is busy.
    """
    eta = _validate_pairwise_eta(system, eta)
    S = np.asarray(states, dtype=np.int64)
    rates = np.broadcast_to(np.asarray(system.primary_rates), S.shape).copy()
    busy = S > 0
    for ov in system.overlaps:
        i, j = ov.members
        for a, b in ((i, j), (j, i)):
            same = busy[:, a] == busy[:, b]
            grab_all = ~busy[:, a] & busy[:, b]
            rates[:, a] += np.where(same, eta[a, b] * ov.rate, 0.0)
            rates[:, a] += np.where(grab_all, ov.rate, 0.0)
    return rates


def upward_rate_two_server(system, eta, state: Sequence[int], server: int) -> float:
    return float(upward_rates_two_server(system, eta, np.asarray(state)[None, :])[0, server])


# ---------------------------------------------------------------------------
# assembly


def assemble(
    indexer: StateIndexer,
    up: np.ndarray,
    service_rates: Sequence[float],
    mode: str = REFLECTING,
) -> RateMatrix:
    """Build ``Q_K`` from per-state upward rates and the service rates."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    S = indexer.states
    U, I = S.shape
    up = np.where(up < RATE_FLOOR, 0.0, up)
    mu = np.asarray(service_rates, dtype=float)
    up_idx = indexer.up_table
    down_idx = indexer.down_table

    inside = up_idx >= 0
    rows_up, cols_i = np.nonzero(inside & (up > 0))
    rows_dn, cols_j = np.nonzero(down_idx >= 0)
    dropped = np.where(inside, 0.0, up).sum(axis=1)

    off_rows = np.concatenate([rows_up, rows_dn])
    off_cols = np.concatenate([up_idx[rows_up, cols_i], down_idx[rows_dn, cols_j]])
    off_vals = np.concatenate([up[rows_up, cols_i], mu[cols_j]])

    outflow = np.bincount(off_rows, weights=off_vals, minlength=U)
    leak = dropped if mode == SUBGENERATOR else np.zeros(U)
    diag = -(outflow + leak)

    rows = np.concatenate([off_rows, np.arange(U)])
    cols = np.concatenate([off_cols, np.arange(U)])
    vals = np.concatenate([off_vals, diag])
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(U, U))
    Q.sort_indices()
    leak.flags.writeable = False
    dropped.flags.writeable = False
    return RateMatrix(Q, mode, leak, dropped, indexer)


def _check_size(servers: int, K: int, max_nnz: int) -> StateIndexer:
    indexer = StateIndexer(servers, K)
    if indexer.size * (2 * servers + 1) > max_nnz:
        raise DimensionOverflow(
            f"U_K={indexer.size} states may need more than {max_nnz} nonzeros"
        )
    return indexer


def build_generator(
    system: ServiceSystem,
    policy: DispatchPolicy,
    K: int,
    mode: str = REFLECTING,
    max_nnz: int = DEFAULT_MAX_NNZ,
    indexer: StateIndexer | None = None,
) -> RateMatrix:
    if K < 0:
        raise ValueError("K must be nonnegative")
    if indexer is None:
        indexer = _check_size(system.server_count, K, max_nnz)
    up = upward_rates(system, policy, indexer.states)
    return assemble(indexer, up, system.service_rates, mode)


def build_generator_two_server(
    system: ServiceSystem,
    eta,
    K: int,
    mode: str = REFLECTING,
    max_nnz: int = DEFAULT_MAX_NNZ,
) -> RateMatrix:
    indexer = _check_size(system.server_count, K, max_nnz)
    up = upward_rates_two_server(system, eta, indexer.states)
    return assemble(indexer, up, system.service_rates, mode)

"""Steady-state vector of the truncated generator.

Two routes: a direct solve with one balance equation swapped for the mass
constraint, and power iteration on the uniformised chain ``I + Q/gamma``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .aggregate import AggregateModel, truncation_mass
from .errors import MaxIterationsExceeded, SingularSystem
from .generator import REFLECTING, SUBGENERATOR, RateMatrix, build_generator

DIRECT_MAX_STATES = 50_000
DENSE_BELOW = 2_000
AUTO_DIRECT_BELOW = 20_000
NEGATIVE_TOL = 1e-14


@dataclass(frozen=True)
class SteadyState:
    pi: np.ndarray
    mass: float
    residual: float
    iterations: int
    solver: str
    mode: str
    converged: bool = True
    normalization: str = "sigma_K"
    note: str = ""
    residual_history: tuple = field(default=(), repr=False)

    @property
    def total(self) -> float:
        return float(self.pi.sum())


def residual(Q: RateMatrix, pi: np.ndarray) -> float:
    """Max |(Q^T pi)_u| over states strictly below the truncation level."""
    flow = Q.matrix.T @ np.asarray(pi, dtype=float)
    interior = Q.indexer.levels < Q.indexer.K
    if not interior.any():
        return 0.0
    return float(np.abs(flow[interior]).max())


def _clamp(pi: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("solution contains non-finite entries")
    if pi.min(initial=0.0) < -NEGATIVE_TOL:
        raise SingularSystem(f"solution has negative mass {pi.min():.3g}")
    return np.maximum(pi, 0.0)


def solve_direct(
    Q: RateMatrix, sigma: float = 1.0, max_states: int = DIRECT_MAX_STATES
) -> SteadyState:
    """Solve the balance equations with the last one replaced by ``sum(pi) = sigma``.

    Small systems are solved densely exactly as stated.  Above
    ``DENSE_BELOW`` states the dense row of ones wrecks the sparse LU fill,
    so the dropped equation is replaced by ``pi_0 = 1`` instead and the
    result rescaled; the remaining ``U - 1`` balance equations fix the
    direction of ``pi`` either way.
    """
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    U = Q.dim
    if U > max_states:
        raise ValueError(f"{U} states exceeds the direct-solve cap of {max_states}")
    b = np.zeros(U)
    b[-1] = sigma
    A = Q.matrix.T.tocsr()
    if U < DENSE_BELOW:
        A = A.toarray()
        A[-1, :] = 1.0
        try:
            pi = scipy.linalg.solve(A, b, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularSystem(str(exc)) from exc
    else:
        pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, U))
        A = sp.vstack([A[:-1], pin], format="csc")
        b[-1] = 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                pi = spla.spsolve(A, b, permc_spec="MMD_AT_PLUS_A")
            except (RuntimeError, spla.MatrixRankWarning) as exc:
                raise SingularSystem(str(exc)) from exc
        total = pi.sum()
        if not np.isfinite(total) or total <= 0:
            raise SingularSystem("pinned solve produced no usable mass")
        pi = pi * (sigma / total)
    pi = _clamp(np.asarray(pi))
    return SteadyState(pi, sigma, residual(Q, pi), 0, "direct", Q.mode)


def solve_power(
    Q: RateMatrix,
    sigma: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    checkpoint: int = 0,
) -> SteadyState:
    """Power iteration on the uniformised chain from the uniform start vector.

    Stops once successive iterates differ by less than ``tol`` in max-norm,
    then rescales to total mass ``sigma``.  With ``checkpoint > 0`` the
    residual is recorded every ``checkpoint`` iterations.
    """
    if Q.mode != REFLECTING:
        raise ValueError("power iteration needs a proper generator (reflecting mode)")
    gamma = float(np.abs(Q.diagonal()).max())
    U = Q.dim
    pi = np.full(U, 1.0 / U)
    history = []
    it = 0
    converged = True
    if gamma > 0 and math.isfinite(tol):
        P_T = (sp.identity(U, format="csr") + Q.matrix.T / gamma).tocsr()
        converged = False
        while it < max_iter:
            nxt = P_T @ pi
            step = np.abs(nxt - pi).max()
            pi = nxt
            it += 1
            if checkpoint and it % checkpoint == 0:
                history.append((it, residual(Q, pi)))
            if step < tol:
                converged = True
                break
        if not converged:
            warnings.warn(
                f"power iteration stopped after {it} iterations (last step {step:.3g})",
                MaxIterationsExceeded,
                stacklevel=2,
            )
    pi = np.maximum(pi, 0.0)
    pi *= sigma / pi.sum()
    return SteadyState(
        pi, sigma, residual(Q, pi), it, "power", Q.mode, converged,
        residual_history=tuple(history),
    )


def target_mass(system, K: int) -> tuple[float, str, str]:
    """Mass the truncated vector should carry: sigma_K, or 1 if non-ergodic."""
    if system.ergodic:
        return truncation_mass(AggregateModel.from_system(system), K), "sigma_K", ""
    return 1.0, "unit", "lambda >= mu: sigma_K undefined, pi normalised to 1 over U_K"


def solve(
    system,
    policy,
    K: int,
    solver: str = "direct",
    mode: str | None = None,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    max_states: int = DIRECT_MAX_STATES,
) -> tuple[SteadyState, RateMatrix]:
    """Build ``Q_K`` and solve it.

    ``solver="auto"`` picks the direct route below ``AUTO_DIRECT_BELOW``
    states and power iteration above, where sparse LU fill-in dominates.
    Both routes default to the reflecting closure; ``mode="subgen"`` keeps
    the out-of-range rate on the diagonal instead (direct solver only).
    """
    if solver not in ("direct", "power", "auto"):
        raise ValueError("solver must be 'direct', 'power' or 'auto'")
    if mode is None:
        mode = REFLECTING
    if solver == "auto":
        big = math.comb(K + system.server_count, K) >= AUTO_DIRECT_BELOW
        solver = "power" if big and mode == REFLECTING else "direct"
    if mode == SUBGENERATOR and solver == "power":
        raise ValueError("power iteration needs the reflecting closure")
    Q = build_generator(system, policy, K, mode)
    mass, normalization, note = target_mass(system, K)
    if solver == "direct":
        st = solve_direct(Q, mass, max_states=max_states)
    else:
        st = solve_power(Q, mass, tol=tol, max_iter=max_iter)
    if normalization != "sigma_K":
        st = SteadyState(
            st.pi, st.mass, st.residual, st.iterations, st.solver, st.mode,
            st.converged, normalization, note, st.residual_history,
        )
    return st, Q

"""Birth-death aggregation of the hyperlattice by total call count.

Level ``k`` collects every state with ``k`` calls.  Its birth and death
rates carry the same binomial level-size factor, which cancels in every
ratio, so the aggregate law is geometric in ``rho = lambda / mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NonErgodic
from .states import checked_binom


@dataclass(frozen=True)
class AggregateModel:
    servers: int
    arrival_rate: float
    service_rate: float

    def __post_init__(self):
        if self.servers < 1:
            raise ValueError("need at least one server")
        if self.arrival_rate < 0 or not self.service_rate > 0:
            raise ValueError("need lambda >= 0 and mu > 0")

    @classmethod
    def from_system(cls, system) -> "AggregateModel":
        return cls(system.server_count, system.total_arrival_rate, system.total_service_rate)

    @property
    def rho(self) -> float:
        return self.arrival_rate / self.service_rate

    def _require_ergodic(self):
        if self.rho >= 1:
            raise NonErgodic(f"rho = {self.rho:g} >= 1; the aggregate law does not exist")


def birth_rate(model: AggregateModel, k: int) -> float:
    """C(k+I-1, I-1) * lambda."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return checked_binom(k + model.servers - 1, model.servers - 1) * model.arrival_rate


def death_rate(model: AggregateModel, k: int) -> float:
    """C(k+I-2, I-1) * mu."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return checked_binom(k + model.servers - 2, model.servers - 1) * model.service_rate


def aggregate_distribution(model: AggregateModel, K: int) -> np.ndarray:
    """P{N_k} for k = 0..K, evaluated as (1 - rho) rho^k."""
    model._require_ergodic()
    k = np.arange(K + 1)
    return (1.0 - model.rho) * model.rho**k


def aggregate_distribution_literal(model: AggregateModel, K: int, rtol: float = 1e-18) -> np.ndarray:
    """P{N_0..N_K} from the raw birth/death products, without the cancellation.

    Products of birth and death rates are kept as exact rationals; the
    normalising series (which starts from the empty product at level 0) is
    summed until its terms drop below ``rtol`` relative to the partial sum.
    Independent check on :func:`aggregate_distribution`.
    """
    model._require_ergodic()
    lam = Fraction(model.arrival_rate)
    mu = Fraction(model.service_rate)
    I = model.servers
    term = Fraction(1)
    terms = [term]
    total = Fraction(1)
    level = 0
    tol = Fraction(rtol)
    while level < K or term > total * tol:
        level += 1
        birth = math.comb(level - 1 + I - 1, I - 1) * lam
        death = math.comb(level + I - 2, I - 1) * mu
        term = term * birth / death
        total += term
        if level <= K:
            terms.append(term)
        if term == 0:
            break
    terms += [Fraction(0)] * (K + 1 - len(terms))
    return np.array([float(t / total) for t in terms])


def truncation_mass(model: AggregateModel, K: int) -> float:
    """sigma_K = sum_{k<=K} P{N_k} = 1 - rho^(K+1)."""
    model._require_ergodic()
    if model.rho == 0.0:
        return 1.0
    return -math.expm1((K + 1) * math.log(model.rho))


def aggregate_table(model: AggregateModel, K: int) -> list[dict]:
    """Rows of (k, birth, death, P{N_k}, sigma_k); probabilities blank if rho >= 1."""
    ergodic = model.rho < 1
    probs = aggregate_distribution(model, K) if ergodic else None
    rows = []
    for k in range(K + 1):
        rows.append(
            {
                "k": k,
                "level_size": checked_binom(k + model.servers - 1, model.servers - 1),
                "birth_rate": birth_rate(model, k),
                "death_rate": death_rate(model, k) if k >= 1 else 0.0,
                "prob": float(probs[k]) if ergodic else None,
                "sigma": truncation_mass(model, k) if ergodic else None,
            }
        )
    return rows

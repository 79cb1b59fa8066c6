"""Independent reference implementations used only by the tests.

Nothing here imports the package's state ranking or generator assembly:
states are enumerated by brute force, rates are written out from the
model definition, and stationary vectors come from the GTH reduction.
"""
import itertools
from fractions import Fraction

import numpy as np


def brute_states(I, K):
    states = [s for s in itertools.product(range(K + 1), repeat=I) if sum(s) <= K]
    return sorted(states, key=lambda s: (sum(s), s))


def uniform_idle_share(state, members, i):
    """Default rule: uniform over idle members, else uniform over all."""
    idle = [m for m in members if state[m] == 0]
    pool = idle if idle else list(members)
    return 1.0 / len(pool) if i in pool else 0.0


def brute_generator(lam_primary, overlaps, mu, K, share=uniform_idle_share):
    """Dense reflecting generator from first principles."""
    I = len(mu)
    states = brute_states(I, K)
    pos = {s: u for u, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for u, s in enumerate(states):
        for i in range(I):
            rate = lam_primary[i]
            for members, lam_e in overlaps:
                if i in members:
                    rate += share(s, members, i) * lam_e
            up = list(s)
            up[i] += 1
            v = pos.get(tuple(up))
            if v is not None and rate > 0:
                Q[u, v] += rate
            if s[i] > 0:
                dn = list(s)
                dn[i] -= 1
                Q[u, pos[tuple(dn)]] += mu[i]
        Q[u, u] = -Q[u].sum()
    return states, Q


def gth(Q):
    """Grassmann-Taksar-Heyman stationary vector of an irreducible generator."""
    A = np.array(Q, dtype=float)
    n = A.shape[0]
    np.fill_diagonal(A, 0.0)
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        x[k] = x[:k] @ A[:k, k]
    return x / x.sum()


def mm1_geometric(rho, K):
    k = np.arange(K + 1)
    return (1 - rho) * rho**k


def product_form(rhos, states):
    return np.array([np.prod([(1 - r) * r**n for r, n in zip(rhos, s)]) for s in states])


def exact_level_probs(I, lam, mu, K):
    """Level law from exact rational products of the raw birth/death rates."""
    from math import comb

    lam, mu = Fraction(lam), Fraction(mu)
    terms = [Fraction(1)]
    for k in range(1, 400):
        terms.append(terms[-1] * comb(k - 1 + I - 1, I - 1) * lam / (comb(k + I - 2, I - 1) * mu))
    total = sum(terms)
    return [float(t / total) for t in terms[: K + 1]]

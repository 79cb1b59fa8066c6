import numpy as np
import pytest

from hyperlattice.aggregate import (
    AggregateModel,
    aggregate_distribution,
    aggregate_distribution_literal,
    aggregate_table,
    birth_rate,
    death_rate,
    truncation_mass,
)
from hyperlattice.errors import NonErgodic
from oracles import exact_level_probs


@pytest.mark.parametrize("I", [1, 2, 3, 4])
@pytest.mark.parametrize("rho", [0.1, 0.5, 0.9])
def test_closed_form_vs_literal(I, rho):
    m = AggregateModel(I, rho * 2.0, 2.0)
    closed = aggregate_distribution(m, 50)
    lit = aggregate_distribution_literal(m, 50)
    assert np.abs(closed - lit).max() < 1e-12
    assert np.abs(closed - (1 - rho) * rho ** np.arange(51)).max() < 1e-15


def test_literal_against_rational_oracle():
    ref = exact_level_probs(3, 0.6, 1.0, 10)
    got = aggregate_distribution_literal(AggregateModel(3, 0.6, 1.0), 10)
    assert np.allclose(got, ref, rtol=1e-13, atol=0)


def test_truncation_mass():
    for rho in (0.1, 0.5, 0.9):
        m = AggregateModel(2, rho, 1.0)
        for K in (0, 5, 20):
            assert abs(truncation_mass(m, K) - (1 - rho ** (K + 1))) < 1e-12
            assert abs(truncation_mass(m, K) - aggregate_distribution(m, K).sum()) < 1e-12
    assert truncation_mass(AggregateModel(2, 0.0, 1.0), 3) == 1.0


def test_rates():
    m = AggregateModel(3, 0.5, 2.0)
    assert birth_rate(m, 0) == 0.5
    assert birth_rate(m, 2) == 6 * 0.5
    assert death_rate(m, 1) == 2.0
    assert death_rate(m, 3) == 6 * 2.0
    with pytest.raises(ValueError):
        death_rate(m, 0)


def test_non_ergodic():
    m = AggregateModel(2, 3.0, 2.0)
    with pytest.raises(NonErgodic):
        aggregate_distribution(m, 3)
    rows = aggregate_table(m, 3)
    assert rows[0]["prob"] is None and rows[2]["level_size"] == 3


def test_zero_arrivals():
    m = AggregateModel(2, 0.0, 1.0)
    assert aggregate_distribution_literal(m, 3).tolist() == [1.0, 0.0, 0.0, 0.0]

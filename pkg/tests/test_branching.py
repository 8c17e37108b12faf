import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branching_volterra.branching import (
    BranchingLaw,
    OffspringDistribution,
    estimate_F,
    expected_count,
    sample_lifetime,
    sample_offspring,
    second_moment_count,
)
from branching_volterra.kernels import UnsupportedRegimeError
from branching_volterra.particles import grow_tree

ALWAYS_TWO = BranchingLaw(OffspringDistribution.deterministic(2), 1.0)


def test_branching_factor():
    assert ALWAYS_TWO.beta == 1.0
    assert BranchingLaw(OffspringDistribution.binary(0.0, 1.0), 1.0).beta == 1.0
    assert BranchingLaw(OffspringDistribution.deterministic(1), 3.0).beta == 0.0
    assert BranchingLaw(OffspringDistribution.poisson(2.0), 0.7).beta == pytest.approx(0.7)


def test_expected_count_examples():
    assert expected_count(ALWAYS_TWO, 1.0, 0.0) == pytest.approx(math.e)
    assert expected_count(ALWAYS_TWO, 2.0, 2.0) == 1.0
    single = BranchingLaw(OffspringDistribution.deterministic(1), 1.0)
    assert expected_count(single, 7.0) == 1.0
    with pytest.raises(ValueError):
        expected_count(ALWAYS_TWO, 1.0, 2.0)


def test_second_moment_examples():
    # always-2: psi''(1) = 2, beta = 1: e + 2(e^2 - e) = 2e^2 - e
    assert second_moment_count(ALWAYS_TWO, 1.0) == pytest.approx(2 * math.e**2 - math.e)
    assert second_moment_count(ALWAYS_TWO, 3.0, 3.0) == 1.0
    single = BranchingLaw(OffspringDistribution.deterministic(1), 1.0)
    assert second_moment_count(single, 5.0) == 1.0  # critical branch, psi'' = 0
    crit = BranchingLaw(OffspringDistribution.binary(0.5, 0.5), 2.0)
    assert crit.beta == 0.0
    assert second_moment_count(crit, 3.0) == pytest.approx(1.0 + 1.0 * 2.0 * 3.0)
    sub = BranchingLaw(OffspringDistribution.from_table([0.6, 0.4]), 1.0)
    with pytest.raises(UnsupportedRegimeError):
        second_moment_count(sub, 1.0)


def test_distribution_validation():
    with pytest.raises(ValueError):
        OffspringDistribution.binary(0.3, 0.5)
    with pytest.raises(ValueError):
        OffspringDistribution.geometric(1.0)
    with pytest.raises(ValueError):
        OffspringDistribution.from_table([0.5, 0.6])
    with pytest.raises(ValueError):
        BranchingLaw(OffspringDistribution.poisson(1.0), 0.0)


def test_pgf_derivatives_closed_form():
    geo = OffspringDistribution.geometric(0.4)
    assert geo.psi_prime1 == pytest.approx(0.4 / 0.6)
    assert geo.psi_double_prime1 == pytest.approx(2 * 0.4**2 / 0.6**2)
    poi = OffspringDistribution.poisson(2.0)
    assert (poi.psi_prime1, poi.psi_double_prime1) == (2.0, 4.0)
    tab = OffspringDistribution.from_table([0.1, 0.2, 0.3, 0.4])
    assert tab.psi_prime1 == pytest.approx(0.2 + 0.6 + 1.2)
    assert tab.psi_double_prime1 == pytest.approx(2 * 0.3 + 6 * 0.4)


@given(
    probs=st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6),
    s=st.floats(min_value=0.0, max_value=1.0),
)
@settings(max_examples=30, deadline=None)
def test_pgf_matches_table_sum(probs, s):
    probs = [p / sum(probs) for p in probs]
    dist = OffspringDistribution.from_table(probs)
    assert dist.pgf(s) == pytest.approx(sum(p * s**k for k, p in enumerate(probs)), rel=1e-12)


def test_sampling_deterministic_and_absorbing():
    rng = np.random.default_rng(1)
    assert sample_offspring(OffspringDistribution.deterministic(2), rng) == 2
    draws = sample_offspring(OffspringDistribution.from_table([1.0]), rng, size=100)
    assert np.all(draws == 0)


def test_sampling_moments_match_pgf_derivatives():
    rng = np.random.default_rng(7)
    n = 1_000_000
    for dist in (
        OffspringDistribution.binary(0.25, 0.75),
        OffspringDistribution.geometric(0.4),
        OffspringDistribution.poisson(2.0),
        OffspringDistribution.from_table([0.2, 0.3, 0.1, 0.4]),
    ):
        draws = sample_offspring(dist, rng, size=n).astype(float)
        se_mean = draws.std(ddof=1) / math.sqrt(n)
        assert abs(draws.mean() - dist.psi_prime1) < 3 * se_mean
        fact = draws * (draws - 1.0)
        se_fact = fact.std(ddof=1) / math.sqrt(n)
        assert abs(fact.mean() - dist.psi_double_prime1) < 3 * se_fact
        # empirical pgf at 1/2 against the closed form
        emp = (0.5**draws).mean()
        se_pgf = (0.5**draws).std(ddof=1) / math.sqrt(n)
        assert abs(emp - dist.pgf(0.5)) < 3 * se_pgf


def test_lifetime_sampling():
    rng = np.random.default_rng(11)
    law = BranchingLaw(OffspringDistribution.deterministic(2), 2.0)
    draws = sample_lifetime(law, rng, size=1_000_000)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - 0.5) < 3 * se
    law1 = BranchingLaw(OffspringDistribution.deterministic(2), 1.0)
    draws1 = sample_lifetime(law1, rng, size=1_000_000)
    frac = np.mean(draws1 > 1.0)
    se_frac = math.sqrt(frac * (1 - frac) / draws1.size)
    assert abs(frac - math.exp(-1.0)) < 3 * se_frac
    # inverse-CDF median
    assert np.median(draws1) == pytest.approx(math.log(2.0), abs=3e-3)


def test_estimate_F_edge_cases():
    est = estimate_F([(1.0, 4), (2.0, 0)], beta=1.0)
    assert est.value == 0.0
    est = estimate_F([(0.0, 1)], beta=1.0, r=0.0)
    assert est.value == 1.0
    assert np.allclose(est.martingale, [1.0])
    with pytest.raises(ValueError):
        estimate_F([], beta=1.0)
    with pytest.raises(ValueError):
        estimate_F([(1.0, 2)], beta=0.0)
    with pytest.raises(ValueError):
        estimate_F([(2.0, 1), (1.0, 2)], beta=1.0)


def test_estimate_F_martingale_mean():
    # replicate mean of the last-time martingale value is 1 within 3 se
    reps = 3000
    vals = np.empty(reps)
    for rep in range(reps):
        tree = grow_tree(ALWAYS_TWO, 0.0, 3.0, 0.5, 1, 17, rep)
        counts = [(t, tree.count_at(t)) for t in (1.0, 2.0, 3.0)]
        vals[rep] = estimate_F(counts, beta=1.0).value
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - 1.0) < 3 * se

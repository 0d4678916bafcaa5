"""Production pipeline against the brute-force oracles.

The oracles in gldx.oracles enumerate the same grids with plain loops
and no refinement, caching, chunking, or vectorized shortcuts; on any
shared configuration the unrefined production value must agree to
roundoff, and refinement must only ever lower it.
"""

import math

import numpy as np
import pytest

from conftest import random_channel
from gldx import (
    Distribution,
    ExponentQuery,
    GridSpec,
    JointDistribution,
    expurgated_exponent,
    matched_metric,
    maxmin_exponent,
    mismatched_metric,
    pairwise_confusion_exponent,
)
from gldx.oracles import naive_confusion, naive_expurgated, naive_maxmin, naive_score_floor
from gldx import competitor_score_exponent


def test_score_floor_matches_oracle(bsc, unif2):
    m = matched_metric(bsc)
    rng = np.random.default_rng(101)
    for _ in range(6):
        qy = Distribution(rng.dirichlet(np.ones(2)))
        rate = float(rng.uniform(0.05, 0.5))
        got = competitor_score_exponent(rate, qy, bsc, m, 8)
        want = naive_score_floor(rate, qy.p, m, 8)
        assert got == pytest.approx(want, abs=1e-12)


def test_confusion_matches_oracle(bsc):
    m = matched_metric(bsc)
    rng = np.random.default_rng(103)
    for _ in range(4):
        raw = rng.random((2, 2)) + 0.05
        raw = raw + raw.T  # symmetric, so both marginals agree exactly
        coupling = JointDistribution(raw / raw.sum())
        got = pairwise_confusion_exponent(coupling, 0.25, bsc, m, GridSpec(6, refine=False))
        want = naive_confusion(coupling.p, 0.25, bsc, m, 6)
        assert got == pytest.approx(want, abs=1e-10)


def test_expurgated_matches_oracle_random_instances(unif2):
    rng = np.random.default_rng(37)
    worst = 0.0
    for _ in range(5):
        ch = random_channel(rng, 2, 2)
        beta = float(rng.uniform(0.5, 2.0))
        m = matched_metric(ch, beta=beta)
        rate = float(rng.uniform(0.05, 0.4))
        query = ExponentQuery(rate, unif2, ch, m)
        raw = expurgated_exponent(query, GridSpec(6, refine=False))
        want = naive_expurgated(rate, unif2, ch, m, 6, 6)
        worst = max(worst, abs(raw.value - want))
        refined = expurgated_exponent(query, GridSpec(6))
        assert refined.value <= raw.value + 1e-12
    assert worst <= 1e-9


def test_expurgated_matches_oracle_mismatched(bsc, unif2):
    m = mismatched_metric([[0.8, 0.2], [0.3, 0.7]])
    query = ExponentQuery(0.2, unif2, bsc, m)
    raw = expurgated_exponent(query, GridSpec(6, refine=False))
    want = naive_expurgated(0.2, unif2, bsc, m, 6, 6)
    assert raw.value == pytest.approx(want, abs=1e-10)


def test_maxmin_matches_dense_rho_oracle(bsc, unif2):
    m = matched_metric(bsc)
    query = ExponentQuery(0.15, unif2, bsc, m)
    raw = maxmin_exponent(query, GridSpec(6, refine=False))
    # dense rho sweep over the same table scan; golden-section must not
    # lose more than the sweep spacing allows
    want = naive_maxmin(0.15, unif2, bsc, m, 6, 6, rho_points=4001)
    assert raw.value >= want - 1e-9
    assert abs(raw.value - want) <= 1e-6

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import gini_pairs, ols_lstsq, window_means
from repmarket.core import GlobalParams
from repmarket.market import World, replay_ledger
from repmarket.metrics import (aggregate, gini, pq_regression, provider_revenue_per_trade, scenario_report,
                               series_20, success_rate)

P = GlobalParams()


def test_gini_examples():
    assert gini([3.0, 3.0, 3.0]) == 0.0
    assert gini([1.0, 0.0, 0.0, 0.0]) == pytest.approx(0.75, abs=1e-12)
    assert gini([0.0, 0.0]) == 0.0


@pytest.mark.parametrize("bad", [[], [1.0, -0.5]])
def test_gini_rejects_invalid_input(bad):
    with pytest.raises(ValueError):
        gini(bad)


@pytest.mark.parametrize("seed", range(100))
def test_gini_matches_pairwise_sum(seed):
    rng = np.random.default_rng(seed)
    x = rng.exponential(size=rng.integers(1, 60)) * rng.integers(0, 2, size=1)
    assert gini(x) == pytest.approx(gini_pairs(x), abs=1e-12)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50), st.floats(1e-3, 1e3))
def test_gini_scale_invariant_and_bounded(x, c):
    g = gini(x)
    assert 0.0 <= g <= 1.0
    assert gini(np.asarray(x) * c) == pytest.approx(g, abs=1e-9)


def test_success_rate_examples():
    assert success_rate(0, 10, 10) == 0.0
    assert success_rate(120 * 7, 7, 120) == 1.0
    assert success_rate(120, 2, 120) == 0.5


def test_regression_examples():
    assert pq_regression([0.0, 1.0], [0.0, 1.0]) == pytest.approx((1.0, 0.0), abs=1e-12)
    assert pq_regression([0.1, 0.5, 0.9], [40.0, 40.0, 40.0])[0] == pytest.approx(0.0, abs=1e-12)
    slope, intercept = pq_regression([0.3, 0.3], [1.0, 2.0])
    assert math.isnan(slope) and math.isnan(intercept)


@pytest.mark.parametrize("seed", range(100))
def test_regression_matches_least_squares(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(2, 200)
    x = rng.random(n)
    y = 30 + 60 * x + rng.normal(0, 5, size=n)
    slope, intercept = pq_regression(x, y)
    ref = ols_lstsq(x, y)
    assert slope == pytest.approx(ref[0], abs=1e-9)
    assert intercept == pytest.approx(ref[1], abs=1e-9)
    shifted = pq_regression(x, y + 17.0)
    assert shifted[0] == pytest.approx(slope, abs=1e-9)
    assert shifted[1] == pytest.approx(intercept + 17.0, abs=1e-9)


def test_series_examples():
    assert np.allclose(series_20(np.full(45, 2.5)), 2.5)
    assert series_20(np.arange(120.0)).size == 6
    # the final partial window averages over its own length
    assert series_20(np.arange(25.0))[-1] == pytest.approx(np.mean(np.arange(20.0, 25.0)))


@pytest.mark.parametrize("seed", range(100))
def test_series_matches_slicing(seed):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=rng.integers(1, 130))
    assert np.allclose(series_20(values), window_means(values), atol=1e-12, rtol=0)


def test_provider_revenue_forms():
    price, cost = np.array([100.0, 20.0]), np.array([50.0, 30.0])
    net = provider_revenue_per_trade(price, cost, np.array([1, 0]), P)
    assert net.tolist() == pytest.approx([44.0, 0.0])
    gross = provider_revenue_per_trade(price, cost, np.array([1, 0]), P.replace(gross_provider_revenue=True))
    assert gross.tolist() == [100.0, 20.0]


@pytest.fixture(scope="module")
def small_run():
    params = GlobalParams(n_providers=100, n_buyers=120, n_steps=30)
    world = World(params, "peertrust", seed=5).run()
    return world, scenario_report(world.log, world.ledger, params, world.step, "peertrust", 5)


def test_report_indicators(small_run):
    world, report = small_run
    log = world.log
    assert 0.0 <= report.success_rate <= 1.0
    assert 0.0 <= report.gini <= 1.0
    assert 0.0 <= report.avg_quality <= 1.0
    assert report.avg_quality == pytest.approx(log.quality.mean(axis=1).mean())
    assert report.mean_price == pytest.approx(log.price.mean())
    assert report.platform_revenue == pytest.approx(2 * 0.1 * log.price.sum())
    assert report.series_quality.size == 2 and report.series_revenue.size == 2


def test_welfare_equals_ledger_replay_total(small_run):
    world, report = small_run
    replay = replay_ledger(world.log, world.params, world.step)
    total = replay.provider_revenue.sum() + replay.marketplace_revenue + replay.operator_revenue
    assert report.welfare == total


def test_report_text_lists_headline_indicators(small_run):
    text = small_run[1].to_text()
    for key in ("welfare", "avg_quality", "success_rate", "mean_price", "platform_revenue", "gini", "pq_slope"):
        assert f"{key} = " in text


def test_empty_run_report():
    params = GlobalParams(n_providers=5, n_buyers=5, n_steps=0)
    world = World(params, "timedecay", seed=0).run()
    report = scenario_report(world.log, world.ledger, params, 0)
    assert report.success_rate == 0.0 and report.n_transactions == 0
    assert math.isnan(report.mean_price)


def test_aggregate_mean_and_std(small_run):
    report = small_run[1]
    agg = aggregate([report, report])
    assert agg["welfare"] == (pytest.approx(report.welfare), 0.0)

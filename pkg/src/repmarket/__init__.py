"""Agent-based simulation of a data marketplace with pluggable reputation engines.

Typical use::

    from repmarket import GlobalParams, World, scenario_report

    params = GlobalParams(n_providers=200, n_buyers=200, n_steps=24)
    world = World(params, "betapt", seed=0).run()
    report = scenario_report(world.log, world.ledger, params, world.step, "betapt", 0)
"""

from .agents import QTable, buyer_utility, provider_reward, q_update, select_action
from .core import (BUYER_STRATEGIES, PROVIDER_STRATEGIES, BuyerKind, BuyerStrategy, GlobalParams, Offer,
                   ProviderKind, ProviderStrategy, QualityVector, Transaction, compute_cost, sample_offer)
from .irl import IrlModel, derive_lou, irl_fit, normalize_weights, soft_value_iteration
from .market import Ledger, TransactionLog, World, annual_transfer, replay_ledger, run_step
from .metrics import ScenarioReport, gini, pq_regression, scenario_report, series_20, success_rate
from .reputation import ENGINE_NAMES, make_engine, make_review
from .runner import ScenarioConfig, compare, run_all, run_scenario

__all__ = [
    "BUYER_STRATEGIES", "ENGINE_NAMES", "PROVIDER_STRATEGIES", "BuyerKind", "BuyerStrategy", "GlobalParams",
    "IrlModel", "Ledger", "Offer", "ProviderKind", "ProviderStrategy", "QTable", "QualityVector",
    "ScenarioConfig", "ScenarioReport", "Transaction", "TransactionLog", "World", "annual_transfer",
    "buyer_utility", "compare", "compute_cost", "derive_lou", "gini", "irl_fit", "make_engine", "make_review",
    "normalize_weights", "pq_regression", "provider_reward", "q_update", "replay_ledger", "run_all",
    "run_scenario", "run_step", "sample_offer", "scenario_report", "select_action", "series_20",
    "soft_value_iteration", "success_rate",
]

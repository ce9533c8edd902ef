"""Provider and buyer decision making: tabular Q-learning, rewards, utility."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BUYER_WEIGHTS, BuyerStrategy, GlobalParams, Offer, Transaction

N_PROVIDER_ACTIONS = 4
N_BUYER_ACTIONS = 3


@dataclass
class QTable:
    """Q-values of a single agent with epsilon-greedy exploration."""

    n_states: int
    n_actions: int
    learning_rate: float = 0.15
    discount: float = 0.92
    exploration_rate: float = 1.0
    exploration_decay: float = 0.995
    exploration_min: float = 0.05
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((self.n_states, self.n_actions))

    def update(self, s: int, a: int, r: float, s_next: int) -> "QTable":
        target = r + self.discount * self.values[s_next].max()
        self.values[s, a] += self.learning_rate * (target - self.values[s, a])
        return self

    def select_action(self, s: int, rng: np.random.Generator) -> int:
        if rng.random() < self.exploration_rate:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(self.values[s]))

    def decay(self) -> float:
        self.exploration_rate = max(self.exploration_min, self.exploration_rate * self.exploration_decay)
        return self.exploration_rate


def q_update(table: QTable, s: int, a: int, r: float, s_next: int) -> QTable:
    return table.update(s, a, r, s_next)


def select_action(table: QTable, s: int, rng: np.random.Generator) -> int:
    return table.select_action(s, rng)


class QPopulation:
    """One Q-table per agent, stored as an ``(n_agents, n_states, n_actions)`` array.

    Behaves exactly like ``n_agents`` independent :class:`QTable` objects but
    selects and updates every agent in one vectorised call.
    """

    def __init__(self, n_agents: int, n_states: int, n_actions: int, params: GlobalParams):
        self.values = np.zeros((n_agents, n_states, n_actions))
        self.learning_rate = params.alpha
        self.discount = params.beta
        self.exploration_rate = np.full(n_agents, params.exploration_start)
        self.exploration_decay = params.exploration_decay
        self.exploration_min = params.exploration_min
        self._rows = np.arange(n_agents)

    @property
    def n_agents(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[2]

    def select(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        explore = rng.random(self.n_agents) < self.exploration_rate
        random_actions = rng.integers(self.n_actions, size=self.n_agents)
        greedy = np.argmax(self.values[self._rows, states], axis=1)
        return np.where(explore, random_actions, greedy)

    def update(self, states, actions, rewards, next_states) -> None:
        rows = self._rows
        best_next = self.values[rows, next_states].max(axis=1)
        current = self.values[rows, states, actions]
        self.values[rows, states, actions] = current + self.learning_rate * (
            rewards + self.discount * best_next - current)

    def decay(self) -> None:
        np.maximum(self.exploration_min, self.exploration_rate * self.exploration_decay,
                   out=self.exploration_rate)


# -- state discretisation ---------------------------------------------------

def uniform_bucket(x, n_buckets: int, upper: float = 1.0):
    """Map values in ``[0, upper]`` to ``n_buckets`` equal bins; ``upper`` lands in the last."""
    scaled = np.clip(np.asarray(x, dtype=float) / upper, 0.0, 1.0)
    return np.minimum((scaled * n_buckets).astype(np.int64), n_buckets - 1)


def log_bucket(x, running_max: float, n_buckets: int):
    """Logarithmic bins over ``[0, running_max]`` via ``log1p`` scaling."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    if running_max <= 0.0:
        return np.zeros(x.shape, dtype=np.int64)
    with np.errstate(over="ignore"):
        scaled = np.log1p(x) / np.log1p(running_max)
    return uniform_bucket(scaled, n_buckets)


def discretize_provider_state(profit, reputation, running_max: float, params: GlobalParams):
    pb = log_bucket(profit, running_max, params.profit_buckets)
    rb = uniform_bucket(reputation, params.reputation_buckets)
    return pb * params.reputation_buckets + rb


def discretize_buyer_state(success_rate, avg_utility, params: GlobalParams):
    sb = uniform_bucket(success_rate, params.success_buckets)
    ub = uniform_bucket(np.clip(avg_utility, 0.0, params.utility_cap), params.utility_buckets,
                        upper=params.utility_cap)
    return sb * params.utility_buckets + ub


def n_provider_states(params: GlobalParams) -> int:
    return params.profit_buckets * params.reputation_buckets


def n_buyer_states(params: GlobalParams) -> int:
    return params.success_buckets * params.utility_buckets


# -- utility and reward ------------------------------------------------------

def utility_terms(quality, price, weights, params: GlobalParams):
    """Quality aggregate and price term of the buyer utility, broadcasting over offers.

    ``weights`` holds six-component strategy weight rows ``[acc, fresh, cov, comp, rep, price]``.
    """
    weights = np.asarray(weights, dtype=float)
    qw = weights[..., :4]
    q_agg = np.sum(np.asarray(quality) * qw, axis=-1) / qw.sum(axis=-1)
    price = np.asarray(price, dtype=float)
    if params.literal_price_term:
        price_term = price
    else:
        price_term = 1.0 - price / params.price_ref
    if params.strategy_scaled_terms:
        price_term = price_term * weights[..., 5]
    return q_agg, price_term


def utility_matrix(quality, price, reputation, weights, params: GlobalParams, blind: bool = False):
    q_agg, price_term = utility_terms(quality, price, weights, params)
    utility = params.l * q_agg + params.u * price_term
    if not blind:
        rep = np.asarray(reputation, dtype=float)
        if params.strategy_scaled_terms:
            rep = rep * np.asarray(weights, dtype=float)[..., 4]
        utility = utility + params.o * rep
    return utility


def buyer_utility(offer: Offer, rep_before: float, strategy: BuyerStrategy, params: GlobalParams,
                  blind: bool = False) -> float:
    if not 0.0 <= rep_before <= 1.0:
        raise ValueError(f"reputation must lie in [0, 1], got {rep_before}")
    return float(utility_matrix(offer.quality.as_array(), offer.price, rep_before,
                                np.asarray(strategy.weights), params, blind=blind))


def provider_reward_terms(price, cost, refund, utility, rep_before, params: GlobalParams):
    """Vectorised provider reward for arrays of trades."""
    price = np.asarray(price, dtype=float)
    fee = params.fee_rate * price
    refund_rate = np.where(np.asarray(refund, dtype=bool), params.rebate_rate, 0.0)
    profit = np.maximum(0.0, price - np.asarray(cost) - fee) * (1.0 + refund_rate)
    utility = np.asarray(utility, dtype=float)
    return profit + params.h * utility + params.k * np.maximum(0.0, utility - np.asarray(rep_before))


def provider_reward(tx: Transaction, rep_before: float, params: GlobalParams) -> float:
    return float(provider_reward_terms(tx.price, tx.cost, tx.refund_applied, tx.buyer_utility,
                                       rep_before, params))


def buyer_weights(actions) -> np.ndarray:
    return BUYER_WEIGHTS[np.asarray(actions)]

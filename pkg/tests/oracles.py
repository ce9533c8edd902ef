"""Independent reference implementations used to check the production code.

Each oracle takes a different computational route from the code it checks:
double sums instead of sorted ranks, dense eigen-solves instead of sparse
power iteration, Monte-Carlo rollouts instead of occupancy propagation.
"""

from __future__ import annotations

import numpy as np


def gini_pairs(x) -> float:
    x = [float(v) for v in x]
    n, total = len(x), sum(x)
    if total == 0:
        return 0.0
    return sum(abs(a - b) for a in x for b in x) / (2 * n * total)


def ols_lstsq(x, y) -> tuple[float, float]:
    design = np.column_stack([x, np.ones(len(x))])
    (slope, intercept), *_ = np.linalg.lstsq(design, np.asarray(y, dtype=float), rcond=None)
    return float(slope), float(intercept)


def window_means(values, window: int = 20) -> list[float]:
    values = list(values)
    out = []
    for start in range(0, len(values), window):
        chunk = values[start:start + window]
        out.append(sum(chunk) / len(chunk))
    return out


def pagerank_dense(n_nodes: int, src, dst, weight, zeta: float = 0.85) -> np.ndarray:
    """Stationary vector of the damped chain from a dense eigen-decomposition."""
    S = np.zeros((n_nodes, n_nodes))
    for i, j, w in zip(src, dst, weight):
        S[i, j] += w
    out = S.sum(axis=1)
    for i in range(n_nodes):
        S[i] = S[i] / out[i] if out[i] > 0 else 1.0 / n_nodes
    G = zeta * S + (1.0 - zeta) / n_nodes
    vals, vecs = np.linalg.eig(G.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()


def rollout_feature_expectations(model, policy, lengths, n_rollouts: int, rng) -> np.ndarray:
    """Monte-Carlo estimate of discounted feature counts.

    Rollouts are split evenly over ``lengths`` (one stratum per observed trace
    length) and draw their actions from ``policy``; the count state advances
    by one per action.
    """
    phi = model.features()
    lengths = np.asarray(lengths)
    horizon = np.repeat(lengths, n_rollouts // lengths.size)
    n_rollouts = horizon.size
    total = np.zeros(model.n_features)
    count = np.zeros(n_rollouts, dtype=np.int64)
    for t in range(int(horizon.max())):
        alive = horizon > t
        s = np.minimum(count[alive], model.cap)
        cdf = np.cumsum(policy[s], axis=1)
        a = (rng.random(s.size)[:, None] > cdf).sum(axis=1)
        a = np.minimum(a, model.n_actions - 1)
        total += model.delta ** t * phi[s, a].sum(axis=0)
        count[alive] += 1
    return total / n_rollouts


def settle_by_hand(trades, fee_rate: float = 0.10, share: float = 0.10, n_steps: int | None = None):
    """Plain-loop account balances from ``(step, price, cost, rebate)`` tuples."""
    acct = {"buyers": 0.0, "providers": 0.0, "marketplace": 0.0, "operator": 0.0, "production": 0.0}
    fees_by_step = {}
    for step, price, cost, rebate in trades:
        fee = fee_rate * price
        acct["buyers"] -= price + fee
        acct["providers"] += price - fee - cost + (fee if rebate else 0.0)
        acct["production"] += cost
        acct["marketplace"] += 2 * fee
        acct["operator"] -= fee if rebate else 0.0
        fees_by_step[step] = fees_by_step.get(step, 0.0) + 2 * fee
    last = n_steps if n_steps is not None else max(fees_by_step, default=0)
    for year_end in range(12, last + 1, 12):
        amount = share * sum(fees_by_step.get(t, 0.0) for t in range(year_end - 11, year_end + 1))
        acct["marketplace"] -= amount
        acct["operator"] += amount
    return acct

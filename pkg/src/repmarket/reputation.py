"""Reputation engines that fold buyer reviews into per-provider scores in [0, 1].

Two layers live here:

* scalar reference functions (``time_decay_score``, ``beta_score``, ...) that
  score one provider from its raw review list, and
* engine classes that keep incremental state and rescore every provider at
  once after each settlement phase.

The engines are what the market loop uses; the reference functions double
as brute-force oracles in the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import GlobalParams

ENGINE_NAMES = ("timedecay", "bayesbeta", "pagerank", "powertrust", "peertrust", "betapt", "blind")
REPUTATION_ENGINES = ENGINE_NAMES[:-1]


def make_review(utility, params: GlobalParams | None = None):
    params = params or GlobalParams()
    review = np.clip(params.v + params.y * np.asarray(utility, dtype=float), 0.0, 1.0)
    return float(review) if review.ndim == 0 else review


def decay_weights(ages, half_life: float = 25.0):
    # exp2 keeps the weight at exactly one half-life equal to 0.5
    return np.exp2(-np.asarray(ages, dtype=float) / half_life)


def _weighted_mean(weights, values, fallback_values=None):
    weights = np.asarray(weights, dtype=float)
    values = np.asarray(values, dtype=float)
    total = weights.sum()
    if total > 0:
        return float(np.dot(weights, values) / total)
    return float(np.mean(values if fallback_values is None else fallback_values))


# -- Time-decay ---------------------------------------------------------------

def time_decay_score(times, values, now, half_life: float = 25.0, cold_start: float = 0.5) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return cold_start
    w = decay_weights(now - np.asarray(times, dtype=float), half_life)
    return float(np.dot(w, values) / w.sum())


# -- Bayesian-beta -------------------------------------------------------------

def beta_counts(values, prior: float = 1.0) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return prior + values.sum(), prior + (1.0 - values).sum()


def beta_score(A, D):
    mean = A / (A + D)
    conf = (A + D) / (A + D + 2.0)
    return 0.5 * (mean + conf * mean + 0.5 * (1.0 - conf))


def beta_pt_confidence(A, D):
    return (A + D) / (A + D + 4.0)


# -- PageRank ------------------------------------------------------------------

def power_iteration(n_nodes: int, src, dst, weight, zeta: float = 0.85, tol: float = 1e-8,
                    max_iter: int = 200):
    """PageRank power iteration; returns ``(scores, iterations, converged)``.

    Out-edges of each node are normalised to shares of its total weight, and
    the mass of nodes without out-edges is spread uniformly, so the result is
    a probability vector.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.asarray(weight, dtype=float)
    out_total = np.bincount(src, weight, minlength=n_nodes)
    share = weight / out_total[src]
    # transposed transition matrix: column j holds j's outgoing shares
    transition_t = sp.csr_matrix((share, (dst, src)), shape=(n_nodes, n_nodes))
    dangling = out_total == 0
    x = np.full(n_nodes, 1.0 / n_nodes)
    teleport = (1.0 - zeta) / n_nodes
    for it in range(1, max_iter + 1):
        x_new = teleport + zeta * (transition_t @ x + x[dangling].sum() / n_nodes)
        change = np.abs(x_new - x).max()
        x = x_new
        if change < tol:
            return x, it, True
    return x, max_iter, False


def pagerank(n_nodes: int, src, dst, weight, zeta: float = 0.85, tol: float = 1e-8,
             max_iter: int = 200) -> np.ndarray:
    return power_iteration(n_nodes, src, dst, weight, zeta, tol, max_iter)[0]


def minmax(x, degenerate: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.full(x.shape, degenerate)
    return (x - lo) / (hi - lo)


class TxGraph:
    """Buyer -> provider transaction counts.

    Nodes are all providers plus every buyer that has bought at least once;
    providers occupy node ids ``0..n_providers-1``.
    """

    def __init__(self, n_providers: int, n_buyers: int):
        self.n_providers = n_providers
        self.n_buyers = n_buyers
        self.counts = sp.csr_matrix((n_buyers, n_providers), dtype=float)

    def add(self, buyers, providers) -> None:
        buyers = np.asarray(buyers, dtype=np.int64)
        providers = np.asarray(providers, dtype=np.int64)
        if buyers.size == 0:
            return
        batch = sp.csr_matrix((np.ones(buyers.size), (buyers, providers)),
                              shape=self.counts.shape)
        self.counts = self.counts + batch

    def edges(self):
        """Return ``(n_nodes, src, dst, count)`` in node-id space."""
        coo = self.counts.tocoo()
        active = np.flatnonzero(np.diff(self.counts.indptr))
        node_of_buyer = np.full(self.n_buyers, -1, dtype=np.int64)
        node_of_buyer[active] = self.n_providers + np.arange(active.size)
        return self.n_providers + active.size, node_of_buyer[coo.row], coo.col.astype(np.int64), coo.data


def pagerank_raw(graph: TxGraph, zeta: float = 0.85, tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    n_nodes, src, dst, count = graph.edges()
    return pagerank(n_nodes, src, dst, count, zeta, tol, max_iter)


def pagerank_scores(graph: TxGraph, zeta: float = 0.85, tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    raw = pagerank_raw(graph, zeta, tol, max_iter)
    return minmax(raw[:graph.n_providers])


# -- buyer trust -----------------------------------------------------------------

def buyer_trust(n_transactions, mean_quality, mean_review) -> np.ndarray:
    """Trust of each buyer from its purchase count, traded quality and reviews.

    Counts are rescaled by the population maximum before averaging with the
    two unit-interval terms; the average is min-max normalised over active
    buyers (a single distinct value maps to 1). Inactive buyers get 0.
    """
    n = np.asarray(n_transactions, dtype=float)
    active = n > 0
    trust = np.zeros(n.shape)
    if not active.any():
        return trust
    raw = (n[active] / n[active].max() + np.asarray(mean_quality)[active]
           + np.asarray(mean_review)[active]) / 3.0
    trust[active] = minmax(raw, degenerate=1.0)
    return trust


def power_node_mask(trust, active, fraction: float = 0.01) -> np.ndarray:
    """Top ``fraction`` of active buyers by trust (at least one, ties by buyer id)."""
    trust = np.asarray(trust, dtype=float)
    active_ids = np.flatnonzero(active)
    mask = np.zeros(trust.shape, dtype=bool)
    if active_ids.size == 0:
        return mask
    n_power = max(1, math.ceil(fraction * active_ids.size))
    order = np.argsort(-trust[active_ids], kind="stable")
    mask[active_ids[order[:n_power]]] = True
    return mask


# -- PowerTrust / PeerTrust / Beta-PT ------------------------------------------

def powertrust_weights(reviewer_trust):
    return 0.5 + 0.5 * np.asarray(reviewer_trust, dtype=float)


def powertrust_score(values, reviewer_trust, power_mask=None, power_nodes_only: bool = False,
                     cold_start: float = 0.5) -> float:
    """Reviews weighted by ``0.5 + 0.5 T``; power-node reviewers count with ``T = 1``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return cold_start
    trust = np.asarray(reviewer_trust, dtype=float)
    power = np.zeros(values.shape, dtype=bool) if power_mask is None else np.asarray(power_mask, dtype=bool)
    w = powertrust_weights(np.where(power, 1.0, trust))
    if power_nodes_only and power.any():
        return _weighted_mean(w[power], values[power])
    return _weighted_mean(w, values)


def peertrust_weights(values, reviewer_trust, tx_quality, times, now, half_life: float = 25.0):
    credibility = np.cbrt(np.asarray(values, dtype=float) * np.asarray(reviewer_trust, dtype=float)
                          * np.asarray(tx_quality, dtype=float))
    return decay_weights(now - np.asarray(times, dtype=float), half_life) * credibility


def peertrust_score(values, reviewer_trust, tx_quality, times, now, half_life: float = 25.0,
                    cold_start: float = 0.5) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return cold_start
    return _weighted_mean(peertrust_weights(values, reviewer_trust, tx_quality, times, now, half_life), values)


def anti_monopoly_factor(total_reviews, reviewer_reviews, w6=None, z: float = 0.35, literal: bool = False):
    """Cap on a reviewer's influence over one provider.

    Default form: ``min(1, z W / W_b)`` with ``W`` the provider's review total and
    ``W_b`` the reviewer's own count for that provider. ``literal=True`` divides by
    the review weight ``w6`` instead. Either way the factor is 1 when ``W`` or the
    denominator is 0.
    """
    W = np.asarray(total_reviews, dtype=float)
    denom = np.asarray(w6 if literal else reviewer_reviews, dtype=float)
    W, denom = np.broadcast_arrays(W, denom)
    out = np.ones(W.shape)
    ok = (W > 0) & (denom > 0)
    out[ok] = np.minimum(1.0, z * W[ok] / denom[ok])
    return out


def betapt_weights(values, reviewer_trust, tx_quality, times, now, reviewer_reviews,
                   half_life: float = 25.0, z: float = 0.35, literal: bool = False,
                   conf: float | None = None):
    values = np.asarray(values, dtype=float)
    if conf is None:
        A, D = beta_counts(values, prior=0.0)
        conf = beta_pt_confidence(A, D)
    w6 = (decay_weights(now - np.asarray(times, dtype=float), half_life)
          * np.asarray(reviewer_trust, dtype=float) * np.asarray(tx_quality, dtype=float) * conf)
    wz = anti_monopoly_factor(values.size, reviewer_reviews, w6, z, literal)
    return w6 * wz


def betapt_score(values, reviewer_trust, tx_quality, times, now, reviewer_reviews,
                 half_life: float = 25.0, z: float = 0.35, literal: bool = False,
                 conf: float | None = None, cold_start: float = 0.5) -> float:
    """Score one provider.

    ``reviewer_reviews[i]`` is how many reviews the author of review ``i`` has
    given this provider. ``conf`` defaults to the provider's own counters
    with no prior pseudo-counts.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return cold_start
    w = betapt_weights(values, reviewer_trust, tx_quality, times, now, reviewer_reviews,
                       half_life, z, literal, conf)
    return _weighted_mean(w, values)


def blind_score(provider=None) -> float:
    return 0.0


# -- engines -----------------------------------------------------------------

@dataclass
class ReviewBatch:
    """Reviews settled in one step, one entry per trade."""

    step: int
    provider: np.ndarray
    buyer: np.ndarray
    value: np.ndarray
    accuracy: np.ndarray
    compliance: np.ndarray

    def __len__(self):
        return self.provider.size

    @property
    def tx_quality(self) -> np.ndarray:
        return 0.5 * (self.accuracy + self.compliance)


class ReviewLog:
    """Append-only columnar store of every review seen so far."""

    _columns = (("step", np.int64), ("provider", np.int64), ("buyer", np.int64),
                ("value", float), ("tx_quality", float))

    def __init__(self, capacity: int = 1024):
        self._data = {name: np.empty(capacity, dtype) for name, dtype in self._columns}
        self.size = 0

    def append(self, batch: ReviewBatch) -> None:
        n = len(batch)
        if self.size + n > self._data["step"].size:
            new_cap = max(2 * self._data["step"].size, self.size + n)
            for name, arr in self._data.items():
                grown = np.empty(new_cap, arr.dtype)
                grown[:self.size] = arr[:self.size]
                self._data[name] = grown
        sl = slice(self.size, self.size + n)
        self._data["step"][sl] = batch.step
        self._data["provider"][sl] = batch.provider
        self._data["buyer"][sl] = batch.buyer
        self._data["value"][sl] = batch.value
        self._data["tx_quality"][sl] = batch.tx_quality
        self.size += n

    def __getattr__(self, name):
        data = self.__dict__.get("_data")
        if data is not None and name in data:
            return data[name][:self.size]
        raise AttributeError(name)


class BuyerStats:
    """Running per-buyer purchase count, traded-quality sum and review sum."""

    def __init__(self, n_buyers: int):
        self.count = np.zeros(n_buyers)
        self.quality_sum = np.zeros(n_buyers)
        self.review_sum = np.zeros(n_buyers)

    def add(self, batch: ReviewBatch) -> None:
        n = self.count.size
        self.count += np.bincount(batch.buyer, minlength=n)
        self.quality_sum += np.bincount(batch.buyer, batch.tx_quality, minlength=n)
        self.review_sum += np.bincount(batch.buyer, batch.value, minlength=n)

    def trust(self) -> np.ndarray:
        safe = np.maximum(self.count, 1.0)
        return buyer_trust(self.count, self.quality_sum / safe, self.review_sum / safe)


def grouped_weighted_mean(group, weights, values, n_groups: int, cold_start) -> np.ndarray:
    """Per-group ``sum(w v) / sum(w)``; plain mean if all weights vanish, ``cold_start`` if empty."""
    num = np.bincount(group, weights * values, minlength=n_groups)
    den = np.bincount(group, weights, minlength=n_groups)
    count = np.bincount(group, minlength=n_groups)
    plain = np.bincount(group, values, minlength=n_groups) / np.maximum(count, 1)
    out = np.broadcast_to(np.asarray(cold_start, dtype=float), (n_groups,)).copy()
    has = count > 0
    out[has] = plain[has]
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    return out


class ReputationEngine:
    """Common interface: feed one :class:`ReviewBatch` per step, read ``scores``.

    ``cold_start`` is the score of a provider with no reviews (a scalar or one
    value per provider). ``scores`` starts at ``initial`` if given.
    """

    name = "base"
    blind = False

    def __init__(self, n_providers: int, n_buyers: int, params: GlobalParams | None = None,
                 cold_start=0.5, initial=None):
        self.params = params or GlobalParams()
        self.n_providers = n_providers
        self.n_buyers = n_buyers
        self.cold_start = np.broadcast_to(np.asarray(cold_start, dtype=float), (n_providers,)).copy()
        self.scores = self.cold_start.copy() if initial is None else np.asarray(initial, dtype=float).copy()

    def update(self, batch: ReviewBatch, now: int) -> np.ndarray:
        self._ingest(batch, now)
        self.scores = self._compute(now)
        return self.scores

    def _ingest(self, batch: ReviewBatch, now: int) -> None:
        raise NotImplementedError

    def _compute(self, now: int) -> np.ndarray:
        raise NotImplementedError


class BlindEngine(ReputationEngine):
    name = "blind"
    blind = True

    def __init__(self, n_providers, n_buyers, params=None, cold_start=0.5, initial=None):
        super().__init__(n_providers, n_buyers, params, cold_start=0.0, initial=None)

    def _ingest(self, batch, now):
        pass

    def _compute(self, now):
        return np.zeros(self.n_providers)


class TimeDecayEngine(ReputationEngine):
    """Exponentially weighted review mean kept as two decayed running sums."""

    name = "timedecay"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.num = np.zeros(self.n_providers)
        self.den = np.zeros(self.n_providers)
        self.last = None

    def _ingest(self, batch, now):
        hl = self.params.half_life
        if self.last is not None:
            factor = decay_weights(now - self.last, hl)
            self.num *= factor
            self.den *= factor
        self.last = now
        w = decay_weights(now - np.asarray(batch.step, dtype=float), hl) * np.ones(len(batch))
        self.num += np.bincount(batch.provider, w * batch.value, minlength=self.n_providers)
        self.den += np.bincount(batch.provider, w, minlength=self.n_providers)

    def _compute(self, now):
        out = self.cold_start.copy()
        seen = self.den > 0
        # den and num decay together, so the ratio is already current
        out[seen] = self.num[seen] / self.den[seen]
        return out


class BayesBetaEngine(ReputationEngine):
    name = "bayesbeta"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.A = np.ones(self.n_providers)
        self.D = np.ones(self.n_providers)
        self.cold_start[:] = beta_score(1.0, 1.0)

    def _ingest(self, batch, now):
        self.A += np.bincount(batch.provider, batch.value, minlength=self.n_providers)
        self.D += np.bincount(batch.provider, 1.0 - batch.value, minlength=self.n_providers)

    def _compute(self, now):
        return beta_score(self.A, self.D)


class PageRankEngine(ReputationEngine):
    name = "pagerank"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.graph = TxGraph(self.n_providers, self.n_buyers)
        self.cold_start[:] = 0.0
        self.nonconverged = 0

    def _ingest(self, batch, now):
        self.graph.add(batch.buyer, batch.provider)

    def _compute(self, now):
        p = self.params
        raw, _, ok = power_iteration(*self.graph.edges(), p.zeta, p.pagerank_tol, p.pagerank_max_iter)
        self.nonconverged += not ok
        return minmax(raw[:self.n_providers])


class _LogEngine(ReputationEngine):
    """Engines that rescore from the full review history every step."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.log = ReviewLog()
        self.buyers = BuyerStats(self.n_buyers)

    def _ingest(self, batch, now):
        self.log.append(batch)
        self.buyers.add(batch)


class PowerTrustEngine(_LogEngine):
    name = "powertrust"

    def _compute(self, now):
        log, p = self.log, self.params
        trust = self.buyers.trust()
        power = power_node_mask(trust, self.buyers.count > 0, p.power_node_fraction)
        trust = np.where(power, 1.0, trust)
        w = powertrust_weights(trust[log.buyer])
        scores = grouped_weighted_mean(log.provider, w, log.value, self.n_providers, self.cold_start)
        if p.power_nodes_only:
            from_power = power[log.buyer]
            only = grouped_weighted_mean(log.provider[from_power], w[from_power], log.value[from_power],
                                         self.n_providers, np.nan)
            scores = np.where(np.isnan(only), scores, only)
        return scores


class PeerTrustEngine(_LogEngine):
    name = "peertrust"

    def _compute(self, now):
        log = self.log
        trust = self.buyers.trust()
        w = peertrust_weights(log.value, trust[log.buyer], log.tx_quality, log.step, now,
                              self.params.half_life)
        return grouped_weighted_mean(log.provider, w, log.value, self.n_providers, self.cold_start)


class BetaPTEngine(_LogEngine):
    """PeerTrust-style weights damped by provider confidence and a per-reviewer cap."""

    name = "betapt"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.pair_index: dict[int, int] = {}
        self.pair_counts = np.zeros(0)
        self.review_pair = np.zeros(0, dtype=np.int64)
        self.A = np.zeros(self.n_providers)
        self.D = np.zeros(self.n_providers)

    def _ingest(self, batch, now):
        super()._ingest(batch, now)
        self.A += np.bincount(batch.provider, batch.value, minlength=self.n_providers)
        self.D += np.bincount(batch.provider, 1.0 - batch.value, minlength=self.n_providers)
        keys = batch.buyer * self.n_providers + batch.provider
        idx = np.empty(keys.size, dtype=np.int64)
        for i, key in enumerate(keys.tolist()):
            j = self.pair_index.get(key)
            if j is None:
                j = self.pair_index[key] = len(self.pair_index)
            idx[i] = j
        if len(self.pair_index) > self.pair_counts.size:
            grown = np.zeros(max(2 * self.pair_counts.size, len(self.pair_index)))
            grown[:self.pair_counts.size] = self.pair_counts
            self.pair_counts = grown
        np.add.at(self.pair_counts, idx, 1.0)
        self.review_pair = np.concatenate([self.review_pair, idx])

    def _compute(self, now):
        log, p = self.log, self.params
        trust = self.buyers.trust()
        conf = beta_pt_confidence(self.A, self.D)
        prov = log.provider
        w6 = (decay_weights(now - log.step, p.half_life) * trust[log.buyer] * log.tx_quality * conf[prov])
        total = self.A + self.D
        wz = anti_monopoly_factor(total[prov], self.pair_counts[self.review_pair], w6,
                                  p.beta_pt_z, p.literal_eq29)
        return grouped_weighted_mean(prov, w6 * wz, log.value, self.n_providers, self.cold_start)


ENGINES = {cls.name: cls for cls in (TimeDecayEngine, BayesBetaEngine, PageRankEngine,
                                     PowerTrustEngine, PeerTrustEngine, BetaPTEngine, BlindEngine)}


def make_engine(name: str, n_providers: int, n_buyers: int, params: GlobalParams | None = None,
                cold_start=0.5, initial=None) -> ReputationEngine:
    try:
        cls = ENGINES[name]
    except KeyError:
        raise ValueError(f"unknown reputation engine {name!r}; choose from {', '.join(ENGINE_NAMES)}") from None
    return cls(n_providers, n_buyers, params, cold_start=cold_start, initial=initial)

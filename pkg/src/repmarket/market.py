"""The monthly trading loop: offers, purchases, settlement, reviews, learning."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import agents
from .core import BUYER_WEIGHTS, COMP, GlobalParams, sample_offers
from .reputation import ReviewBatch, make_engine, make_review

LOG_COLUMNS = ("step", "provider_id", "buyer_id", "price", "accuracy", "freshness", "coverage",
               "compliance", "cost", "fee", "rebate", "utility", "review", "score_before")
_INT_COLUMNS = {"step", "provider_id", "buyer_id", "rebate"}


class TransactionLog:
    """Columnar record of every completed trade, appended one step at a time."""

    def __init__(self):
        self._chunks: list[dict[str, np.ndarray]] = []
        self._cache: dict[str, np.ndarray] | None = None

    def append(self, **columns) -> None:
        self._chunks.append({name: np.asarray(columns[name]) for name in LOG_COLUMNS})
        self._cache = None

    def column(self, name: str) -> np.ndarray:
        if self._cache is None:
            if self._chunks:
                self._cache = {n: np.concatenate([c[n] for c in self._chunks]) for n in LOG_COLUMNS}
            else:
                self._cache = {n: np.zeros(0, dtype=np.int64 if n in _INT_COLUMNS else float)
                               for n in LOG_COLUMNS}
        return self._cache[name]

    def __getattr__(self, name):
        if name in LOG_COLUMNS:
            return self.column(name)
        raise AttributeError(name)

    def __len__(self):
        return sum(c["step"].size for c in self._chunks)

    @property
    def quality(self) -> np.ndarray:
        return np.column_stack([self.accuracy, self.freshness, self.coverage, self.compliance])

    def to_text(self) -> str:
        """Comma-separated text with a header row; floats carry 10 significant digits."""
        buf = io.StringIO()
        buf.write(",".join(LOG_COLUMNS) + "\n")
        if len(self):
            cols = [self.column(n) for n in LOG_COLUMNS]
            fmt = ",".join("%d" if n in _INT_COLUMNS else "%.10g" for n in LOG_COLUMNS)
            np.savetxt(buf, np.column_stack(cols), fmt=fmt)
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path: str | Path) -> "TransactionLog":
        log = cls()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size:
            log.append(**{n: (data[:, i].astype(np.int64) if n in _INT_COLUMNS else data[:, i])
                          for i, n in enumerate(LOG_COLUMNS)})
        return log


@dataclass
class Ledger:
    """Cash positions of every party.

    Buyers pay price plus fee, providers receive price minus fee (plus any
    rebate) and pay production cost to an outside sink, the marketplace keeps
    fees minus operator transfers, the operator keeps transfers minus rebates.
    The five balances always sum to zero.
    """

    n_providers: int
    n_buyers: int
    provider_revenue: np.ndarray = None
    buyer_spend: np.ndarray = None
    marketplace_revenue: float = 0.0
    operator_revenue: float = 0.0
    rebates_paid: float = 0.0
    fees_collected: float = 0.0
    transfers: float = 0.0
    production_costs: float = 0.0
    step_fees: list = field(default_factory=list)

    def __post_init__(self):
        if self.provider_revenue is None:
            self.provider_revenue = np.zeros(self.n_providers)
        if self.buyer_spend is None:
            self.buyer_spend = np.zeros(self.n_buyers)

    def settle(self, provider, buyer, price, cost, rebate, params: GlobalParams, posting_cost=None):
        """Book one step of trades; returns per-provider net cash for the step."""
        fee = params.fee_rate * price
        refund = np.where(rebate, fee, 0.0)
        per_tx = price - fee + refund
        if posting_cost is None:
            per_tx = per_tx - cost
        net = np.bincount(provider, per_tx, minlength=self.n_providers)
        step_cost = float(np.sum(cost)) if posting_cost is None else float(np.sum(posting_cost))
        if posting_cost is not None:
            net = net - posting_cost
        step_fees = float(np.sum(fee)) * 2.0
        step_refund = float(np.sum(refund))
        self.provider_revenue += net
        self.buyer_spend += np.bincount(buyer, price + fee, minlength=self.n_buyers)
        self.marketplace_revenue += step_fees
        self.fees_collected += step_fees
        self.operator_revenue -= step_refund
        self.rebates_paid += step_refund
        self.production_costs += step_cost
        self.step_fees.append(step_fees)
        return net

    def balances(self) -> dict[str, float]:
        return {
            "buyers": -float(self.buyer_spend.sum()),
            "providers": float(self.provider_revenue.sum()),
            "marketplace": self.marketplace_revenue,
            "operator": self.operator_revenue,
            "production": self.production_costs,
        }


def annual_transfer(ledger: Ledger, step: int, share: float = 0.10) -> float:
    """Move ``share`` of the marketplace's trailing-12-step fee income to the operator.

    ``step`` counts from 1; calls at steps not divisible by 12 do nothing.
    """
    if step <= 0 or step % 12:
        return 0.0
    window = ledger.step_fees[max(0, step - 12):step]
    amount = share * float(sum(window))
    ledger.marketplace_revenue -= amount
    ledger.operator_revenue += amount
    ledger.transfers += amount
    return amount


@dataclass
class StepReport:
    step: int
    n_transactions: int
    fees: float
    rebates: float
    transfer: float
    provider_net: float
    posted_quality: float
    balance_deltas: dict


class World:
    """One market: agent populations, reputation engine, ledger and log.

    Randomness comes from independent child streams of ``seed`` (initial
    reputations, provider exploration, offer draws, buyer exploration,
    candidate draws), so every engine starts from the same population.
    """

    def __init__(self, params: GlobalParams, engine: str, seed: int | None = None):
        self.params = p = params
        seed = p.rng_seed if seed is None else seed
        streams = np.random.SeedSequence(seed).spawn(5)
        self.rng_init, self.rng_provider, self.rng_offer, self.rng_buyer, self.rng_candidates = (
            np.random.default_rng(s) for s in streams)
        initial = np.clip(self.rng_init.normal(p.initial_reputation_mean, p.initial_reputation_std,
                                               p.n_providers), 0.0, 1.0)
        self.engine = make_engine(engine, p.n_providers, p.n_buyers, p, cold_start=initial, initial=initial)
        self.blind = self.engine.blind
        self.threshold = p.purchase_threshold - (p.blind_threshold_offset if self.blind else 0.0)
        self.providers = agents.QPopulation(p.n_providers, agents.n_provider_states(p),
                                            agents.N_PROVIDER_ACTIONS, p)
        self.buyers = agents.QPopulation(p.n_buyers, agents.n_buyer_states(p), agents.N_BUYER_ACTIONS, p)
        self.cumulative_profit = np.zeros(p.n_providers)
        self.running_max = 0.0
        self.success_hist = np.zeros((p.n_buyers, p.recent_window))
        self.utility_hist = np.zeros((p.n_buyers, p.recent_window))
        self.ledger = Ledger(p.n_providers, p.n_buyers)
        self.log = TransactionLog()
        self.reports: list[StepReport] = []
        self.step = 0

    @property
    def reputation(self) -> np.ndarray:
        return self.engine.scores

    def _buyer_observations(self):
        window = min(self.step, self.params.recent_window)
        if window == 0:
            return np.zeros(self.params.n_buyers), np.zeros(self.params.n_buyers)
        success = self.success_hist[:, :window].sum(axis=1)
        utility = self.utility_hist[:, :window].sum(axis=1)
        return success / window, np.where(success > 0, utility / np.maximum(success, 1), 0.0)

    def run_step(self) -> StepReport:
        p = self.params
        t = self.step + 1
        rep_before = self.engine.scores.copy()
        before = self.ledger.balances()

        # providers choose a strategy and post one offer each
        s_p = agents.discretize_provider_state(self.cumulative_profit, rep_before, self.running_max, p)
        a_p = self.providers.select(s_p, self.rng_provider)
        quality, price, cost = sample_offers(a_p, self.rng_offer, p)

        # buyers choose a strategy and pick the best of k sampled offers
        success, avg_u = self._buyer_observations()
        s_b = agents.discretize_buyer_state(success, avg_u, p)
        a_b = self.buyers.select(s_b, self.rng_buyer)
        n_b = p.n_buyers
        if p.n_providers and n_b:
            # candidates are drawn with replacement; a repeated offer is simply scored twice
            cand = self.rng_candidates.integers(p.n_providers, size=(n_b, p.k_candidates))
            weights = BUYER_WEIGHTS[a_b][:, None, :]
            utility = agents.utility_matrix(quality[cand], price[cand], rep_before[cand], weights, p,
                                            blind=self.blind)
            rows = np.arange(n_b)
            best = np.argmax(utility, axis=1)
            best_u = utility[rows, best]
            chosen = cand[rows, best]
            buys = best_u >= self.threshold
        else:
            best_u = np.zeros(n_b)
            chosen = np.zeros(n_b, dtype=np.int64)
            buys = np.zeros(n_b, dtype=bool)

        buyer_ids = np.flatnonzero(buys)
        prov = chosen[buyer_ids]
        u_tx = best_u[buyer_ids]
        p_tx = price[prov]
        c_tx = cost[prov]
        q_tx = quality[prov]
        rebate = q_tx[:, COMP] >= p.rebate_compliance_threshold

        # settlement
        net = self.ledger.settle(prov, buyer_ids, p_tx, c_tx, rebate, p,
                                 posting_cost=cost if p.cost_on_post else None)
        reviews = make_review(u_tx, p)
        if reviews.ndim == 0:
            reviews = np.atleast_1d(reviews)
        fee = p.fee_rate * p_tx
        self.log.append(step=np.full(prov.size, t), provider_id=prov, buyer_id=buyer_ids, price=p_tx,
                        accuracy=q_tx[:, 0], freshness=q_tx[:, 1], coverage=q_tx[:, 2],
                        compliance=q_tx[:, 3], cost=c_tx, fee=fee, rebate=rebate.astype(np.int64),
                        utility=u_tx, review=reviews, score_before=rep_before[prov])

        # reputation update
        batch = ReviewBatch(t, prov, buyer_ids, reviews, q_tx[:, 0], q_tx[:, COMP])
        rep_after = self.engine.update(batch, t)

        # learning
        r_tx = agents.provider_reward_terms(p_tx, c_tx, rebate, u_tx, rep_before[prov], p)
        r_p = np.bincount(prov, r_tx, minlength=p.n_providers)
        self.cumulative_profit += net
        if self.cumulative_profit.size:
            self.running_max = max(self.running_max, float(self.cumulative_profit.max()))
        s_p_next = agents.discretize_provider_state(self.cumulative_profit, rep_after, self.running_max, p)
        self.providers.update(s_p, a_p, r_p, s_p_next)

        r_b = np.where(buys, best_u, 0.0)
        slot = (t - 1) % p.recent_window
        self.success_hist[:, slot] = buys
        self.utility_hist[:, slot] = r_b
        self.step = t
        success, avg_u = self._buyer_observations()
        s_b_next = agents.discretize_buyer_state(success, avg_u, p)
        self.buyers.update(s_b, a_b, r_b, s_b_next)

        self.providers.decay()
        self.buyers.decay()
        transfer = annual_transfer(self.ledger, t, p.operator_share)

        after = self.ledger.balances()
        report = StepReport(
            step=t, n_transactions=int(prov.size), fees=float(2.0 * fee.sum()),
            rebates=float(np.where(rebate, fee, 0.0).sum()), transfer=transfer,
            provider_net=float(net.sum()),
            posted_quality=float(quality.mean()) if quality.size else float("nan"),
            balance_deltas={k: after[k] - before[k] for k in after})
        self.reports.append(report)
        return report

    def run(self, n_steps: int | None = None) -> "World":
        for _ in range(self.params.n_steps if n_steps is None else n_steps):
            self.run_step()
        return self


def run_step(world: World) -> StepReport:
    """Advance ``world`` by one step."""
    return world.run_step()


def replay_ledger(log: TransactionLog, params: GlobalParams, n_steps: int) -> Ledger:
    """Rebuild a :class:`Ledger` from a transaction log alone."""
    ledger = Ledger(params.n_providers, params.n_buyers)
    steps = log.step
    for t in range(1, n_steps + 1):
        sel = steps == t
        ledger.settle(log.provider_id[sel], log.buyer_id[sel], log.price[sel], log.cost[sel],
                      log.rebate[sel].astype(bool), params)
        annual_transfer(ledger, t, params.operator_share)
    return ledger

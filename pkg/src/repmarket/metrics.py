"""Market indicators computed from a finished run's transaction log and ledger."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import GlobalParams

HEADLINE = ("welfare", "avg_quality", "success_rate", "mean_price", "platform_revenue", "gini")
INDICATORS = HEADLINE + ("pq_slope", "pq_intercept")


def gini(values) -> float:
    """Gini coefficient ``sum |x_i - x_j| / (2 n sum x)`` via the sorted-rank identity."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("gini of an empty sequence")
    if x[0] < 0:
        raise ValueError("gini requires non-negative values")
    total = x.sum()
    if total == 0:
        return 0.0
    n = x.size
    ranks = np.arange(1, n + 1)
    return float(np.sum((2 * ranks - n - 1) * x) / (n * total))


def success_rate(n_transactions: int, n_buyers: int, n_steps: int) -> float:
    if n_buyers <= 0 or n_steps <= 0:
        return 0.0
    return n_transactions / (n_steps * n_buyers)


def pq_regression(quality, price) -> tuple[float, float]:
    """OLS of price on quality; ``(nan, nan)`` when quality has no spread."""
    x = np.asarray(quality, dtype=float)
    y = np.asarray(price, dtype=float)
    if x.size < 2:
        return math.nan, math.nan
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = np.dot(dx, dx)
    if sxx == 0:
        return math.nan, math.nan
    slope = float(np.dot(dx, y - ym) / sxx)
    return slope, float(ym - slope * xm)


def series_20(values, window: int = 20) -> np.ndarray:
    """Means of consecutive non-overlapping windows; the last may be shorter.

    NaN entries (steps without trades) are skipped within a window.
    """
    values = np.asarray(values, dtype=float)
    out = []
    for start in range(0, values.size, window):
        chunk = values[start:start + window]
        chunk = chunk[~np.isnan(chunk)]
        out.append(chunk.mean() if chunk.size else math.nan)
    return np.asarray(out)


def provider_revenue_per_trade(price, cost, rebate, params: GlobalParams) -> np.ndarray:
    """Revenue credited to a provider for each trade.

    Net profit as in the reward's profit term, ``max(0, p - C - F)(1 + F_r)``,
    or the sale price when ``params.gross_provider_revenue`` is set.
    """
    price = np.asarray(price, dtype=float)
    if params.gross_provider_revenue:
        return price.copy()
    refund_rate = np.where(np.asarray(rebate, dtype=bool), params.rebate_rate, 0.0)
    return np.maximum(0.0, price - np.asarray(cost) - params.fee_rate * price) * (1.0 + refund_rate)


@dataclass
class ScenarioReport:
    engine: str
    seed: int
    welfare: float
    avg_quality: float
    success_rate: float
    mean_price: float
    platform_revenue: float
    gini: float
    pq_slope: float
    pq_intercept: float
    n_transactions: int
    series_quality: np.ndarray = field(repr=False)
    series_revenue: np.ndarray = field(repr=False)

    def indicators(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in INDICATORS}

    def to_text(self) -> str:
        lines = [f"engine = {self.engine}", f"seed = {self.seed}", f"n_transactions = {self.n_transactions}"]
        lines += [f"{k} = {v!r}" for k, v in self.indicators().items()]
        return "\n".join(lines) + "\n"


def step_series(log, params: GlobalParams, n_steps: int, posted_quality=None):
    """Per-step average traded quality and mean provider revenue."""
    steps = log.step
    qmean = log.quality.mean(axis=1) if len(log) else np.zeros(0)
    revenue = provider_revenue_per_trade(log.price, log.cost, log.rebate, params)
    idx = steps - 1
    count = np.bincount(idx, minlength=n_steps)[:n_steps]
    qsum = np.bincount(idx, qmean, minlength=n_steps)[:n_steps]
    with np.errstate(invalid="ignore", divide="ignore"):
        quality = np.where(count > 0, qsum / count, np.nan)
    if params.quality_over_posted and posted_quality is not None:
        quality = np.asarray(posted_quality, dtype=float)
    rev = np.bincount(idx, revenue, minlength=n_steps)[:n_steps] / max(params.n_providers, 1)
    return quality, rev


def scenario_report(log, ledger, params: GlobalParams, n_steps: int, engine: str = "", seed: int = 0,
                    posted_quality=None) -> ScenarioReport:
    n = len(log)
    quality_series, revenue_series = step_series(log, params, n_steps, posted_quality)
    if n:
        qmean = log.quality.mean(axis=1)
        avg_quality = float(qmean.mean())
        mean_price = float(log.price.mean())
        slope, intercept = pq_regression(qmean, log.price)
    else:
        avg_quality = mean_price = slope = intercept = math.nan
    if params.quality_over_posted and posted_quality is not None and len(posted_quality):
        avg_quality = float(np.nanmean(posted_quality))
    per_provider = np.bincount(log.provider_id, provider_revenue_per_trade(log.price, log.cost, log.rebate, params),
                               minlength=params.n_providers)
    welfare = float(ledger.provider_revenue.sum()) + ledger.marketplace_revenue + ledger.operator_revenue
    return ScenarioReport(
        engine=engine, seed=seed, welfare=welfare, avg_quality=avg_quality,
        success_rate=success_rate(n, params.n_buyers, n_steps), mean_price=mean_price,
        platform_revenue=float(ledger.fees_collected),
        gini=gini(per_provider) if per_provider.size else 0.0,
        pq_slope=slope, pq_intercept=intercept, n_transactions=n,
        series_quality=series_20(quality_series), series_revenue=series_20(revenue_series))


def aggregate(reports) -> dict[str, tuple[float, float]]:
    """Per-indicator ``(mean, std)`` across seeds, ignoring undefined values."""
    out = {}
    for key in INDICATORS:
        vals = np.array([getattr(r, key) for r in reports], dtype=float)
        vals = vals[~np.isnan(vals)]
        out[key] = (float(vals.mean()), float(vals.std())) if vals.size else (math.nan, math.nan)
    return out

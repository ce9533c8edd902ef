"""Shared vocabulary of the data market: quality, strategies, offers, trades, parameters.

Quality vectors are always ordered ``(accuracy, freshness, coverage, compliance)``.
"""

from __future__ import annotations

import ast
import dataclasses
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

QUALITY_FIELDS = ("accuracy", "freshness", "coverage", "compliance")
ACC, FRESH, COV, COMP = range(4)

PRICE_FLOOR = 10.01
FEE_RATE = 0.10


@dataclass(frozen=True)
class QualityVector:
    accuracy: float
    freshness: float
    coverage: float
    compliance: float

    def __post_init__(self):
        for name in QUALITY_FIELDS:
            object.__setattr__(self, name, min(1.0, max(0.0, float(getattr(self, name)))))

    @classmethod
    def from_array(cls, values) -> "QualityVector":
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.accuracy, self.freshness, self.coverage, self.compliance])

    @property
    def mean(self) -> float:
        return (self.accuracy + self.freshness + self.coverage + self.compliance) / 4.0


class ProviderKind(enum.IntEnum):
    TRUST = 0
    PRICE = 1
    QUALITY = 2
    STANDARD = 3


class BuyerKind(enum.IntEnum):
    PRICE = 0
    QUALITY = 1
    TRUST = 2


@dataclass(frozen=True)
class ProviderStrategy:
    kind: ProviderKind
    quality_means: QualityVector
    quality_stds: tuple[float, float, float, float]
    price_mean: float
    price_std: float


@dataclass(frozen=True)
class BuyerStrategy:
    kind: BuyerKind
    # [w_acc, w_fresh, w_cov, w_comp, w_rep, w_price]
    weights: tuple[float, float, float, float, float, float]

    @property
    def quality_weights(self) -> np.ndarray:
        return np.asarray(self.weights[:4])

    @property
    def w_rep(self) -> float:
        return self.weights[4]

    @property
    def w_price(self) -> float:
        return self.weights[5]


PROVIDER_STRATEGIES = (
    ProviderStrategy(ProviderKind.TRUST, QualityVector(0.50, 0.72, 0.70, 0.60),
                     (0.10, 0.10, 0.10, 0.06), 72.0, 3.0),
    ProviderStrategy(ProviderKind.PRICE, QualityVector(0.70, 0.70, 0.70, 0.65),
                     (0.12, 0.12, 0.12, 0.10), 96.0, 4.0),
    ProviderStrategy(ProviderKind.QUALITY, QualityVector(0.80, 0.78, 0.80, 0.78),
                     (0.08, 0.08, 0.08, 0.08), 88.0, 4.0),
    ProviderStrategy(ProviderKind.STANDARD, QualityVector(0.75, 0.75, 0.75, 0.75),
                     (0.09, 0.09, 0.09, 0.09), 80.0, 3.0),
)

BUYER_STRATEGIES = (
    BuyerStrategy(BuyerKind.PRICE, (0.35, 0.25, 0.25, 0.30, 0.30, 0.20)),
    BuyerStrategy(BuyerKind.QUALITY, (0.15, 0.15, 0.15, 0.20, 0.20, 0.45)),
    BuyerStrategy(BuyerKind.TRUST, (0.25, 0.20, 0.20, 0.44, 0.45, 0.20)),
)

# Stacked strategy tables for vectorised sampling, indexed by action.
PROVIDER_QUALITY_MEANS = np.array([s.quality_means.as_array() for s in PROVIDER_STRATEGIES])
PROVIDER_QUALITY_STDS = np.array([s.quality_stds for s in PROVIDER_STRATEGIES])
PROVIDER_PRICE_MEANS = np.array([s.price_mean for s in PROVIDER_STRATEGIES])
PROVIDER_PRICE_STDS = np.array([s.price_std for s in PROVIDER_STRATEGIES])
BUYER_WEIGHTS = np.array([s.weights for s in BUYER_STRATEGIES])


@dataclass
class GlobalParams:
    """Every tunable of a simulation run.

    Defaults are the reference parameter values; fields below the
    ``# behaviour`` marker are modelling choices the tables leave open.
    """

    n_providers: int = 2000
    n_buyers: int = 2000
    n_steps: int = 120
    # cost
    b: float = 40.0
    c: float = 0.2
    d: float = 0.6
    e: float = 0.6
    f: float = 0.2
    g: float = 0.2
    # provider reward
    h: float = 10.0
    k: float = 5.0
    # buyer utility
    l: float = 0.31
    o: float = 0.68
    u: float = 0.45
    # review
    v: float = 0.5
    y: float = 0.8
    # Q-learning
    alpha: float = 0.15
    beta: float = 0.92
    # IRL
    gamma: float = 0.9
    delta: float = 0.9
    epsilon: float = 1e-3
    # reputation
    zeta: float = 0.85
    half_life: float = 25.0
    beta_pt_z: float = 0.35
    rng_seed: int = 0
    # behaviour
    fee_rate: float = FEE_RATE
    rebate_rate: float = FEE_RATE
    operator_share: float = 0.10
    rebate_compliance_threshold: float = 0.75
    k_candidates: int = 10
    purchase_threshold: float = 0.50
    blind_threshold_offset: float = 0.10
    price_ref: float = 120.0
    literal_price_term: bool = False
    strategy_scaled_terms: bool = False
    cost_on_post: bool = False
    exploration_start: float = 1.0
    exploration_decay: float = 0.995
    exploration_min: float = 0.05
    profit_buckets: int = 5
    reputation_buckets: int = 5
    success_buckets: int = 5
    utility_buckets: int = 5
    utility_cap: float = 1.5
    recent_window: int = 5
    initial_reputation_mean: float = 0.5
    initial_reputation_std: float = 0.1
    literal_eq29: bool = False
    power_nodes_only: bool = False
    power_node_fraction: float = 0.01
    pagerank_tol: float = 1e-8
    pagerank_max_iter: int = 200
    quality_over_posted: bool = False
    gross_provider_revenue: bool = False

    def replace(self, **changes) -> "GlobalParams":
        return dataclasses.replace(self, **changes)

    @property
    def decay_rate(self) -> float:
        return float(np.log(2.0) / self.half_life)


def parse_value(text: str) -> Any:
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_key_values(path: str | Path) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = parse_value(value)
    return out


def params_from_mapping(values: Mapping[str, Any], base: GlobalParams | None = None) -> GlobalParams:
    base = base or GlobalParams()
    known = {f.name: f for f in dataclasses.fields(GlobalParams)}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    coerced = {}
    for key, value in values.items():
        default = getattr(base, key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError(f"{key} expects a boolean, got {value!r}")
        elif isinstance(default, int):
            if isinstance(value, bool) or not float(value).is_integer():
                raise ValueError(f"{key} expects an integer, got {value!r}")
            value = int(value)
        else:
            value = float(value)
        coerced[key] = value
    return base.replace(**coerced)


def compute_cost(q, params: GlobalParams) -> float | np.ndarray:
    """Quadratic production cost; accepts a QualityVector or an (..., 4) array."""
    if isinstance(q, QualityVector):
        q = q.as_array()
    q = np.asarray(q, dtype=float)
    cost = params.b * (
        params.c
        + params.d * q[..., ACC] ** 2
        + params.e * q[..., COMP] ** 2
        + params.f * q[..., FRESH] ** 2
        + params.g * q[..., COV] ** 2
    )
    return float(cost) if cost.ndim == 0 else cost


@dataclass(frozen=True)
class Offer:
    provider_id: int
    quality: QualityVector
    price: float
    cost: float
    step: int = 0


@dataclass(frozen=True)
class Transaction:
    step: int
    provider_id: int
    buyer_id: int
    price: float
    cost: float
    fee: float
    refund_applied: bool
    buyer_utility: float
    review: float
    quality: QualityVector


def sample_offer(strategy: ProviderStrategy, rng: np.random.Generator, params: GlobalParams | None = None,
                 provider_id: int = 0, step: int = 0) -> Offer:
    """Draw one offer; out-of-range draws are clamped rather than redrawn."""
    params = params or GlobalParams()
    means = strategy.quality_means.as_array()
    raw = rng.normal(means, np.asarray(strategy.quality_stds))
    quality = QualityVector.from_array(np.clip(raw, 0.0, 1.0))
    price = max(float(rng.normal(strategy.price_mean, strategy.price_std)), PRICE_FLOOR)
    return Offer(provider_id, quality, price, compute_cost(quality, params), step)


def sample_offers(actions: np.ndarray, rng: np.random.Generator, params: GlobalParams):
    """Vectorised ``sample_offer`` for one offer per provider.

    Returns ``(quality (n, 4), price (n,), cost (n,))``. Draw order is fixed
    (all quality noise, then all price noise) so that runs are reproducible.
    """
    actions = np.asarray(actions)
    n = actions.shape[0]
    quality = rng.standard_normal((n, 4)) * PROVIDER_QUALITY_STDS[actions] + PROVIDER_QUALITY_MEANS[actions]
    np.clip(quality, 0.0, 1.0, out=quality)
    price = rng.standard_normal(n) * PROVIDER_PRICE_STDS[actions] + PROVIDER_PRICE_MEANS[actions]
    np.maximum(price, PRICE_FLOOR, out=price)
    return quality, price, compute_cost(quality, params)
